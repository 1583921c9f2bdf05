import numpy as np
import pytest

from spikegrad import landscape as ls
from spikegrad.errors import ConfigError
from spikegrad.losses import LossSpec

from conftest import random_net, random_raster


@pytest.fixture
def setting():
    net = random_net([6, 5, 4], seed=0)
    raster = random_raster(8, 10, 6, seed=1)
    labels = np.random.default_rng(2).integers(4, size=8)
    spec = LossSpec(kind="sequence_ce_on_sum", n_classes=4)
    return net, raster, labels, spec


class TestCheckpointIO:
    def test_round_trip(self, tmp_path, setting):
        net = setting[0]
        path = tmp_path / "ckpt.npz"
        ls.save_checkpoint(path, net)
        back = ls.load_checkpoint(path)
        assert back.depth == net.depth
        assert back.lif == net.lif
        for a, b in zip(back.weights, net.weights):
            assert np.array_equal(a, b)

    def test_version_checked(self, tmp_path, setting):
        path = tmp_path / "ckpt.npz"
        np.savez(path, version=99, depth=1, leak=0.9, threshold=1.0,
                 slope=25.0, w0=np.zeros((2, 2)))
        with pytest.raises(ConfigError):
            ls.load_checkpoint(path)


class TestFlattening:
    def test_flatten_unflatten_inverse(self, setting):
        net = setting[0]
        flat = ls.flatten_weights(net.weights)
        back = ls.unflatten_like(flat, net.weights)
        for a, b in zip(back, net.weights):
            assert np.array_equal(a, b)

    def test_direction_is_difference(self, setting):
        net = setting[0]
        other = [w + 1.0 for w in net.weights]
        d = ls.direction(other, net.weights)
        assert np.allclose(d, 1.0)


class TestDirectionChecks:
    def test_zero_direction_rejected(self):
        with pytest.raises(ConfigError):
            ls.check_directions(np.zeros(4), np.ones(4))

    def test_collinear_rejected(self):
        d = np.arange(1.0, 5.0)
        with pytest.raises(ConfigError):
            ls.check_directions(d, 2.0 * d)

    def test_independent_accepted(self):
        ls.check_directions(np.array([1.0, 0.0]), np.array([1.0, 1.0]))


class TestGrid:
    def test_center_cell_equals_direct_loss(self, setting):
        net, raster, labels, spec = setting
        rng = np.random.default_rng(3)
        flat = ls.flatten_weights(net.weights)
        d1 = rng.normal(size=flat.size)
        d2 = rng.normal(size=flat.size)
        grid = ls.landscape_grid(net, d1, d2, [-0.5, 0.0], [0.0, 0.5],
                                 raster, labels, spec)
        direct = ls.evaluate_loss(net, raster, labels, spec)
        assert grid[1, 0] == direct
        assert np.isfinite(grid).all()

    def test_grid_deterministic(self, setting):
        net, raster, labels, spec = setting
        flat = ls.flatten_weights(net.weights)
        rng = np.random.default_rng(4)
        d1, d2 = rng.normal(size=flat.size), rng.normal(size=flat.size)
        a = ls.landscape_grid(net, d1, d2, [0.0, 1.0], [0.0, 1.0],
                              raster, labels, spec)
        b = ls.landscape_grid(net, d1, d2, [0.0, 1.0], [0.0, 1.0],
                              raster, labels, spec)
        assert np.array_equal(a, b)


class TestProjection:
    def test_exact_span_membership(self, setting):
        net = setting[0]
        flat = ls.flatten_weights(net.weights)
        rng = np.random.default_rng(5)
        d1, d2 = rng.normal(size=flat.size), rng.normal(size=flat.size)
        cases = [
            (flat, (0.0, 0.0)),
            (flat + d1, (1.0, 0.0)),
            (flat + d2, (0.0, 1.0)),
            (flat + 2.0 * d1 + 3.0 * d2, (2.0, 3.0)),
        ]
        checkpoints = [ls.unflatten_like(v, net.weights) for v, _ in cases]
        results = ls.trajectory_project(checkpoints, net.weights, d1, d2)
        for (alpha, beta, residual), (_, expected) in zip(results, cases):
            assert alpha == pytest.approx(expected[0], abs=1e-9)
            assert beta == pytest.approx(expected[1], abs=1e-9)
            assert residual < 1e-9

    def test_off_span_residual_positive(self, setting):
        net = setting[0]
        flat = ls.flatten_weights(net.weights)
        d1 = np.zeros(flat.size)
        d2 = np.zeros(flat.size)
        d1[0], d2[1] = 1.0, 1.0
        off = flat.copy()
        off[2] += 5.0
        results = ls.trajectory_project([ls.unflatten_like(off, net.weights)],
                                        net.weights, d1, d2)
        assert results[0][2] == pytest.approx(5.0)


class TestCsv:
    def test_grid_csv_header(self, tmp_path):
        path = tmp_path / "grid.csv"
        ls.grid_to_csv(path, np.ones((2, 2)), [0.0, 1.0], [0.0, 1.0])
        lines = path.read_text().splitlines()
        assert lines[0] == "# spikegrad-landscape v1"
        assert lines[1] == "alpha,beta,loss"
        assert len(lines) == 6

    def test_trajectory_csv_header(self, tmp_path):
        path = tmp_path / "traj.csv"
        ls.trajectory_to_csv(path, [(0.0, 0.0, 0.0), (1.0, 2.0, 0.5)])
        lines = path.read_text().splitlines()
        assert lines[0] == "# spikegrad-trajectory v1"
        assert lines[1] == "checkpoint,alpha,beta,residual"
        assert lines[3] == "1,1,2,0.5"
