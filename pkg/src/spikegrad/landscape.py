"""Loss-landscape grids f(alpha, beta) = L(center + alpha*d1 + beta*d2)
and least-squares projection of checkpoints onto span{d1, d2}."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .lif import Network, forward_sequence
from .losses import loss_and_deltas

CHECKPOINT_VERSION = 1


def save_checkpoint(path, net):
    arrays = {f"w{l}": w for l, w in enumerate(net.weights)}
    np.savez(
        path, version=CHECKPOINT_VERSION, depth=net.depth,
        leak=net.lif.leak, threshold=net.lif.threshold, slope=net.lif.slope,
        **arrays,
    )


def load_checkpoint(path):
    with np.load(path) as data:
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ConfigError(
                f"unsupported checkpoint version {int(data['version'])}"
            )
        weights = [data[f"w{l}"] for l in range(int(data["depth"]))]
        from .lif import LifParams
        lif = LifParams(leak=float(data["leak"]),
                        threshold=float(data["threshold"]),
                        slope=float(data["slope"]))
    return Network(weights, lif)


def flatten_weights(weights):
    return np.concatenate([w.ravel() for w in weights])


def unflatten_like(flat, template):
    out = []
    offset = 0
    for w in template:
        out.append(flat[offset:offset + w.size].reshape(w.shape))
        offset += w.size
    return out


def direction(weights, center):
    """Raw parameter difference weights - center, flattened."""
    return flatten_weights(weights) - flatten_weights(center)


def check_directions(d1, d2, tol=1e-12):
    n1 = np.linalg.norm(d1)
    n2 = np.linalg.norm(d2)
    if n1 <= tol or n2 <= tol:
        raise ConfigError("landscape directions must be nonzero")
    cos = abs(np.dot(d1, d2)) / (n1 * n2)
    if cos > 1.0 - 1e-9:
        raise ConfigError("landscape directions are numerically collinear")


def evaluate_loss(net, spikes, labels, loss_spec):
    traj = forward_sequence(net, spikes)
    loss, _ = loss_and_deltas(loss_spec, traj.output_spikes(), labels)
    return float(loss)


def landscape_grid(center_net, d1, d2, alphas, betas, spikes, labels,
                   loss_spec):
    """Validation loss at every (alpha, beta) grid point; deterministic."""
    check_directions(d1, d2)
    center = flatten_weights(center_net.weights)
    grid = np.zeros((len(alphas), len(betas)))
    for i, alpha in enumerate(alphas):
        for j, beta in enumerate(betas):
            weights = unflatten_like(center + alpha * d1 + beta * d2,
                                     center_net.weights)
            probe = Network([w.copy() for w in weights], center_net.lif)
            grid[i, j] = evaluate_loss(probe, spikes, labels, loss_spec)
    return grid


def trajectory_project(checkpoints, center_weights, d1, d2):
    """Least-squares (alpha, beta) per checkpoint plus the residual norm."""
    check_directions(d1, d2)
    center = flatten_weights(center_weights)
    gram = np.array([[d1 @ d1, d1 @ d2], [d2 @ d1, d2 @ d2]])
    results = []
    for weights in checkpoints:
        diff = flatten_weights(weights) - center
        coeffs = np.linalg.solve(gram, np.array([d1 @ diff, d2 @ diff]))
        residual = np.linalg.norm(diff - coeffs[0] * d1 - coeffs[1] * d2)
        results.append((float(coeffs[0]), float(coeffs[1]), float(residual)))
    return results


def grid_to_csv(path, grid, alphas, betas):
    with open(path, "w") as fh:
        fh.write("# spikegrad-landscape v1\n")
        fh.write("alpha,beta,loss\n")
        for i, alpha in enumerate(alphas):
            for j, beta in enumerate(betas):
                fh.write(f"{alpha:.10g},{beta:.10g},{grid[i, j]:.10g}\n")


def trajectory_to_csv(path, projections):
    with open(path, "w") as fh:
        fh.write("# spikegrad-trajectory v1\n")
        fh.write("checkpoint,alpha,beta,residual\n")
        for k, (alpha, beta, residual) in enumerate(projections):
            fh.write(f"{k},{alpha:.10g},{beta:.10g},{residual:.10g}\n")
