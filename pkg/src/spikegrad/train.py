"""Training loops (offline and online), gradient dispatch, cosine
diagnostics, and run logging."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .errors import ConfigError
from .lif import Network, forward_sequence, forward_step, fresh_states
from .losses import LossSpec, accuracy, ce_and_delta, loss_and_deltas
from .online import ONLINE_ALGORITHMS, OutputAccumulator, make_algorithm
from .optim import Adamax
from .randman import RandmanSampler, RandmanSpec, make_raster
from .raster_io import raster_read, split_train_valid

ALGORITHMS = ("bptt", "rtrl") + ONLINE_ALGORITHMS


def cosine_parts(a, b):
    """(cosine, degenerate) for two flat vectors; zero-norm reports (0, True)."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0, True
    return float(np.dot(a, b) / (na * nb)), False


def cosine_similarity(grads_a, grads_b, scope="model_wide"):
    """Gradient cosine similarity; per_layer returns one value per layer."""
    if scope == "per_layer":
        return [cosine_parts(a.ravel(), b.ravel())[0]
                for a, b in zip(grads_a, grads_b)]
    if scope == "model_wide":
        flat_a = np.concatenate([g.ravel() for g in grads_a])
        flat_b = np.concatenate([g.ravel() for g in grads_b])
        return cosine_parts(flat_a, flat_b)[0]
    raise ConfigError("scope must be per_layer or model_wide")


def batch_gradients(algorithm, net, spikes, labels, loss_spec,
                    reset_mode="surrogate", spatial_factor=None,
                    memory_cap=exact.RTRL_DEFAULT_MEMORY_CAP,
                    trajectory=None):
    """Mean-over-batch gradients for one minibatch under any algorithm.

    Returns (loss, grads, trajectory). A precomputed trajectory may be
    passed to share the forward pass across algorithms.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    if trajectory is None:
        trajectory = forward_sequence(net, spikes)
    out = trajectory.output_spikes()
    loss, deltas = loss_and_deltas(loss_spec, out, labels)
    if algorithm == "bptt":
        grads = exact.bptt_gradients(net, trajectory, deltas, reset_mode)
    elif algorithm == "rtrl":
        grads = [np.zeros_like(w) for w in net.weights]
        for e in range(spikes.shape[0]):
            example_grads = exact.rtrl_gradients(
                net, spikes[e], deltas[:, e, :], reset_mode, memory_cap
            )
            for g, ge in zip(grads, example_grads):
                g += ge
    else:
        algo = make_algorithm(algorithm, lif=net.lif, reset_mode=reset_mode,
                              spatial_factor=spatial_factor,
                              out_leak=loss_spec.out_leak)
        grads = algo.offline_gradients(net, trajectory, deltas)
    return loss, grads, trajectory


class RandmanSource:
    """Streaming Randman batches plus a disjoint fixed validation set."""

    _VALIDATION_STREAM = 1_000_000  # batch-index offset, never reached in training

    def __init__(self, spec, kind, batch_size, valid_examples):
        self.spec = spec
        self.kind = kind
        self.sampler = RandmanSampler(spec, kind, batch_size)
        raster = make_raster(spec, kind, valid_examples,
                             first_batch_index=self._VALIDATION_STREAM)
        self._valid = (raster.spikes, raster.labels)

    @property
    def n_channels(self):
        return self.spec.n_units

    @property
    def n_steps(self):
        return self.spec.n_steps

    @property
    def n_classes(self):
        return self.spec.n_classes

    def train_batch(self, index):
        return self.sampler.batch(index)

    def validation(self):
        return self._valid


class RasterSource:
    """Fixed raster file: seeded train/valid split, batches sampled with
    replacement from the training part."""

    def __init__(self, path, batch_size, valid_fraction, seed):
        raster = raster_read(path)
        self.train, self.valid = split_train_valid(raster, valid_fraction, seed)
        self.batch_size = batch_size
        self.seed = seed
        self._raster = raster

    @property
    def n_channels(self):
        return self._raster.channels

    @property
    def n_steps(self):
        return self._raster.n_steps

    @property
    def n_classes(self):
        return self._raster.n_classes

    def train_batch(self, index):
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, index, 0xBA7C])
        )
        idx = rng.integers(self.train.num_examples, size=self.batch_size)
        return self.train.spikes[idx], self.train.labels[idx]

    def validation(self):
        return self.valid.spikes, self.valid.labels


@dataclass
class RunLog:
    """Append-only per-minibatch records plus the config snapshot."""

    config: dict
    columns: list
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)  # optional weight copies
    version: int = 1

    def append(self, **fields):
        if "minibatch" not in fields:
            raise ConfigError("every record carries its minibatch index")
        self.records.append(fields)

    def column(self, name):
        return [r.get(name) for r in self.records]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# spikegrad-runlog v{self.version}\n")
            fh.write(",".join(self.columns) + "\n")
            for rec in self.records:
                row = []
                for col in self.columns:
                    value = rec.get(col)
                    if value is None:
                        row.append("")
                    elif isinstance(value, float):
                        row.append(f"{value:.10g}")
                    else:
                        row.append(str(value))
                fh.write(",".join(row) + "\n")

    def write_config(self, path):
        with open(path, "w") as fh:
            json.dump(self.config, fh, indent=2, sort_keys=True)
            fh.write("\n")


def make_source(config):
    if config.dataset_kind in ("randman_t", "randman_r"):
        spec = RandmanSpec(
            intrinsic_dim=config.randman_dim,
            n_classes=config.n_classes,
            n_units=config.n_units,
            alpha=config.randman_alpha,
            n_harmonics=config.randman_harmonics,
            n_steps=config.n_steps,
            seed=config.seed,
        )
        return RandmanSource(spec, config.dataset_kind[-1], config.batch_size,
                             config.valid_examples)
    if config.dataset_kind == "raster_file":
        if not config.raster_path:
            raise ConfigError("dataset.kind=raster_file needs dataset.path")
        return RasterSource(config.raster_path, config.batch_size,
                            config.valid_fraction, config.seed)
    raise ConfigError(f"unknown dataset kind {config.dataset_kind!r}")


def build_network(config, n_channels, n_classes):
    sizes = [n_channels] + [config.width] * config.hidden_layers + [n_classes]
    return Network.init(sizes, config.lif_params(), seed=config.seed,
                        dtype=np.dtype(config.dtype), gain=config.init_gain)


def _validate_net(net, source, batch_size=512):
    spikes, labels = source.validation()
    correct = 0
    for start in range(0, spikes.shape[0], batch_size):
        traj = forward_sequence(net, spikes[start:start + batch_size])
        out = traj.output_spikes()
        correct += (out.sum(axis=0).argmax(axis=-1)
                    == labels[start:start + batch_size]).sum()
    return float(correct) / spikes.shape[0]


def _run_columns(net, compare):
    cols = ["minibatch", "train_loss", "val_accuracy", "wall_clock_s",
            "trace_elements"]
    if compare:
        cols += [f"cos_layer{l}" for l in range(net.depth)] + ["cos_model"]
    return cols


def _trace_element_total(algorithm, net, config):
    if algorithm in ("bptt", "rtrl"):
        return 0
    algo = make_algorithm(algorithm, lif=net.lif, reset_mode=config.reset_mode,
                          spatial_factor=config.spatial_factor,
                          out_leak=config.out_leak)
    state = algo.init_state(net, 1, dtype=np.dtype(config.dtype))
    return int(sum(algo.trace_elements(state, 1)))


def train_offline(config):
    """One optimizer update per minibatch; each algorithm accumulates its
    gradient over all T steps of the stored forward pass."""
    config.validate()
    source = make_source(config)
    net = build_network(config, source.n_channels, source.n_classes)
    opt = Adamax(net.weights, lr=config.lr, beta1=config.beta1,
                 beta2=config.beta2, eps=config.eps)
    loss_spec = config.loss_spec(source.n_classes)
    log = RunLog(config.snapshot(), _run_columns(net, config.compare_with_bptt))
    trace_total = _trace_element_total(config.algorithm, net, config)
    start = time.perf_counter()
    for i in range(config.minibatches):
        spikes, labels = source.train_batch(i)
        loss, grads, traj = batch_gradients(
            config.algorithm, net, spikes, labels, loss_spec,
            reset_mode=config.reset_mode, spatial_factor=config.spatial_factor,
            memory_cap=config.rtrl_memory_cap,
        )
        rec = {"minibatch": i, "train_loss": float(loss),
               "trace_elements": trace_total}
        if config.compare_with_bptt and config.algorithm != "bptt":
            # side-by-side BPTT on the same minibatch, never applied
            _, ref, _ = batch_gradients("bptt", net, spikes, labels, loss_spec,
                                        reset_mode=config.reset_mode,
                                        trajectory=traj)
            per_layer = cosine_similarity(grads, ref, "per_layer")
            for l, c in enumerate(per_layer):
                rec[f"cos_layer{l}"] = c
            rec["cos_model"] = cosine_similarity(grads, ref, "model_wide")
        opt.step(grads)
        if (i + 1) % config.valid_every == 0 or i == config.minibatches - 1:
            rec["val_accuracy"] = _validate_net(net, source)
        if config.checkpoint_every and (i + 1) % config.checkpoint_every == 0:
            log.checkpoints.append([w.copy() for w in net.weights])
        rec["wall_clock_s"] = time.perf_counter() - start
        log.append(**rec)
    return log, net


def train_online(config):
    """Parameters update at every time-step from the instantaneous loss.

    BPTT needs the stored unroll and is rejected here. F-variants take the
    loss on a leaky sum of output spikes; everything else uses the current
    step's output spikes.
    """
    config.validate()
    if config.algorithm == "bptt":
        raise ConfigError("bptt cannot run online; it requires the full unroll")
    source = make_source(config)
    net = build_network(config, source.n_channels, source.n_classes)
    opt = Adamax(net.weights, lr=config.lr, beta1=config.beta1,
                 beta2=config.beta2, eps=config.eps)
    loss_spec = config.loss_spec(source.n_classes)
    is_f = config.algorithm.startswith("f_")
    dtype = np.dtype(config.dtype)
    log = RunLog(config.snapshot(), _run_columns(net, False))
    trace_total = _trace_element_total(config.algorithm, net, config)
    if config.algorithm != "rtrl":
        algo = make_algorithm(config.algorithm, lif=net.lif,
                              reset_mode=config.reset_mode,
                              spatial_factor=config.spatial_factor,
                              out_leak=loss_spec.out_leak)
    start = time.perf_counter()
    for i in range(config.minibatches):
        spikes, labels = source.train_batch(i)
        batch = spikes.shape[0]
        if config.algorithm == "rtrl":
            loss_sum = _online_minibatch_rtrl(config, net, opt, spikes, labels,
                                              loss_spec)
        else:
            loss_sum = _online_minibatch_traced(config, net, opt, algo, spikes,
                                                labels, loss_spec, is_f, dtype)
        rec = {"minibatch": i, "train_loss": loss_sum,
               "trace_elements": trace_total}
        if (i + 1) % config.valid_every == 0 or i == config.minibatches - 1:
            rec["val_accuracy"] = _validate_net(net, source)
        if config.checkpoint_every and (i + 1) % config.checkpoint_every == 0:
            log.checkpoints.append([w.copy() for w in net.weights])
        rec["wall_clock_s"] = time.perf_counter() - start
        log.append(**rec)
    return log, net


def _online_minibatch_traced(config, net, opt, algo, spikes, labels, loss_spec,
                             is_f, dtype):
    batch, num_steps, _ = spikes.shape
    state = algo.init_state(net, batch, dtype=dtype)
    lif_states = fresh_states(net, batch, dtype=dtype)
    acc = OutputAccumulator(batch, net.n_out, loss_spec.out_leak, dtype) \
        if is_f else None
    pending = [np.zeros_like(w) for w in net.weights]
    loss_sum = 0.0
    for t in range(num_steps):
        s0 = spikes[:, t, :].astype(dtype)
        out, lif_states, records = forward_step(net, s0, lif_states)
        algo.update(state, net, records)
        if is_f:
            # normalized leaky-sum readout; the 1/norm factor rides on delta
            acc.push(out)
            loss_t, delta = ce_and_delta(acc.value / acc.norm, labels,
                                         loss_spec.n_classes)
            delta = delta / acc.norm
        else:
            loss_t, delta = ce_and_delta(out, labels, loss_spec.n_classes)
        loss_sum += float(loss_t)
        if config.online_update_every_step:
            grads = [np.zeros_like(w) for w in net.weights]
            algo.accumulate(state, net, grads, delta, records)
            opt.step(grads)
        else:
            algo.accumulate(state, net, pending, delta, records)
    if not config.online_update_every_step:
        opt.step(pending)
    return loss_sum


def _online_minibatch_rtrl(config, net, opt, spikes, labels, loss_spec):
    if loss_spec.kind != "per_step_ce":
        raise ConfigError("online rtrl supports per_step_ce only")
    batch, num_steps, _ = spikes.shape
    states = [exact.RTRLState(net, config.reset_mode, config.rtrl_memory_cap)
              for _ in range(batch)]
    loss_sum = 0.0
    for t in range(num_steps):
        outs = np.stack([st.step(spikes[e, t, :]) for e, st in enumerate(states)])
        loss_t, delta = ce_and_delta(outs, labels, loss_spec.n_classes)
        loss_sum += float(loss_t)
        grads = [np.zeros_like(w) for w in net.weights]
        for e, st in enumerate(states):
            for g, ge in zip(grads, st.instantaneous_gradients(delta[e])):
                g += ge
        if config.online_update_every_step:
            opt.step(grads)
    return loss_sum


def compare_against_bptt(config, algorithms):
    """Fidelity run: weights follow the BPTT trajectory; every requested
    algorithm's gradients are measured on the same minibatches.

    Returns a RunLog with per-layer and model-wide cosine columns per
    algorithm.
    """
    config.validate()
    source = make_source(config)
    net = build_network(config, source.n_channels, source.n_classes)
    opt = Adamax(net.weights, lr=config.lr, beta1=config.beta1,
                 beta2=config.beta2, eps=config.eps)
    loss_spec = config.loss_spec(source.n_classes)
    columns = ["minibatch", "train_loss"]
    for name in algorithms:
        columns += [f"{name}_cos_layer{l}" for l in range(net.depth)]
        columns += [f"{name}_cos_model"]
    log = RunLog(config.snapshot(), columns)
    for i in range(config.minibatches):
        spikes, labels = source.train_batch(i)
        loss, ref, traj = batch_gradients(
            "bptt", net, spikes, labels, loss_spec,
            reset_mode=config.reset_mode,
        )
        rec = {"minibatch": i, "train_loss": float(loss)}
        for name in algorithms:
            _, grads, _ = batch_gradients(
                name, net, spikes, labels, loss_spec,
                reset_mode=config.reset_mode,
                spatial_factor=config.spatial_factor,
                memory_cap=config.rtrl_memory_cap, trajectory=traj,
            )
            for l, c in enumerate(cosine_similarity(grads, ref, "per_layer")):
                rec[f"{name}_cos_layer{l}"] = c
            rec[f"{name}_cos_model"] = cosine_similarity(grads, ref,
                                                         "model_wide")
        opt.step(ref)
        log.append(**rec)
    return log, net
