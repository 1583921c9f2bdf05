"""Feed-forward LIF network simulation.

Neurons use a subtraction reset:

    x_t = leak * U_{t-1} + I_t - threshold
    s_t = 1 if x_t >= 0 else 0
    U_t = leak * U_{t-1} + I_t - threshold * s_t

Spikes fire at exact threshold (x == 0). All forward dynamics are
deterministic given weights and input spikes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class LifParams:
    """Shared neuron parameters. The leak is global across layers."""

    leak: float = 0.9
    threshold: float = 1.0
    slope: float = 25.0  # fast-sigmoid surrogate slope

    def __post_init__(self):
        if not (0.0 <= self.leak < 1.0):
            raise ConfigError(f"leak must be in [0, 1), got {self.leak}")
        if self.threshold <= 0.0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if self.slope <= 0.0:
            raise ConfigError(f"slope must be > 0, got {self.slope}")


def surrogate(x, slope):
    """Fast-sigmoid derivative 1 / (1 + slope*|x|)^2, evaluated at the
    pre-threshold argument x = leak*U_{t-1} + I_t - threshold."""
    return 1.0 / np.square(1.0 + slope * np.abs(x))


@dataclass
class Network:
    """Fully connected feed-forward SNN. weights[l] has shape [n_out, n_in]."""

    weights: list
    lif: LifParams = field(default_factory=LifParams)

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ConfigError("network needs at least one layer")
        for l, w in enumerate(self.weights):
            if w.ndim != 2:
                raise ConfigError(f"layer {l} weights must be a matrix")
            if not np.all(np.isfinite(w)):
                raise ConfigError(f"layer {l} weights contain non-finite entries")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ConfigError(
                    f"layer {l} expects {w.shape[1]} inputs but layer {l-1} "
                    f"produces {self.weights[l-1].shape[0]}"
                )

    @property
    def depth(self):
        return len(self.weights)

    @property
    def widths(self):
        """[n_in, n_out layer 1, ..., n_out layer L]."""
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_in(self):
        return self.weights[0].shape[1]

    @property
    def n_out(self):
        return self.weights[-1].shape[0]

    def copy(self):
        return Network([w.copy() for w in self.weights], self.lif)

    @classmethod
    def init(cls, layer_sizes, lif=None, seed=0, dtype=np.float64, gain=1.0):
        """Scaled-uniform init with bound gain/sqrt(n_in), seedable.

        gain > 1 compensates for sparse spiking input; with ~1 input spike
        per step the default bound leaves every layer silent.
        """
        if len(layer_sizes) < 2:
            raise ConfigError("layer_sizes needs at least [n_in, n_out]")
        rng = np.random.default_rng(seed)
        weights = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = gain / np.sqrt(n_in)
            weights.append(
                rng.uniform(-bound, bound, size=(n_out, n_in)).astype(dtype)
            )
        return cls(weights, lif or LifParams())


def fresh_states(net, batch_size, dtype=np.float64):
    """Zero membrane and zero last-spike vectors for every layer."""
    return [
        (np.zeros((batch_size, w.shape[0]), dtype=dtype),
         np.zeros((batch_size, w.shape[0]), dtype=dtype))
        for w in net.weights
    ]


def lif_step(membrane, current, lif):
    """One neuron update. Returns (spikes, membrane')."""
    if membrane.shape != current.shape:
        raise ConfigError(
            f"membrane shape {membrane.shape} != input shape {current.shape}"
        )
    drive = lif.leak * membrane + current
    x = drive - lif.threshold
    spikes = (x >= 0.0).astype(membrane.dtype)
    return spikes, drive - lif.threshold * spikes


def forward_step(net, input_spikes, states):
    """Propagate one time-step through every layer.

    Returns (output spikes, new states, per-layer records), where each
    record is (x_t, s_t, s_pre_t) — everything a gradient algorithm needs.
    """
    if len(states) != net.depth:
        raise ConfigError("state list length must equal network depth")
    s_pre = input_spikes
    new_states = []
    records = []
    for w, (membrane, _) in zip(net.weights, states):
        current = s_pre @ w.T
        drive = net.lif.leak * membrane + current
        x = drive - net.lif.threshold
        spikes = (x >= 0.0).astype(membrane.dtype)
        new_states.append((drive - net.lif.threshold * spikes, spikes))
        records.append((x, spikes, s_pre))
        s_pre = spikes
    return s_pre, new_states, records


@dataclass
class Trajectory:
    """Stored unroll of a batched forward pass.

    Arrays are indexed [t][layer]; pre_activations[t][l] has shape [B, n_l].
    Storage grows linearly in T (one x/s pair per layer per step).
    """

    pre_activations: list  # [T][L] arrays [B, n_l]
    spikes: list           # [T][L] arrays [B, n_l]
    inputs: list           # [T] arrays [B, n_in] (the raster slice)
    membranes: list        # [T][L] arrays [B, n_l]

    @property
    def num_steps(self):
        return len(self.pre_activations)

    def presyn(self, t, l):
        """Pre-synaptic spikes feeding layer l at step t."""
        return self.inputs[t] if l == 0 else self.spikes[t][l - 1]

    def output_spikes(self):
        """[T, B, n_out] stack of final-layer spikes."""
        return np.stack([s[-1] for s in self.spikes])

    def element_count(self):
        total = 0
        for t in range(self.num_steps):
            for l in range(len(self.pre_activations[t])):
                total += self.pre_activations[t][l].size + self.spikes[t][l].size
        return total


def forward_sequence(net, raster, dtype=None):
    """Run a [B, T, C] (or [T, C]) binary raster through the network.

    Returns the full Trajectory needed by BPTT and by offline replay of the
    online algorithms.
    """
    squeeze = raster.ndim == 2
    if squeeze:
        raster = raster[None]
    if raster.ndim != 3:
        raise ConfigError("raster must have shape [B, T, C] or [T, C]")
    if raster.shape[0] < 1 or raster.shape[1] < 1:
        raise ConfigError("raster needs at least one example and one step")
    dtype = dtype or net.weights[0].dtype
    batch, num_steps, _ = raster.shape
    states = fresh_states(net, batch, dtype=dtype)
    pre_acts, spikes, inputs, membranes = [], [], [], []
    for t in range(num_steps):
        s0 = raster[:, t, :].astype(dtype)
        _, states, records = forward_step(net, s0, states)
        inputs.append(s0)
        pre_acts.append([r[0] for r in records])
        spikes.append([r[1] for r in records])
        membranes.append([st[0] for st in states])
    return Trajectory(pre_acts, spikes, inputs, membranes)
