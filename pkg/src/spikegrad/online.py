"""Approximate online gradient algorithms: OSTL, OTTT, OTPE, Approx OTPE
and the F-variants.

Each algorithm keeps per-layer traces updated at every time-step, and at
any step can turn a loss derivative at the output spikes into per-layer
weight gradients via a spatial (within-step) backward pass. Traces are
batched: every array carries a leading batch dimension and batch lanes
never interact.

Trace recursions, with g_t the surrogate value and A the pre-reset
influence A_ij = leak * P_ij + s_pre_j:

* OSTL:        E = g * A,  P' = (1 - threshold*g) * A  (surrogate mode)
               or P' = A (detach mode); gradient d_i * E_ij.
* OTTT:        a_hat' = leak * a_hat + s_pre; gradient d_i * g_i * a_hat_j.
* OTPE:        OSTL's E per step, plus R' = leak * R + E; hidden layers
               apply d_i * R_ij, the output layer stays OSTL-exact (E).
* Approx OTPE: z_hat' = leak * z_hat + a_hat'; g_bar = leak-weighted
               running average of g; gradient d_i * g_bar_i * z_hat_j.
* F-variants:  the output layer also uses the R (or z_hat) mechanism,
               with the output-accumulator leak, so the loss can be taken
               on a leaky sum of output spikes.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .exact import RESET_MODES
from .lif import surrogate

SPATIAL_FACTORS = ("g", "gbar")


def spatial_backward(net, delta_out, factors):
    """Within-step backward pass. factors[l] multiplies layer l's spike
    sensitivity before it crosses theta^l; returns d[l] at each layer's
    spike output ([B, n_l]). d[-1] is delta_out itself."""
    if len(factors) != net.depth:
        raise ConfigError("need one factor vector per layer")
    deltas = [None] * net.depth
    d = delta_out
    deltas[-1] = d
    for l in range(net.depth - 1, 0, -1):
        d = (d * factors[l]) @ net.weights[l]
        deltas[l - 1] = d
    return deltas


class _TraceAlgorithm:
    """Shared driver: update traces each step, then accumulate gradients."""

    name = "base"

    def init_state(self, net, batch_size, dtype=np.float64):
        raise NotImplementedError

    def update(self, state, net, records):
        """records[l] = (x_t, s_post, s_pre) from forward_step."""
        raise NotImplementedError

    def accumulate(self, state, net, grads, delta, records):
        """Add this step's contribution (summed over the batch) to grads."""
        raise NotImplementedError

    def trace_elements(self, state, batch_size):
        """Persistent trace elements per layer, per batch lane."""
        counts = []
        for layer in state:
            n = 0
            for value in layer.values():
                if np.isscalar(value):
                    n += 1
                else:
                    n += value.size // batch_size
            counts.append(n)
        return counts

    def offline_gradients(self, net, trajectory, deltas):
        """Replay a stored trajectory, returning batch-summed gradients.

        deltas: [T, B, n_out]; any batch scaling is the caller's.
        """
        batch = trajectory.inputs[0].shape[0]
        dtype = trajectory.inputs[0].dtype
        state = self.init_state(net, batch, dtype=dtype)
        grads = [np.zeros_like(w) for w in net.weights]
        for t in range(trajectory.num_steps):
            records = [
                (trajectory.pre_activations[t][l], trajectory.spikes[t][l],
                 trajectory.presyn(t, l))
                for l in range(net.depth)
            ]
            self.update(state, net, records)
            self.accumulate(state, net, grads, deltas[t], records)
        return grads

    def _check(self, reset_mode, spatial_factor):
        if reset_mode not in RESET_MODES:
            raise ConfigError(f"reset_mode must be one of {RESET_MODES}")
        if spatial_factor not in SPATIAL_FACTORS:
            raise ConfigError(f"spatial_factor must be one of {SPATIAL_FACTORS}")


def _g_factors(net, records):
    return [surrogate(records[l][0], net.lif.slope) for l in range(net.depth)]


class OSTL(_TraceAlgorithm):
    """Diagonal RTRL approximation; exact for the output layer."""

    name = "ostl"

    def __init__(self, reset_mode="surrogate"):
        self._check(reset_mode, "g")
        self.reset_mode = reset_mode

    def init_state(self, net, batch_size, dtype=np.float64):
        return [
            {"P": np.zeros((batch_size, *w.shape), dtype=dtype),
             "E": np.zeros((batch_size, *w.shape), dtype=dtype)}
            for w in net.weights
        ]

    def update(self, state, net, records):
        lif = net.lif
        for l, (x, _, s_pre) in enumerate(records):
            tr = state[l]
            g = surrogate(x, lif.slope)
            P = tr["P"]
            P *= lif.leak
            P += s_pre[:, None, :]
            tr["E"] = g[:, :, None] * P
            if self.reset_mode == "surrogate":
                P -= lif.threshold * tr["E"]

    def accumulate(self, state, net, grads, delta, records):
        ds = spatial_backward(net, delta, _g_factors(net, records))
        for l in range(net.depth):
            grads[l] += np.einsum("bi,bij->ij", ds[l], state[l]["E"], optimize=True)


class OTTT(_TraceAlgorithm):
    """Leak-weighted running sum of pre-synaptic spikes; surrogate applied
    spatially only."""

    name = "ottt"

    def init_state(self, net, batch_size, dtype=np.float64):
        return [
            {"a_hat": np.zeros((batch_size, w.shape[1]), dtype=dtype)}
            for w in net.weights
        ]

    def update(self, state, net, records):
        leak = net.lif.leak
        for l, (_, _, s_pre) in enumerate(records):
            a = state[l]["a_hat"]
            a *= leak
            a += s_pre

    def accumulate(self, state, net, grads, delta, records):
        gs = _g_factors(net, records)
        ds = spatial_backward(net, delta, gs)
        for l in range(net.depth):
            grads[l] += (ds[l] * gs[l]).T @ state[l]["a_hat"]


class OTPE(_TraceAlgorithm):
    """OSTL per-step spike Jacobians plus R, their leak-weighted sum over
    time, which carries a layer's delayed influence on the next layer.

    Hidden layers apply the incoming loss vector to R; the output layer
    stays OSTL-exact via E. With full_output_trace (the F-variant) the
    output layer uses R as well, accumulated with out_leak, so the loss can
    be taken on a leaky sum of output spikes.
    """

    name = "otpe"

    def __init__(self, reset_mode="surrogate", spatial_factor="g",
                 full_output_trace=False, out_leak=None):
        self._check(reset_mode, spatial_factor)
        self.reset_mode = reset_mode
        self.spatial_factor = spatial_factor
        self.full_output_trace = full_output_trace
        self.out_leak = out_leak
        if full_output_trace:
            self.name = "f_otpe"

    def _uses_r(self, net, l):
        return l < net.depth - 1 or self.full_output_trace

    def init_state(self, net, batch_size, dtype=np.float64):
        state = []
        for l, w in enumerate(net.weights):
            tr = {"P": np.zeros((batch_size, *w.shape), dtype=dtype)}
            key = "R" if self._uses_r(net, l) else "E"
            tr[key] = np.zeros((batch_size, *w.shape), dtype=dtype)
            if self.spatial_factor == "gbar":
                tr["g_bar"] = np.zeros((batch_size, w.shape[0]), dtype=dtype)
                tr["g_norm"] = 0.0
            state.append(tr)
        return state

    def update(self, state, net, records):
        lif = net.lif
        for l, (x, _, s_pre) in enumerate(records):
            tr = state[l]
            g = surrogate(x, lif.slope)
            P = tr["P"]
            P *= lif.leak
            P += s_pre[:, None, :]
            E = g[:, :, None] * P
            if self.reset_mode == "surrogate":
                P -= lif.threshold * E
            if self._uses_r(net, l):
                leak = lif.leak
                if l == net.depth - 1 and self.out_leak is not None:
                    leak = self.out_leak
                R = tr["R"]
                R *= leak
                R += E
            else:
                tr["E"] = E
            if self.spatial_factor == "gbar":
                norm = lif.leak * tr["g_norm"] + 1.0
                tr["g_bar"] = (lif.leak * tr["g_norm"] * tr["g_bar"] + g) / norm
                tr["g_norm"] = norm

    def accumulate(self, state, net, grads, delta, records):
        if self.spatial_factor == "gbar":
            factors = [state[l]["g_bar"] for l in range(net.depth)]
        else:
            factors = _g_factors(net, records)
        ds = spatial_backward(net, delta, factors)
        for l in range(net.depth):
            trace = state[l]["R"] if self._uses_r(net, l) else state[l]["E"]
            grads[l] += np.einsum("bi,bij->ij", ds[l], trace, optimize=True)


class ApproxOTPE(_TraceAlgorithm):
    """O(n)-state OTPE: z_hat (leak-weighted sum of a_hat) stands in for R,
    and the spatial surrogate is the running leak-weighted average g_bar."""

    name = "approx_otpe"

    def __init__(self, full_output_trace=False, out_leak=None):
        self.full_output_trace = full_output_trace
        self.out_leak = out_leak
        if full_output_trace:
            self.name = "f_approx_otpe"

    def init_state(self, net, batch_size, dtype=np.float64):
        return [
            {"a_hat": np.zeros((batch_size, w.shape[1]), dtype=dtype),
             "z_hat": np.zeros((batch_size, w.shape[1]), dtype=dtype),
             "g_bar": np.zeros((batch_size, w.shape[0]), dtype=dtype),
             "g_norm": 0.0}
            for w in net.weights
        ]

    def update(self, state, net, records):
        lif = net.lif
        for l, (x, _, s_pre) in enumerate(records):
            tr = state[l]
            g = surrogate(x, lif.slope)
            a = tr["a_hat"]
            a *= lif.leak
            a += s_pre
            z_leak = lif.leak
            if (self.full_output_trace and l == len(records) - 1
                    and self.out_leak is not None):
                z_leak = self.out_leak
            z = tr["z_hat"]
            z *= z_leak
            z += a
            norm = lif.leak * tr["g_norm"] + 1.0
            tr["g_bar"] = (lif.leak * tr["g_norm"] * tr["g_bar"] + g) / norm
            tr["g_norm"] = norm

    def accumulate(self, state, net, grads, delta, records):
        factors = [state[l]["g_bar"] for l in range(net.depth)]
        ds = spatial_backward(net, delta, factors)
        for l in range(net.depth):
            grads[l] += (ds[l] * factors[l]).T @ state[l]["z_hat"]


class OutputAccumulator:
    """Leaky sum of output-layer spikes: o' = leak * o + s_t."""

    def __init__(self, batch_size, n_classes, leak, dtype=np.float64):
        if not (0.0 <= leak <= 1.0):
            raise ConfigError(f"output leak must be in [0, 1], got {leak}")
        self.leak = leak
        self.value = np.zeros((batch_size, n_classes), dtype=dtype)
        self.norm = 0.0  # running sum of leak^k, for normalized readout

    def push(self, out_spikes):
        self.value = self.leak * self.value + out_spikes
        self.norm = self.leak * self.norm + 1.0
        return self.value


def make_algorithm(name, lif=None, reset_mode="surrogate", spatial_factor=None,
                   out_leak=None):
    """Algorithm factory used by configs and the CLI.

    spatial_factor defaults per algorithm: g for ostl/ottt/otpe, gbar for
    the approx and F- variants. out_leak defaults to the network leak.
    """
    if out_leak is None and lif is not None:
        out_leak = lif.leak
    if name == "ostl":
        return OSTL(reset_mode=reset_mode)
    if name == "ottt":
        return OTTT()
    if name == "otpe":
        return OTPE(reset_mode=reset_mode, spatial_factor=spatial_factor or "g")
    if name == "f_otpe":
        return OTPE(reset_mode=reset_mode, spatial_factor=spatial_factor or "gbar",
                    full_output_trace=True, out_leak=out_leak)
    if name == "approx_otpe":
        return ApproxOTPE()
    if name == "f_approx_otpe":
        return ApproxOTPE(full_output_trace=True, out_leak=out_leak)
    raise ConfigError(f"unknown online algorithm {name!r}")


ONLINE_ALGORITHMS = ("ostl", "ottt", "otpe", "approx_otpe", "f_otpe",
                     "f_approx_otpe")
