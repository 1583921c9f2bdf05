"""Exact gradient engines: reverse-mode through time (BPTT) and
forward-mode RTRL.

Both support two conventions for differentiating the subtraction reset:

* ``reset_mode="detach"``   — the spike inside the reset is treated as a
  constant, so dU_t/dU_{t-1} = leak.
* ``reset_mode="surrogate"`` — the reset keeps the surrogate, so
  dU_t/dU_{t-1} = leak * (1 - threshold * g_t).

The spike output path (U -> s) always uses the surrogate derivative; the
mode only changes the reset path. Under the same mode, RTRL and BPTT
produce identical gradients.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ResourceCapError
from .lif import surrogate

RESET_MODES = ("detach", "surrogate")

# Default refusal threshold for RTRL influence-tensor storage (elements).
RTRL_DEFAULT_MEMORY_CAP = 20_000_000


def _check_reset_mode(reset_mode):
    if reset_mode not in RESET_MODES:
        raise ConfigError(f"reset_mode must be one of {RESET_MODES}, got {reset_mode!r}")


def bptt_gradients(net, trajectory, deltas, reset_mode="surrogate"):
    """Reverse-mode gradients through the stored unroll.

    deltas: [T, B, n_out] loss derivative at the output spikes (any batch
    scaling is the caller's choice; sums over the batch are taken here in
    fixed order). Returns one gradient matrix per layer.
    """
    _check_reset_mode(reset_mode)
    num_steps = trajectory.num_steps
    if deltas.shape[0] != num_steps:
        raise ConfigError("deltas must cover every time-step of the trajectory")
    if deltas.shape[2] != net.n_out:
        raise ConfigError("deltas width must match the network output size")
    lif = net.lif
    grads = [np.zeros_like(w) for w in net.weights]
    # ds[t] = dL/ds^l_t for the layer currently being processed.
    ds = [deltas[t] for t in range(num_steps)]
    for l in range(net.depth - 1, -1, -1):
        w = net.weights[l]
        ds_below = [None] * num_steps
        du_carry = np.zeros_like(ds[num_steps - 1])
        for t in range(num_steps - 1, -1, -1):
            g = surrogate(trajectory.pre_activations[t][l], lif.slope)
            if reset_mode == "detach":
                reset_factor = 1.0
            else:
                reset_factor = 1.0 - lif.threshold * g
            da = ds[t] * g + du_carry * reset_factor
            du_carry = lif.leak * da
            grads[l] += da.T @ trajectory.presyn(t, l)
            if l > 0:
                ds_below[t] = da @ w
        ds = ds_below
    return grads


def rtrl_influence_elements(net):
    """Total element count of the RTRL influence tensors for this network."""
    widths = net.widths
    total = 0
    for l in range(net.depth):
        for m in range(l + 1):
            total += widths[l + 1] * widths[m + 1] * widths[m]
    return total


class RTRLState:
    """Incremental forward-mode differentiation for a single example.

    Maintains dU^l_t/dtheta^m for every layer pair m <= l; storage is cubic
    in the widths, so configurations above memory_cap are refused.
    """

    def __init__(self, net, reset_mode="surrogate",
                 memory_cap=RTRL_DEFAULT_MEMORY_CAP):
        _check_reset_mode(reset_mode)
        needed = rtrl_influence_elements(net)
        if needed > memory_cap:
            raise ResourceCapError(
                f"RTRL influence tensors need {needed} elements, "
                f"cap is {memory_cap}"
            )
        self.net = net
        self.reset_mode = reset_mode
        dtype = net.weights[0].dtype
        # influence[l][m]: dU^l/dtheta^m, shape [n_l, n_m_out, n_m_in]
        self.influence = [
            [np.zeros((net.weights[l].shape[0], *net.weights[m].shape),
                      dtype=dtype)
             for m in range(l + 1)]
            for l in range(net.depth)
        ]
        self.membranes = [np.zeros(w.shape[0], dtype=dtype)
                          for w in net.weights]
        self._out_spike_infl = None

    def step(self, input_spikes):
        """Advance one time-step; returns the output spikes."""
        net = self.net
        lif = net.lif
        dtype = net.weights[0].dtype
        s_pre = np.asarray(input_spikes, dtype=dtype)
        spike_infl_prev = None  # ds^{l-1}/dtheta^m for m <= l-1
        for l in range(net.depth):
            w = net.weights[l]
            drive = lif.leak * self.membranes[l] + s_pre @ w.T
            x = drive - lif.threshold
            spikes = (x >= 0.0).astype(dtype)
            g = surrogate(x, lif.slope)
            self.membranes[l] = drive - lif.threshold * spikes
            spike_infl = []
            for m in range(l + 1):
                pre_reset = lif.leak * self.influence[l][m]
                if m == l:
                    # direct term: dI_i/dtheta_ij = s_pre_j on the diagonal
                    idx = np.arange(w.shape[0])
                    pre_reset[idx, idx, :] += s_pre
                else:
                    pre_reset += np.einsum(
                        "ip,pab->iab", w, spike_infl_prev[m], optimize=True
                    )
                s_infl = g[:, None, None] * pre_reset
                if self.reset_mode == "detach":
                    self.influence[l][m] = pre_reset
                else:
                    self.influence[l][m] = pre_reset - lif.threshold * s_infl
                spike_infl.append(s_infl)
            spike_infl_prev = spike_infl
            s_pre = spikes
        self._out_spike_infl = spike_infl_prev
        return s_pre

    def instantaneous_gradients(self, delta):
        """Gradients of delta . s^L_t at the current step, per layer."""
        if self._out_spike_infl is None:
            raise ConfigError("call step() before requesting gradients")
        return [
            np.einsum("i,iab->ab", delta, self._out_spike_infl[m],
                      optimize=True)
            for m in range(self.net.depth)
        ]


def rtrl_gradients(net, raster_example, deltas, reset_mode="surrogate",
                   memory_cap=RTRL_DEFAULT_MEMORY_CAP):
    """Forward-mode gradients for a single [T, C] example, accumulated
    online without storing the trajectory.

    deltas: [T, n_out] loss derivative at the output spikes.
    """
    if raster_example.ndim != 2:
        raise ConfigError("rtrl_gradients takes a single [T, C] example")
    state = RTRLState(net, reset_mode, memory_cap)
    grads = [np.zeros_like(w) for w in net.weights]
    for t in range(raster_example.shape[0]):
        state.step(raster_example[t])
        for g, ge in zip(grads, state.instantaneous_gradients(deltas[t])):
            g += ge
    return grads
