"""Cross-entropy losses over spike outputs and their derivatives at the
output spikes, which is what every gradient engine consumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LOSS_KINDS = ("per_step_ce", "sequence_ce_on_sum", "leaky_sum_ce")


@dataclass(frozen=True)
class LossSpec:
    kind: str = "sequence_ce_on_sum"
    n_classes: int = 10
    out_leak: float = 1.0  # only used by leaky_sum_ce

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"loss kind must be one of {LOSS_KINDS}")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if not (0.0 <= self.out_leak <= 1.0):
            raise ConfigError("out_leak must be in [0, 1]")


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels, n_classes):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ConfigError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def ce_and_delta(logits, labels, n_classes):
    """Softmax cross-entropy on [B, n] logits.

    Returns (mean loss over the batch, d(mean loss)/d(logits)), so the delta
    already carries the 1/B factor.
    """
    labels = _check_labels(labels, n_classes)
    batch = logits.shape[0]
    p = softmax(logits)
    eps = np.finfo(p.dtype).tiny
    loss = -np.log(p[np.arange(batch), labels] + eps).mean()
    delta = p.copy()
    delta[np.arange(batch), labels] -= 1.0
    return loss, delta / batch


def loss_and_deltas(spec, out_spikes, labels):
    """Loss and per-step deltas for a full [T, B, n_out] output sequence.

    Returns (mean loss, deltas [T, B, n_out]) with deltas routed to the
    output spikes: for the summed losses the accumulator chain
    o = sum_t out_leak^(T-t) s_t gives d(o_T)/d(s_t) = out_leak^(T-t).
    """
    if out_spikes.ndim != 3 or out_spikes.shape[2] != spec.n_classes:
        raise ConfigError("out_spikes must have shape [T, B, n_classes]")
    num_steps = out_spikes.shape[0]
    if spec.kind == "per_step_ce":
        deltas = np.empty_like(out_spikes)
        total = 0.0
        for t in range(num_steps):
            loss_t, deltas[t] = ce_and_delta(out_spikes[t], labels, spec.n_classes)
            total += loss_t
        return total, deltas
    leak = 1.0 if spec.kind == "sequence_ce_on_sum" else spec.out_leak
    weights = leak ** np.arange(num_steps - 1, -1, -1, dtype=out_spikes.dtype)
    # normalize by the total accumulation weight: softmax on a raw spike-count
    # sum saturates (counts reach T), starving the gradient of direction
    norm = weights.sum()
    acc = np.einsum("t,tbn->bn", weights, out_spikes) / norm
    loss, delta_acc = ce_and_delta(acc, labels, spec.n_classes)
    deltas = (weights / norm)[:, None, None] * delta_acc[None]
    return loss, deltas


def predictions(out_spikes):
    """argmax of time-summed output spikes; [T, B, n] -> [B]."""
    return out_spikes.sum(axis=0).argmax(axis=-1)


def accuracy(out_spikes, labels):
    return float((predictions(out_spikes) == np.asarray(labels)).mean())
