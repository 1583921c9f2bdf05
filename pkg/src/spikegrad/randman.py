"""Synthetic spiking classification data from random smooth manifolds.

Each class gets a random smooth map from [0,1]^D intrinsic coordinates to
[0,1]^N embedding values, built from a truncated Fourier series (harmonics
1..K, uniform random amplitudes decayed by k^-alpha, uniform random phases,
summed over intrinsic dimensions) and min-max normalized per embedding
coordinate over a dense probe sample.

Two spike encodings:

* time ("t"): neuron i fires exactly once, at step floor(x_i * (T-1)).
* rate ("r"): neuron i receives round(x_i * max_spikes) spikes at uniformly
  shuffled distinct steps, so counts carry the class and timing does not.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .raster_io import SpikeRaster

KINDS = ("r", "t")
_PROBE_POINTS = 4096


@dataclass(frozen=True)
class RandmanSpec:
    intrinsic_dim: int = 3
    n_classes: int = 10
    n_units: int = 50
    alpha: float = 1.0
    n_harmonics: int = 4
    n_steps: int = 50
    seed: int = 0
    max_rate_spikes: int | None = None  # defaults to n_steps

    def __post_init__(self):
        if self.intrinsic_dim < 1 or self.n_harmonics < 1:
            raise ConfigError("intrinsic_dim and n_harmonics must be >= 1")
        if self.alpha <= 0.0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.n_classes < 2 or self.n_units < 1 or self.n_steps < 1:
            raise ConfigError("invalid class/unit/step counts")

    @property
    def rate_spike_budget(self):
        budget = self.max_rate_spikes if self.max_rate_spikes else self.n_steps
        return min(budget, self.n_steps)


class Manifold:
    """Random smooth map [0,1]^D -> [0,1]^N, deterministic per
    (spec.seed, class_id)."""

    def __init__(self, spec, class_id):
        self.spec = spec
        rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, class_id, 0x5EED])
        )
        shape = (spec.n_units, spec.intrinsic_dim, spec.n_harmonics)
        k = np.arange(1, spec.n_harmonics + 1, dtype=np.float64)
        self.amplitudes = rng.uniform(0.0, 1.0, size=shape) * k ** (-spec.alpha)
        self.phases = rng.uniform(0.0, 1.0, size=shape)
        probe_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, class_id, 0x9B0B])
        )
        probe = probe_rng.uniform(size=(_PROBE_POINTS, spec.intrinsic_dim))
        raw = self._raw(probe)
        self._lo = raw.min(axis=0)
        span = raw.max(axis=0) - self._lo
        self._span = np.where(span > 0.0, span, 1.0)

    def _raw(self, z):
        k = np.arange(1, self.spec.n_harmonics + 1, dtype=np.float64)
        # angles[m, i, d, k] = 2*pi*(k * z_d + phase_{i,d,k})
        angles = 2.0 * np.pi * (
            z[:, None, :, None] * k[None, None, None, :]
            + self.phases[None, :, :, :]
        )
        # sum the per-dimension 1-D series over dimensions and harmonics
        return np.einsum("idk,midk->mi", self.amplitudes, np.sin(angles),
                         optimize=True)

    def evaluate(self, z):
        """z: [M, D] in [0,1]; returns [M, N] in [0,1]."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.spec.intrinsic_dim:
            raise ConfigError("z must have shape [M, intrinsic_dim]")
        raw = self._raw(z)
        return np.clip((raw - self._lo) / self._span, 0.0, 1.0)


def time_sample(values, n_steps):
    """One spike per unit at step floor(x * (T-1)). values: [N] or [M, N]."""
    values = np.atleast_2d(values)
    times = np.floor(values * (n_steps - 1)).astype(np.int64)
    times = np.clip(times, 0, n_steps - 1)
    m, n = values.shape
    spikes = np.zeros((m, n_steps, n), dtype=np.uint8)
    rows = np.repeat(np.arange(m), n)
    cols = np.tile(np.arange(n), m)
    spikes[rows, times.ravel(), cols] = 1
    return spikes if values.shape[0] > 1 else spikes[0]


def rate_sample(values, n_steps, rng, max_spikes=None):
    """round(x * max_spikes) spikes per unit at distinct shuffled steps."""
    values = np.atleast_2d(values)
    budget = min(max_spikes or n_steps, n_steps)
    counts = np.rint(np.asarray(values) * budget).astype(np.int64)
    if np.any(counts > n_steps):
        warnings.warn("requested spike count exceeds n_steps; clamping")
        counts = np.minimum(counts, n_steps)
    m, n = values.shape
    spikes = np.zeros((m, n_steps, n), dtype=np.uint8)
    for e in range(m):
        for i in range(n):
            c = counts[e, i]
            if c > 0:
                steps = rng.choice(n_steps, size=c, replace=False)
                spikes[e, steps, i] = 1
    return spikes if values.shape[0] > 1 else spikes[0]


class _ManifoldCache:
    def __init__(self, spec):
        self.spec = spec
        self._cache = {}

    def __getitem__(self, class_id):
        if class_id not in self._cache:
            self._cache[class_id] = Manifold(self.spec, class_id)
        return self._cache[class_id]


def sample_batch(spec, kind, batch_size, batch_index, manifolds=None):
    """Fresh intrinsic coordinates per batch, seeded by (seed, batch_index).

    Returns (spikes uint8 [B, T, N], labels int64 [B]).
    """
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    manifolds = manifolds or _ManifoldCache(spec)
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, batch_index, KINDS.index(kind)])
    )
    labels = rng.integers(spec.n_classes, size=batch_size)
    z = rng.uniform(size=(batch_size, spec.intrinsic_dim))
    spikes = np.zeros((batch_size, spec.n_steps, spec.n_units), dtype=np.uint8)
    for c in np.unique(labels):
        mask = labels == c
        values = manifolds[int(c)].evaluate(z[mask])
        if kind == "t":
            sampled = time_sample(values, spec.n_steps)
        else:
            sampled = rate_sample(values, spec.n_steps, rng,
                                  spec.rate_spike_budget)
        spikes[mask] = np.atleast_3d(sampled).reshape(mask.sum(), spec.n_steps,
                                                      spec.n_units)
    return spikes, labels.astype(np.int64)


class RandmanSampler:
    """Streaming batch source over the underlying manifolds."""

    def __init__(self, spec, kind, batch_size):
        self.spec = spec
        self.kind = kind
        self.batch_size = batch_size
        self.manifolds = _ManifoldCache(spec)

    def batch(self, batch_index):
        return sample_batch(self.spec, self.kind, self.batch_size,
                            batch_index, self.manifolds)


def make_raster(spec, kind, num_examples, first_batch_index=0):
    """Materialize a SpikeRaster of num_examples freshly sampled examples."""
    sampler = RandmanSampler(spec, kind, batch_size=min(num_examples, 256))
    spikes, labels = [], []
    remaining = num_examples
    index = first_batch_index
    while remaining > 0:
        s, y = sampler.batch(index)
        take = min(remaining, s.shape[0])
        spikes.append(s[:take])
        labels.append(y[:take])
        remaining -= take
        index += 1
    return SpikeRaster(
        spikes=np.concatenate(spikes),
        labels=np.concatenate(labels),
        n_classes=spec.n_classes,
        encoding=kind,
    )
