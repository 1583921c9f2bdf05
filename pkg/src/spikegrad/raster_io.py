"""Binary on-disk format for labeled spike rasters.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic  b"SPKR"
    4       2     version (currently 1)
    6       2     encoding tag (0 generic, 1 rate, 2 time, 3 binned events)
    8       4     T            (time-steps, uint32)
    12      4     channels     (uint32)
    16      4     num_examples (uint32)
    20      4     num_classes  (uint32)
    24      ...   per example: packed spike bits of the flattened [T x
                  channels] matrix (row-major, LSB-first within each byte,
                  ceil(T*channels/8) bytes) followed by a uint16 label.

write -> read is a bit-exact round trip. Malformed input raises
RasterFormatError naming the byte offset.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RasterFormatError

MAGIC = b"SPKR"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIII")
_ENCODING_TAGS = {"generic": 0, "r": 1, "t": 2, "binned": 3}
_TAG_NAMES = {v: k for k, v in _ENCODING_TAGS.items()}


@dataclass
class SpikeRaster:
    """Binary spike tensor [examples, T, channels] plus integer labels."""

    spikes: np.ndarray
    labels: np.ndarray
    n_classes: int
    encoding: str = "generic"

    def __post_init__(self):
        self.spikes = np.asarray(self.spikes, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.spikes.ndim != 3:
            raise ConfigError("spikes must have shape [examples, T, channels]")
        if self.labels.shape != (self.spikes.shape[0],):
            raise ConfigError("one label per example required")
        if self.spikes.size and self.spikes.max() > 1:
            raise ConfigError("spike entries must be 0 or 1")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.n_classes
        ):
            raise ConfigError("labels must lie in [0, num_classes)")
        if self.encoding not in _ENCODING_TAGS:
            raise ConfigError(f"unknown encoding {self.encoding!r}")

    @property
    def num_examples(self):
        return self.spikes.shape[0]

    @property
    def n_steps(self):
        return self.spikes.shape[1]

    @property
    def channels(self):
        return self.spikes.shape[2]

    def subset(self, indices):
        return SpikeRaster(self.spikes[indices], self.labels[indices],
                           self.n_classes, self.encoding)


def raster_write(path, raster, sidecar=None):
    """Write a raster; optionally write a JSON sidecar of metadata next to it."""
    bits_per_example = raster.n_steps * raster.channels
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            MAGIC, VERSION, _ENCODING_TAGS[raster.encoding],
            raster.n_steps, raster.channels, raster.num_examples,
            raster.n_classes,
        ))
        for e in range(raster.num_examples):
            flat = raster.spikes[e].reshape(bits_per_example)
            fh.write(np.packbits(flat, bitorder="little").tobytes())
            fh.write(struct.pack("<H", int(raster.labels[e])))
    if sidecar is not None:
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")


def raster_read(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise RasterFormatError(
            f"truncated header: need {_HEADER.size} bytes, got {len(blob)} "
            "(offset 0)"
        )
    magic, version, tag, n_steps, channels, num_examples, n_classes = (
        _HEADER.unpack_from(blob, 0)
    )
    if magic != MAGIC:
        raise RasterFormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise RasterFormatError(f"unsupported version {version} at offset 4")
    if tag not in _TAG_NAMES:
        raise RasterFormatError(f"unknown encoding tag {tag} at offset 6")
    bits_per_example = n_steps * channels
    packed_len = (bits_per_example + 7) // 8
    stride = packed_len + 2
    expected = _HEADER.size + stride * num_examples
    if len(blob) != expected:
        raise RasterFormatError(
            f"payload length mismatch: expected {expected} bytes, got "
            f"{len(blob)} (first bad offset {min(expected, len(blob))})"
        )
    spikes = np.zeros((num_examples, n_steps, channels), dtype=np.uint8)
    labels = np.zeros(num_examples, dtype=np.int64)
    for e in range(num_examples):
        off = _HEADER.size + e * stride
        packed = np.frombuffer(blob, dtype=np.uint8, count=packed_len, offset=off)
        bits = np.unpackbits(packed, count=bits_per_example, bitorder="little")
        spikes[e] = bits.reshape(n_steps, channels)
        (label,) = struct.unpack_from("<H", blob, off + packed_len)
        if label >= n_classes:
            raise RasterFormatError(
                f"label {label} >= num_classes {n_classes} at offset "
                f"{off + packed_len}"
            )
        labels[e] = label
    return SpikeRaster(spikes, labels, n_classes, _TAG_NAMES[tag])


def split_train_valid(raster, fraction, seed):
    """Deterministic seeded split; fraction is the validation share."""
    if not (0.0 < fraction < 1.0):
        raise ConfigError("fraction must be in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B17]))
    order = rng.permutation(raster.num_examples)
    n_valid = int(round(fraction * raster.num_examples))
    valid_idx = np.sort(order[:n_valid])
    train_idx = np.sort(order[n_valid:])
    return raster.subset(train_idx), raster.subset(valid_idx)
