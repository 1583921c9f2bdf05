"""Experiment configuration: a flat dataclass, readable from a plain
key = value file with dotted section keys, overridable by CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, asdict, fields

from .errors import ConfigError
from .lif import LifParams
from .losses import LOSS_KINDS, LossSpec

DATASET_KINDS = ("randman_t", "randman_r", "raster_file")
MODES = ("offline", "online")


def _parse_bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    # dataset
    dataset_kind: str = "randman_t"
    raster_path: str = ""
    randman_dim: int = 3
    n_classes: int = 10
    n_units: int = 50
    randman_alpha: float = 1.0
    randman_harmonics: int = 4
    n_steps: int = 50
    # model
    hidden_layers: int = 2
    width: int = 64
    init_gain: float = 5.0
    leak: float = 0.98
    threshold: float = 1.0
    slope: float = 25.0
    # algorithm
    algorithm: str = "otpe"
    mode: str = "offline"
    reset_mode: str = "surrogate"
    spatial_factor: str = ""  # "" = per-algorithm default
    # loss
    loss_kind: str = ""  # "" = per-mode default
    out_leak: float = 1.0
    # optimizer
    lr: float = 5e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # schedule
    minibatches: int = 500
    batch_size: int = 128
    valid_every: int = 50
    valid_examples: int = 512
    valid_fraction: float = 0.1
    checkpoint_every: int = 0  # 0 disables the checkpoint series
    # run
    seed: int = 0
    dtype: str = "float32"
    output_dir: str = "runs"
    compare_with_bptt: bool = False
    report_memory: bool = False
    rtrl_memory_cap: int = 20_000_000
    online_update_every_step: bool = True

    # dotted config-file keys -> dataclass fields
    KEY_MAP = {
        "dataset.kind": "dataset_kind",
        "dataset.path": "raster_path",
        "dataset.dim": "randman_dim",
        "dataset.classes": "n_classes",
        "dataset.units": "n_units",
        "dataset.alpha": "randman_alpha",
        "dataset.harmonics": "randman_harmonics",
        "dataset.steps": "n_steps",
        "model.hidden_layers": "hidden_layers",
        "model.width": "width",
        "model.init_gain": "init_gain",
        "model.leak": "leak",
        "model.threshold": "threshold",
        "model.slope": "slope",
        "algorithm": "algorithm",
        "mode": "mode",
        "reset_mode": "reset_mode",
        "spatial_factor": "spatial_factor",
        "loss.kind": "loss_kind",
        "loss.out_leak": "out_leak",
        "optimizer.lr": "lr",
        "optimizer.beta1": "beta1",
        "optimizer.beta2": "beta2",
        "optimizer.eps": "eps",
        "schedule.minibatches": "minibatches",
        "schedule.batch_size": "batch_size",
        "schedule.valid_every": "valid_every",
        "schedule.valid_examples": "valid_examples",
        "schedule.valid_fraction": "valid_fraction",
        "schedule.checkpoint_every": "checkpoint_every",
        "seed": "seed",
        "dtype": "dtype",
        "output_dir": "output_dir",
        "diagnostics.cosine": "compare_with_bptt",
        "diagnostics.report_memory": "report_memory",
        "rtrl.memory_cap": "rtrl_memory_cap",
        "online.update_every_step": "online_update_every_step",
    }

    def set_key(self, key, raw):
        """Assign one dotted-key/value pair, with type coercion."""
        if key not in self.KEY_MAP:
            raise ConfigError(f"unknown config key {key!r}")
        name = self.KEY_MAP[key]
        current = getattr(self, name)
        if isinstance(current, bool):
            value = _parse_bool(raw)
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw.strip()
        setattr(self, name, value)

    @classmethod
    def from_file(cls, path, overrides=None):
        config = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = line.split("=", 1)
                try:
                    config.set_key(key.strip(), raw)
                except (ConfigError, ValueError) as err:
                    raise ConfigError(f"{path}:{lineno}: {err}") from err
        for key, raw in (overrides or {}).items():
            config.set_key(key, raw)
        return config

    def lif_params(self):
        return LifParams(leak=self.leak, threshold=self.threshold,
                         slope=self.slope)

    def effective_loss_kind(self):
        if self.loss_kind:
            return self.loss_kind
        if self.algorithm.startswith("f_"):
            return "leaky_sum_ce"
        return "per_step_ce" if self.mode == "online" else "sequence_ce_on_sum"

    def effective_out_leak(self):
        if self.algorithm.startswith("f_") and self.out_leak == 1.0:
            # F-variant output leak defaults to the network leak
            return self.leak
        return self.out_leak

    def loss_spec(self, n_classes=None):
        return LossSpec(kind=self.effective_loss_kind(),
                        n_classes=n_classes or self.n_classes,
                        out_leak=self.effective_out_leak())

    def validate(self):
        from .train import ALGORITHMS  # deferred: avoids an import cycle
        if self.dataset_kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.algorithm == "bptt" and self.mode == "online":
            raise ConfigError("bptt cannot run online (offending fields: "
                              "algorithm, mode)")
        if self.algorithm.startswith("f_") and self.mode == "offline":
            raise ConfigError("F-variants are online algorithms (offending "
                              "fields: algorithm, mode)")
        if self.loss_kind and self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss.kind must be one of {LOSS_KINDS}")
        if (self.algorithm.startswith("f_")
                and self.effective_loss_kind() != "leaky_sum_ce"):
            raise ConfigError("F-variants require loss.kind=leaky_sum_ce")
        if self.spatial_factor and self.spatial_factor not in ("g", "gbar"):
            raise ConfigError("spatial_factor must be g or gbar")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if self.minibatches < 1 or self.batch_size < 1 or self.valid_every < 1:
            raise ConfigError("schedule values must be >= 1")
        self.lif_params()  # validates leak/threshold/slope
        self.loss_spec()
        return self

    def snapshot(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]
