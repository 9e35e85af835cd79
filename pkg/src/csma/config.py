"""Experiment configuration and the run manifest.

Config values come from three layers: built-in defaults, then a flat
key=value config file, then command-line flags, later layers winning.
Every value arrives as a string and goes through one shared parser, so
a flag and a file entry can never disagree about syntax.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import ConsistencyError, FormatError, ParameterError
from .fileio import atomic_write_text

DATA_FORMATS = ("synth", "idx", "csv")


@dataclass
class ExperimentConfig:
    format: str = "synth"
    images: str | None = None  # idx image file
    labels: str | None = None  # idx label file
    data: str | None = None  # csv file
    label_column: str = "label"
    positive_digits: list[int] = field(default_factory=lambda: [5, 6, 7, 8, 9])
    image_shape: tuple[int, int] | None = None
    layer_dims: list[int] | None = None  # default [m, m] once m is known
    lam: list[float] = field(default_factory=lambda: [0.1])
    classifier_dims: list[int] | None = None  # default [m/4, m/8]
    epochs: int = 100
    learning_rate: float = 0.01
    train_fraction: float = 0.70
    seed: int = 0
    out_dir: str = "csma-run"
    synth_n_per_class: int = 200
    synth_dim: int = 64
    synth_separation: float = 0.3
    synth_noise_std: float = 0.15


def _parse_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ParameterError(f"{key} must be an integer, got {value!r}") from None


def _parse_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ParameterError(f"{key} must be a number, got {value!r}") from None


def _parse_int_list(key, value):
    return [_parse_int(key, part.strip()) for part in str(value).split(",")]


def _parse_float_list(key, value):
    return [_parse_float(key, part.strip()) for part in str(value).split(",")]


def _parse_shape(key, value):
    parts = str(value).lower().split("x")
    if len(parts) != 2:
        raise ParameterError(f"{key} must look like HxW, got {value!r}")
    return (_parse_int(key, parts[0]), _parse_int(key, parts[1]))


def _parse_format(key, value):
    if value not in DATA_FORMATS:
        raise ParameterError(
            f"{key} must be one of {', '.join(DATA_FORMATS)}, got {value!r}"
        )
    return value


_PARSERS = {
    "format": _parse_format,
    "images": lambda k, v: str(v),
    "labels": lambda k, v: str(v),
    "data": lambda k, v: str(v),
    "label_column": lambda k, v: str(v),
    "positive_digits": _parse_int_list,
    "image_shape": _parse_shape,
    "layer_dims": _parse_int_list,
    "lam": _parse_float_list,
    "classifier_dims": _parse_int_list,
    "epochs": _parse_int,
    "learning_rate": _parse_float,
    "train_fraction": _parse_float,
    "seed": _parse_int,
    "out_dir": lambda k, v: str(v),
    "synth_n_per_class": _parse_int,
    "synth_dim": _parse_int,
    "synth_separation": _parse_float,
    "synth_noise_std": _parse_float,
}


def read_config_file(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments are skipped."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def config_from_sources(file_values: dict | None = None,
                        flag_values: dict | None = None) -> ExperimentConfig:
    """Defaults, overridden by file entries, overridden by flags."""
    merged: dict[str, str] = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    cfg = ExperimentConfig()
    for key, value in merged.items():
        if key not in _PARSERS:
            raise ParameterError(f"unknown config key {key!r}")
        setattr(cfg, key, _PARSERS[key](key, value))
    return cfg


def resolved_layer_dims(cfg: ExperimentConfig, input_dim: int) -> list[int]:
    return list(cfg.layer_dims) if cfg.layer_dims is not None else [input_dim, input_dim]


def resolved_classifier_dims(cfg: ExperimentConfig, feature_dim: int) -> tuple[int, int]:
    if cfg.classifier_dims is None:
        return max(1, feature_dim // 4), max(1, feature_dim // 8)
    dims = cfg.classifier_dims
    if len(dims) != 2:
        raise ParameterError(f"classifier_dims needs exactly 2 sizes, got {dims}")
    return dims[0], dims[1]


def resolved_lams(cfg: ExperimentConfig, n_layers: int) -> list[float]:
    """A single value broadcasts to every layer; a list must match exactly."""
    if len(cfg.lam) == 1:
        return cfg.lam * n_layers
    if len(cfg.lam) != n_layers:
        raise ConsistencyError(f"{n_layers} layer(s) but {len(cfg.lam)} lambda value(s)")
    return list(cfg.lam)


def manifest_config_dict(cfg: ExperimentConfig) -> dict:
    """Computation-relevant fields only: where the artifacts land does not
    change what was computed, so out_dir stays out of the manifest."""
    d = asdict(cfg)
    d.pop("out_dir")
    if d["image_shape"] is not None:
        d["image_shape"] = list(d["image_shape"])
    return d


def build_manifest(cfg: ExperimentConfig, fingerprint: str, losses: dict,
                   metrics: dict, wall_clock_seconds: float, **extra) -> dict:
    manifest = {
        "config": manifest_config_dict(cfg),
        "dataset_fingerprint": fingerprint,
        "training_loss": losses,
        "metrics": metrics,
        "wall_clock_seconds": wall_clock_seconds,
    }
    manifest.update(extra)
    return manifest


def write_manifest(manifest: dict, path) -> None:
    # json floats round-trip via repr, so metric values survive bitwise
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
