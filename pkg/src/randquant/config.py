"""Flat ``key = value`` config files for toy experiments and analyses.

Blank lines and lines starting with ``#`` are ignored. Unknown keys are
errors so typos do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path
from typing import Dict, Tuple

from randquant.analysis import ToyExperiment
from randquant.augment import RandomCrop, RandomResizedCrop
from randquant.quantizer import RandomMode
from randquant.toy_ssl import SyntheticDatasetSpec, TrainConfig


class ConfigError(ValueError):
    pass


DATASET_KEYS = {f.name: f.type for f in fields(SyntheticDatasetSpec) if f.name != "seed"}
TRAINING_KEYS = {f.name: f.type for f in fields(TrainConfig) if f.name not in ("seed", "pipeline")}
EXPERIMENT_KEYS = {"n_bins", "mode", "seeds", "test_fraction", "base_crop", "threads"}
ANALYSIS_KEYS = {"sweep_bins", "distribution", "distribution_file", "n_samples", "distortion_bins", "distortion_modes", "seed"}
ALL_KEYS = set(DATASET_KEYS) | set(TRAINING_KEYS) | EXPERIMENT_KEYS | ANALYSIS_KEYS


def parse_config_text(text: str) -> Dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path) -> Dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(p.read_text())


def _convert(value: str, kind):
    kind = str(kind)
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def int_list(value: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in value.replace(",", " ").split())


def parse_size(value: str) -> Tuple[int, int]:
    h, _, w = value.lower().partition("x")
    if not w:
        raise ConfigError(f"expected HxW, got {value!r}")
    return int(h), int(w)


def parse_base_crop(value: str):
    """``none``, ``rrc:HxW`` or ``crop:HxW``."""
    if value in ("", "none"):
        return ()
    kind, _, size = value.partition(":")
    h, w = parse_size(size)
    if kind == "rrc":
        return (RandomResizedCrop(h, w),)
    if kind == "crop":
        return (RandomCrop(h, w),)
    raise ConfigError(f"unknown base_crop {value!r}")


def experiment_from_config(cfg: Dict[str, str], base: ToyExperiment = None) -> ToyExperiment:
    exp = base or default_experiment()
    try:
        ds = replace(exp.dataset, **{k: _convert(v, DATASET_KEYS[k]) for k, v in cfg.items() if k in DATASET_KEYS})
        tr = replace(exp.training, **{k: _convert(v, TRAINING_KEYS[k]) for k, v in cfg.items() if k in TRAINING_KEYS})
        changes = {"dataset": ds, "training": tr}
        if "n_bins" in cfg:
            changes["n_bins"] = int(cfg["n_bins"])
        if "mode" in cfg:
            changes["mode"] = RandomMode.parse(cfg["mode"])
        if "seeds" in cfg:
            changes["seeds"] = int_list(cfg["seeds"])
        if "test_fraction" in cfg:
            changes["test_fraction"] = float(cfg["test_fraction"])
        if "base_crop" in cfg:
            changes["base_stages"] = parse_base_crop(cfg["base_crop"])
        if "threads" in cfg:
            changes["threads"] = int(cfg["threads"])
        return replace(exp, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def default_experiment() -> ToyExperiment:
    """The shipped synthetic setting used by the analyses and acceptance tests."""
    return ToyExperiment(
        dataset=SyntheticDatasetSpec(
            n_classes=32,
            channels=8,
            levels=4,
            level_jitter=0.15,
            noise_amplitude=0.02,
        ),
        training=TrainConfig(embed_dim=4, epochs=40, temperature=0.2),
    )
