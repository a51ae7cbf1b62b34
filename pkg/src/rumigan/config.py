"""JSON experiment configs: ``base`` includes, strict field checking, seed override.

Layout::

    {
      "schema_version": 1,
      "base": "common.json",            # optional, resolved relative to this file
      "scenario": "disjoint-1d",
      "minority_fraction": 0.05,
      "swap_roles": false,
      "output_dir": "runs/lsgan-s0",
      "mnist": {"images": "...", "labels": "..."},
      "train": {"family": "rumi-lsgan", "weights": {...}, "labels": {...}, "steps": 5000, ...},
      "eval": {"every": 1000, "samples": 2000, "num_clusters": 20, "num_angles": 1001}
    }
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .distributions import DATASET_SCENARIOS, SCENARIOS
from .losses import LsganLabels, RumiWeights, WeightError
from .training import DATASET_LATENT, TrainConfig

SCHEMA_VERSION = 1
SEED_ENV = "RUMI_SEED"

TOP_FIELDS = {"schema_version", "base", "scenario", "minority_fraction", "swap_roles",
              "output_dir", "mnist", "train", "eval"}
MNIST_FIELDS = {"images", "labels"}
EVAL_FIELDS = {"every": "checkpoint_every", "samples": "eval_samples",
               "num_clusters": "num_clusters", "num_angles": "num_angles"}
TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)} - set(EVAL_FIELDS.values())
WEIGHT_FIELDS = {f.name for f in dataclasses.fields(RumiWeights)}
LABEL_FIELDS = {f.name for f in dataclasses.fields(LsganLabels)}
TUPLE_FIELDS = {"g_hidden", "d_hidden"}


class ConfigError(ValueError):
    """Rejected configuration; the message starts with the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    train: TrainConfig
    output_dir: str | None = None
    minority_fraction: float = 0.05
    swap_roles: bool = False
    mnist_images: str | None = None
    mnist_labels: str | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self, include_output: bool = False) -> dict:
        t = self.train
        train = {name: getattr(t, name) for name in sorted(TRAIN_FIELDS)}
        train["weights"] = dataclasses.asdict(t.weights)
        train["labels"] = dataclasses.asdict(t.labels)
        for name in TUPLE_FIELDS:
            train[name] = list(train[name])
        out = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "minority_fraction": self.minority_fraction,
            "swap_roles": self.swap_roles,
            "train": train,
            "eval": {k: getattr(t, v) for k, v in EVAL_FIELDS.items()},
        }
        if self.mnist_images or self.mnist_labels:
            out["mnist"] = {"images": self.mnist_images, "labels": self.mnist_labels}
        if include_output and self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _read(path: Path, seen: tuple[Path, ...] = ()) -> dict:
    path = path.resolve()
    if path in seen:
        raise ConfigError(f"base: include cycle through {path}")
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"base: file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path.name}: invalid JSON ({err})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    base = raw.pop("base", None)
    if base is None:
        return raw
    if not isinstance(base, str):
        raise ConfigError("base: must be a path string")
    return _merge(_read(path.parent / base, seen + (path,)), raw)


def _unknown(section: dict, allowed, prefix: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}: unknown field")


def _typed(value, like, field: str):
    if isinstance(like, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{field}: expected true/false")
        return value
    if isinstance(like, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{field}: expected an integer")
        return value
    if isinstance(like, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected a number")
        return float(value)
    if isinstance(like, str):
        if not isinstance(value, str):
            raise ConfigError(f"{field}: expected a string")
        return value
    if isinstance(like, tuple):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{field}: expected a list of integers")
        return tuple(value)
    return value


def parse_config(raw: dict, env=None) -> ExperimentConfig:
    """Validate a merged config dict (``base`` already resolved)."""
    env = os.environ if env is None else env
    _unknown(raw, TOP_FIELDS - {"base"}, "")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS and scenario not in DATASET_SCENARIOS:
        raise ConfigError(f"scenario: unknown {scenario!r}; known: {sorted(SCENARIOS) + list(DATASET_SCENARIOS)}")
    mnist = raw.get("mnist", {})
    if not isinstance(mnist, dict):
        raise ConfigError("mnist: must be an object")
    _unknown(mnist, MNIST_FIELDS, "mnist.")
    train = raw.get("train", {})
    ev = raw.get("eval", {})
    if not isinstance(train, dict) or not isinstance(ev, dict):
        raise ConfigError("train/eval: must be objects")
    _unknown(train, TRAIN_FIELDS, "train.")
    _unknown(ev, EVAL_FIELDS, "eval.")

    defaults = TrainConfig()
    kw = {}
    if scenario in DATASET_SCENARIOS:
        kw.update(latent_dim=DATASET_LATENT, g_hidden=(256,), d_hidden=(256,), g_output="tanh")
    for key, value in train.items():
        if key == "weights":
            if not isinstance(value, dict):
                raise ConfigError("train.weights: must be an object")
            _unknown(value, WEIGHT_FIELDS, "train.weights.")
            try:
                kw[key] = RumiWeights(**{k: _typed(v, 1.0, f"train.weights.{k}") for k, v in value.items()})
            except WeightError as err:
                raise ConfigError(f"train.{err}") from None
        elif key == "labels":
            if not isinstance(value, dict):
                raise ConfigError("train.labels: must be an object")
            _unknown(value, LABEL_FIELDS, "train.labels.")
            merged = dataclasses.asdict(defaults.labels)
            merged.update({k: _typed(v, 1.0, f"train.labels.{k}") for k, v in value.items()})
            try:
                kw[key] = LsganLabels(**merged)
            except WeightError as err:
                raise ConfigError(f"train.{err}") from None
        else:
            kw[key] = _typed(value, getattr(defaults, key), f"train.{key}")
    for key, value in ev.items():
        kw[EVAL_FIELDS[key]] = _typed(value, getattr(defaults, EVAL_FIELDS[key]), f"eval.{key}")
    if env.get(SEED_ENV):
        try:
            kw["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: expected an integer, got {env[SEED_ENV]!r}") from None
    try:
        tc = TrainConfig(**kw)
    except WeightError as err:
        raise ConfigError(f"train.{err}") from None
    except ValueError as err:
        raise ConfigError(f"train.{err}") from None

    frac = _typed(raw.get("minority_fraction", 0.05), 1.0, "minority_fraction")
    if not 0.0 < frac <= 1.0:
        raise ConfigError("minority_fraction: must lie in (0, 1]")
    out_dir = raw.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir: expected a string")
    return ExperimentConfig(
        scenario=scenario, train=tc, output_dir=out_dir, minority_fraction=frac,
        swap_roles=_typed(raw.get("swap_roles", False), False, "swap_roles"),
        mnist_images=mnist.get("images"), mnist_labels=mnist.get("labels"),
    )


def load_config(path, env=None) -> ExperimentConfig:
    return parse_config(_read(Path(path)), env)
