"""
TA_Config.py

Run configuration for the command-line pipeline. A RunConfig is a flat record of every
setting a subcommand may use, filled from (lowest to highest precedence) the built-in
defaults, a JSON config file given with --config, and explicit command-line flags. Config
keys use the long flag names; dashes and underscores are interchangeable.

The parameter objects of each stage are built from it on demand (orientation_params,
region_params, signnet_config, loss_weights, train_hyper, synth_config).

Usage Example:
    >>> cfg = resolve_config({"command": "split", "seed": 1, "k": 5, "holdout": 0.2})
    >>> print(cfg.k, cfg.seed)
"""

import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

from TA_Errors import ConfigError
from TA_Orientation import OrientationParams
from TA_Regions import DEFAULT_EDGE_RATIO, RegionParams
from TA_SignNet import LossWeights, SignNetConfig
from TA_Synthetic import SynthConfig
from TA_Training import TrainHyper

COMMANDS = ("synth", "normalize", "separate", "split", "train", "eval", "predict", "roc")
SEEDED_COMMANDS = ("synth", "split", "train")
NEEDS_MANIFEST = ("normalize", "separate", "split", "train", "eval", "predict", "roc")


@dataclass
class RunConfig:
    command: str
    config: Optional[str] = None
    seed: Optional[int] = None
    workers: int = 1
    out: Optional[str] = None
    manifest: Optional[str] = None
    folds: Optional[str] = None
    fold: Optional[int] = None
    checkpoint: Optional[str] = None
    predictions: Optional[str] = None
    # synth
    count: int = 64
    side: int = 256
    rotation_min: float = -45.0
    rotation_max: float = 45.0
    attr_prob: float = 0.3
    noise: float = 4.0
    pair_rate: float = 0.1
    # normalize
    alpha: float = 60.0
    smooth: Optional[int] = None
    margin: int = 10
    refine: int = 12
    debug: bool = False
    # separate
    edge_ratio: float = DEFAULT_EDGE_RATIO
    # split
    k: int = 5
    holdout: float = 0.0
    holdout_count: Optional[int] = None
    # model and loss
    input_side: int = 256
    widths: Tuple[int, ...] = (32, 64, 128, 256)
    blocks: int = 2
    d_model: int = 128
    ffn_mult: int = 4
    fuse_color: bool = True
    fuse_fur: bool = True
    fur_includes_redspot: bool = False
    w_color: float = 1.0
    w_fur: float = 0.6
    # training
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-4
    weight_decay: float = 0.01

    def orientation_params(self) -> OrientationParams:
        return OrientationParams(alpha=self.alpha, s=self.smooth, m=self.margin, refine=self.refine)

    def region_params(self) -> RegionParams:
        return RegionParams(r=self.edge_ratio)

    def signnet_config(self) -> SignNetConfig:
        return SignNetConfig(widths=self.widths, blocks=self.blocks, d_model=self.d_model,
                             ffn_mult=self.ffn_mult, side=self.input_side, fuse_color=self.fuse_color,
                             fuse_fur=self.fuse_fur, fur_includes_redspot=self.fur_includes_redspot)

    def loss_weights(self) -> LossWeights:
        return LossWeights(w_color=self.w_color, w_fur=self.w_fur)

    def train_hyper(self) -> TrainHyper:
        return TrainHyper(lr=self.lr, batch_size=self.batch_size, epochs=self.epochs,
                          seed=self.seed or 0, weight_decay=self.weight_decay)

    def synth_config(self) -> SynthConfig:
        return SynthConfig.uniform(self.attr_prob, count=self.count, side=self.side,
                                   rotation_range=(self.rotation_min, self.rotation_max),
                                   noise=self.noise, seed=self.seed or 0, pair_rate=self.pair_rate)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["widths"] = list(self.widths)
        return out


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _key(name: str) -> str:
    return name.replace("-", "_")


def load_config_file(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    values = {_key(k): v for k, v in data.items()}
    unknown = sorted(set(values) - FIELD_NAMES - {"command"})
    if unknown:
        raise ConfigError(f"unknown config key(s) in {path}: {', '.join(unknown)}")
    values.pop("command", None)
    return values


def _parse_widths(value) -> Tuple[int, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return tuple(int(v) for v in value)


def resolve_config(explicit: Dict[str, Any]) -> RunConfig:
    """
    Merge defaults, the --config file and explicit flags into a validated RunConfig.

    Raises:
        ConfigError: unknown keys, missing required settings, or out-of-range values.
    """
    explicit = {_key(k): v for k, v in explicit.items()}
    command = explicit.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}; expected one of {', '.join(COMMANDS)}")

    merged: Dict[str, Any] = {}
    if explicit.get("config"):
        merged.update(load_config_file(explicit["config"]))
    merged.update(explicit)
    if "widths" in merged:
        merged["widths"] = _parse_widths(merged["widths"])
    cfg = RunConfig(**merged)

    if command in SEEDED_COMMANDS and cfg.seed is None:
        raise ConfigError(f"'{command}' requires --seed")
    if command in NEEDS_MANIFEST and not cfg.manifest:
        raise ConfigError(f"'{command}' requires --manifest")
    if not cfg.out:
        raise ConfigError(f"'{command}' requires --out")
    if command == "predict" and not cfg.checkpoint:
        raise ConfigError("'predict' requires --checkpoint")
    if command in ("eval", "roc") and bool(cfg.predictions) == bool(cfg.checkpoint):
        raise ConfigError(f"'{command}' takes exactly one of --predictions or --checkpoint")
    if cfg.workers < 1:
        raise ConfigError("--workers must be >= 1")

    try:
        cfg.orientation_params()
        cfg.region_params()
        cfg.signnet_config()
        cfg.loss_weights()
        cfg.train_hyper()
        cfg.synth_config()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def print_config(cfg: RunConfig) -> None:
    """Startup provenance: every resolved setting."""
    print(f"\n🔍 Resolved configuration for '{cfg.command}':")
    for name, value in cfg.to_dict().items():
        print(f"    {name} = {value}")
