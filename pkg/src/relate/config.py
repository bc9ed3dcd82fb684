"""Run configuration: one JSON file drives every CLI command."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .baseline import StandardConfig
from .features import FoneConfig
from .gnn import GnnConfig
from .perceiver import PerceiverConfig
from .training import ENCODER_CHOICES, TaskSpec


class ConfigError(ValueError):
    """Run configuration is missing or inconsistent."""


@dataclass
class RunConfig:
    manifest: Path
    data_dir: Path
    out_dir: Path
    seed: int
    token_table: Path | None = None  # None selects the bundled demo table
    encoder: str = "relate"
    perceiver: PerceiverConfig = field(default_factory=PerceiverConfig)
    fone: FoneConfig = field(default_factory=FoneConfig)
    vocab_size: int = 65536
    standard: StandardConfig | None = None
    gnn: GnnConfig = field(default_factory=GnnConfig)
    epochs: int = 10
    lr: float = 5e-3
    batch_size: int = 64
    weight_decay: float = 0.0
    task: TaskSpec | None = None
    empty_node_policy: str = "error"

    def __post_init__(self):
        if self.encoder not in ENCODER_CHOICES:
            raise ConfigError(f"encoder must be one of {ENCODER_CHOICES}, got {self.encoder!r}")
        if self.seed is None:
            raise ConfigError("seed is mandatory")

    def standard_config(self) -> StandardConfig:
        return self.standard or StandardConfig(d=self.perceiver.d, fone=self.fone)

    def to_dict(self) -> dict:
        payload = {
            "paths": {
                "manifest": str(self.manifest),
                "data_dir": str(self.data_dir),
                "out_dir": str(self.out_dir),
                "token_table": str(self.token_table) if self.token_table else None,
            },
            "encoder": self.encoder,
            "perceiver": {
                "d": self.perceiver.d,
                "latents": self.perceiver.latents,
                "heads": self.perceiver.heads,
                "layers": self.perceiver.layers,
                "dropout": self.perceiver.dropout,
                "pooling": self.perceiver.pooling,
                "single_cross": self.perceiver.single_cross,
            },
            "fone": {"k_min": self.fone.k_min, "k_max": self.fone.k_max},
            "vocab_size": self.vocab_size,
            "standard": {
                "column_vocab": self.standard_config().column_vocab,
                "backbone_width": self.standard_config().backbone_width,
            },
            "gnn": {
                "layers": self.gnn.layers,
                "channels": self.gnn.channels,
                "neighbor_cap": self.gnn.neighbor_cap,
            },
            "training": {
                "epochs": self.epochs,
                "lr": self.lr,
                "seed": self.seed,
                "batch_size": self.batch_size,
                "weight_decay": self.weight_decay,
            },
            "empty_node_policy": self.empty_node_policy,
        }
        if self.task is not None:
            payload["task"] = {
                "kind": self.task.kind,
                "target_table": self.task.target_table,
                "target_column": self.task.target_column,
                "seed_time_column": self.task.seed_time_column,
                "splits": list(self.task.splits),
            }
        return payload


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing {key!r} in config section {where!r}")
    return section[key]


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(payload, base_dir=path.parent)


def config_from_dict(payload: dict, base_dir: Path | None = None) -> RunConfig:
    base = base_dir or Path(".")

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    paths = _require(payload, "paths", "<root>")
    training = payload.get("training", {})
    if "seed" not in training:
        raise ConfigError("missing 'seed' in config section 'training'")

    pc = payload.get("perceiver", {})
    try:
        perceiver = PerceiverConfig(
            d=pc.get("d", 128),
            latents=pc.get("latents", 8),
            heads=pc.get("heads", 4),
            layers=pc.get("layers", 4),
            dropout=pc.get("dropout", 0.2),
            pooling=pc.get("pooling", "mean"),
            single_cross=pc.get("single_cross", False),
        )
        fc = payload.get("fone", {})
        fone = FoneConfig(k_min=fc.get("k_min", -2), k_max=fc.get("k_max", 4))
        gc = payload.get("gnn", {})
        gnn = GnnConfig(
            layers=gc.get("layers", 2),
            channels=gc.get("channels", 128),
            neighbor_cap=gc.get("neighbor_cap", 128),
        )
        sc = payload.get("standard")
        standard = None
        if sc is not None:
            standard = StandardConfig(
                d=perceiver.d,
                column_vocab=sc.get("column_vocab", 64),
                backbone_width=sc.get("backbone_width", 128),
                fone=fone,
            )
        task = None
        if "task" in payload:
            tc = payload["task"]
            task = TaskSpec(
                kind=_require(tc, "kind", "task"),
                target_table=_require(tc, "target_table", "task"),
                target_column=_require(tc, "target_column", "task"),
                seed_time_column=tc.get("seed_time_column"),
                splits=tuple(tc.get("splits", (0.6, 0.2, 0.2))),
            )
        return RunConfig(
            manifest=resolve(_require(paths, "manifest", "paths")),
            data_dir=resolve(_require(paths, "data_dir", "paths")),
            out_dir=resolve(_require(paths, "out_dir", "paths")),
            token_table=resolve(paths["token_table"]) if paths.get("token_table") else None,
            seed=int(training["seed"]),
            encoder=payload.get("encoder", "relate"),
            perceiver=perceiver,
            fone=fone,
            vocab_size=int(payload.get("vocab_size", 65536)),
            standard=standard,
            gnn=gnn,
            epochs=int(training.get("epochs", 10)),
            lr=float(training.get("lr", 5e-3)),
            batch_size=int(training.get("batch_size", 64)),
            weight_decay=float(training.get("weight_decay", 0.0)),
            task=task,
            empty_node_policy=payload.get("empty_node_policy", "error"),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from None
