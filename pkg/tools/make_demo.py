"""Regenerate the bundled demo datasets and run configs under demo/.

The exports are deterministic (fixed seeds), so re-running this script
must leave the checked-in files byte-identical; a test enforces that.
"""

from __future__ import annotations

import json
from pathlib import Path

from relate.database import write_database_csv
from relate.schema import write_manifest
from relate.synth import DEMO_TASKS, generate_synthetic_db

ROOT = Path(__file__).resolve().parent.parent / "demo"


def task_config(name: str, task, encoder: str = "relate") -> dict:
    return {
        "paths": {
            "manifest": f"../{name}/schema.json",
            "data_dir": f"../{name}",
            "token_table": None,
            "out_dir": f"out/{name}",
        },
        "encoder": encoder,
        "perceiver": {"d": 32, "latents": 4, "heads": 2, "layers": 2, "dropout": 0.1, "pooling": "mean"},
        "fone": {"k_min": -2, "k_max": 4},
        "vocab_size": 512,
        "standard": {"column_vocab": 32, "backbone_width": 128},
        "gnn": {"layers": 2, "channels": 32, "neighbor_cap": 32},
        "training": {"epochs": 10, "lr": 5e-3, "seed": 7, "batch_size": 64, "weight_decay": 0.0},
        "task": {
            "kind": task.kind,
            "target_table": task.target_table,
            "target_column": task.target_column,
            "seed_time_column": task.seed_time_column,
            "splits": [0.6, 0.2, 0.2],
        },
    }


def audit_config() -> dict:
    return {
        "paths": {
            "manifest": "../task1/schema.json",
            "data_dir": "../task1",
            "token_table": None,
            "out_dir": "out/audit",
        },
        "encoder": "relate",
        "perceiver": {"d": 128, "latents": 8, "heads": 4, "layers": 4, "dropout": 0.2, "pooling": "mean"},
        "vocab_size": 2048,
        "standard": {"column_vocab": 64, "backbone_width": 128},
        "training": {"seed": 7},
    }


def main() -> None:
    configs_dir = ROOT / "configs"
    configs_dir.mkdir(parents=True, exist_ok=True)
    for name, spec in DEMO_TASKS.items():
        db, task = generate_synthetic_db(spec)
        out = ROOT / name
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(db.manifest, out / "schema.json")
        write_database_csv(db, out)
        with open(configs_dir / f"{name}.json", "w", encoding="utf-8") as fh:
            json.dump(task_config(name, task), fh, indent=2, sort_keys=True)
            fh.write("\n")
    with open(configs_dir / "audit.json", "w", encoding="utf-8") as fh:
        json.dump(audit_config(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote demo assets under {ROOT}")


if __name__ == "__main__":
    main()
