"""Training loop: sampled subgraphs, either encoder, shared GNN head.

Both encoder choices feed the identical message-passing head and linear
prediction head, so any metric gap is attributable to the encoders.
Classification trains with binary cross-entropy on logits, regression
with L1 on the raw target scale. Everything is driven by explicit seeds;
the same seed reproduces the same loss curve bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .baseline import StandardConfig, StandardEncoder
from .database import RelationalDatabase
from .encoder import RelateEncoder
from .features import FoneConfig
from .gnn import GnnConfig, TypedMeanGnn, build_batch
from .graph import HeteroTemporalGraph
from .metrics import evaluate
from .optim import AdamW
from .params import ParameterStore
from .perceiver import PerceiverConfig
from .sampling import assert_temporal_safety, sample_subgraph
from .text import TokenTable

ENCODER_CHOICES = ("relate", "standard", "relate-full-sa")
TASK_KINDS = ("classification", "regression")


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss), naming the offending step."""


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    target_table: str
    target_column: str
    seed_time_column: str | None = None
    splits: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}, got {self.kind!r}")
        if len(self.splits) != 3 or any(s <= 0 for s in self.splits):
            raise ValueError(f"splits must be three positive fractions, got {self.splits}")
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.splits}")


@dataclass
class TrainResult:
    encoder_choice: str
    store: ParameterStore
    history: list[dict] = field(default_factory=list)
    final: dict[str, float] = field(default_factory=dict)

    def metric_curve(self, split: str, metric: str) -> list[float]:
        return [row["value"] for row in self.history if row["split"] == split and row["metric"] == metric]


def build_encoder(
    choice: str,
    store: ParameterStore,
    db: RelationalDatabase,
    token_table: TokenTable,
    rng: np.random.Generator,
    perceiver_config: PerceiverConfig,
    fone: FoneConfig,
    vocab_size: int,
    standard_config: StandardConfig,
    exclude_columns: frozenset[tuple[str, str]],
    empty_node_policy: str = "error",
):
    if choice == "standard":
        return StandardEncoder(
            store, db.manifest, token_table, config=standard_config, rng=rng, exclude_columns=exclude_columns
        )
    if choice not in ENCODER_CHOICES:
        raise ValueError(f"unknown encoder choice {choice!r}; options: {ENCODER_CHOICES}")
    variant = "full_sa" if choice == "relate-full-sa" else "cross"
    return RelateEncoder(
        store,
        db.manifest,
        token_table,
        config=perceiver_config,
        fone=fone,
        vocab_size=vocab_size,
        rng=rng,
        variant=variant,
        empty_node_policy=empty_node_policy,
        exclude_columns=exclude_columns,
    )


def split_rows(n: int, splits: tuple[float, float, float], seed: int) -> tuple[list[int], list[int], list[int]]:
    order = list(np.random.default_rng([seed, 17]).permutation(n))
    n_train = int(round(splits[0] * n))
    n_val = int(round(splits[1] * n))
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def _forward_rows(encoder, gnn, store, db, graph, task, rows, gnn_config, training, rng):
    seed_times = []
    table = db.table(task.target_table)
    for r in rows:
        if task.seed_time_column is not None:
            seed_times.append(table.columns[task.seed_time_column][r])
        else:
            seed_times.append(None)
    subgraphs = [
        sample_subgraph(graph, (task.target_table, r), t, gnn_config, rng) for r, t in zip(rows, seed_times)
    ]
    assert_temporal_safety(subgraphs, graph)
    batch = build_batch(subgraphs)
    encoded: dict[str, Tensor] = {}
    for ntype, distinct in batch.distinct_rows.items():
        encoded[ntype] = encoder.encode_rows(db, ntype, distinct, training=training, rng=rng)
    hidden = gnn.forward(batch, encoded)
    return ad.add(ad.matmul(hidden, store["head.w"]), store["head.b"])


def train(
    db: RelationalDatabase,
    graph: HeteroTemporalGraph,
    task: TaskSpec,
    encoder_choice: str,
    token_table: TokenTable,
    seed: int,
    epochs: int = 10,
    lr: float = 5e-3,
    batch_size: int = 64,
    perceiver_config: PerceiverConfig = PerceiverConfig(),
    fone: FoneConfig = FoneConfig(),
    vocab_size: int = 65536,
    standard_config: StandardConfig | None = None,
    gnn_config: GnnConfig = GnnConfig(),
    weight_decay: float = 0.0,
    empty_node_policy: str = "error",
) -> TrainResult:
    if epochs < 1 or epochs > 10:
        raise ValueError(f"epochs must lie in 1..10, got {epochs}")
    standard_config = standard_config or StandardConfig(d=perceiver_config.d, fone=fone)

    table = db.table(task.target_table)
    if task.target_column not in table.columns:
        raise ValueError(f"target column {task.target_column!r} not in table {task.target_table!r}")
    labels_all = table.columns[task.target_column]
    eligible = [i for i, v in enumerate(labels_all) if v is not None and np.isfinite(v)]
    if task.kind == "classification" and any(labels_all[i] not in (0.0, 1.0) for i in eligible):
        raise ValueError("classification labels must be 0 or 1")

    tr_idx, va_idx, te_idx = split_rows(len(eligible), task.splits, seed)
    train_rows = [eligible[i] for i in tr_idx]
    val_rows = [eligible[i] for i in va_idx]
    test_rows = [eligible[i] for i in te_idx]
    if not train_rows:
        raise ValueError(f"no training rows: {len(eligible)} labeled rows with splits {task.splits}")

    store = ParameterStore()
    init_rng = np.random.default_rng([seed, 1])
    exclude = frozenset({(task.target_table, task.target_column)})
    encoder = build_encoder(
        encoder_choice,
        store,
        db,
        token_table,
        init_rng,
        perceiver_config,
        fone,
        vocab_size,
        standard_config,
        exclude,
        empty_node_policy,
    )
    gnn = TypedMeanGnn(store, encoder.output_dim, gnn_config, init_rng)
    store.register("head.w", init_rng.standard_normal((gnn_config.channels, 1)) / np.sqrt(gnn_config.channels))
    store.register("head.b", np.zeros(1))
    optimizer = AdamW(store, lr=lr, weight_decay=weight_decay)

    loop_rng = np.random.default_rng([seed, 2])
    metric_name = "auc" if task.kind == "classification" else "mae"
    result = TrainResult(encoder_choice=encoder_choice, store=store)

    def _loss_for(rows: list[int], training: bool, rng) -> Tensor:
        logits = _forward_rows(encoder, gnn, store, db, graph, task, rows, gnn_config, training, rng)
        targets = np.array([labels_all[r] for r in rows], dtype=np.float64).reshape(-1, 1)
        if task.kind == "classification":
            return ad.bce_with_logits(logits, targets)
        return ad.l1_loss(logits, targets)

    def _eval_split(rows: list[int], split_id: int) -> float:
        rng = np.random.default_rng([seed, 3, split_id])
        scores = []
        with no_grad():
            for chunk_start in range(0, len(rows), 256):
                chunk = rows[chunk_start : chunk_start + 256]
                logits = _forward_rows(encoder, gnn, store, db, graph, task, chunk, gnn_config, False, rng)
                scores.extend(logits.data.reshape(-1).tolist())
        targets = [labels_all[r] for r in rows]
        return evaluate(np.array(scores), np.array(targets, dtype=np.float64), task.kind)

    step = 0
    for epoch in range(1, epochs + 1):
        order = [train_rows[i] for i in loop_rng.permutation(len(train_rows))]
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            rows = order[start : start + batch_size]
            step += 1
            loss = _loss_for(rows, training=True, rng=loop_rng)
            value = float(loss.data.reshape(()))
            if not np.isfinite(value):
                raise TrainingError(f"loss became non-finite at epoch {epoch}, step {step}")
            ad.backward(loss)
            optimizer.step()
            epoch_losses.append(value)
        result.history.append({"epoch": epoch, "split": "train", "metric": "loss", "value": float(np.mean(epoch_losses))})
        for split_name, split_rows_, split_id in (("val", val_rows, 0), ("test", test_rows, 1)):
            if split_rows_:
                value = _eval_split(split_rows_, split_id)
                result.history.append({"epoch": epoch, "split": split_name, "metric": metric_name, "value": value})

    for split_name in ("val", "test"):
        curve = result.metric_curve(split_name, metric_name)
        if curve:
            result.final[f"{split_name}_{metric_name}"] = curve[-1]
    return result


def write_history_csv(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "split", "metric", "value"])
        for row in history:
            writer.writerow([row["epoch"], row["split"], row["metric"], repr(float(row["value"]))])
