"""Synthetic relational databases with documented label rules.

Desk-scale stand-ins for real multi-table data: a users/products/orders
schema whose labels are stated deterministic functions of features within
two hops of the target row, so a brute-force join oracle can verify every
label and a threshold rule achieves AUC 1.0. The same seed always yields
a byte-identical database.

Label rules:
  user_mean_order_amount    user is positive iff the mean amount over the
                            orders referencing it exceeds the threshold;
                            users without orders are negative (the vacuous
                            mean counts as -inf).
  user_age_threshold        user is positive iff its own age exceeds the
                            threshold.
  product_mean_order_amount as the user rule, per product.
  user_mean_amount_value    regression: target is the mean order amount
                            itself, 0.0 for users without orders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .database import RelationalDatabase, Table
from .schema import (
    CATEGORICAL,
    FOREIGN_KEY,
    NUMERICAL,
    PRIMARY_KEY,
    TEXTUAL,
    TIMESTAMP,
    ColumnSpec,
    SchemaManifest,
    TableSpec,
)
from .training import TaskSpec

LABEL_RULES = (
    "user_mean_order_amount",
    "user_age_threshold",
    "product_mean_order_amount",
    "user_mean_amount_value",
)

START_TIME = 1672531200  # 2023-01-01T00:00:00Z
HORIZON_TIME = 1704067200  # 2024-01-01T00:00:00Z

_SEGMENTS = ("alpha", "beta", "gamma", "delta")
_CATEGORIES = ("tools", "games", "books", "garden", "audio")
_BIO_WORDS = ("enjoys", "weekend", "shopping", "music", "travel", "coffee", "sports", "reader")
_NOTE_WORDS = ("fast", "delivery", "gift", "repeat", "order", "standard", "discount", "bundle")
_NAME_WORDS = ("super", "basic", "deluxe", "compact", "classic", "pro")


@dataclass(frozen=True)
class SyntheticDbSpec:
    seed: int
    label_rule: str = "user_mean_order_amount"
    name: str = "demo"
    n_users: int = 240
    n_products: int = 40
    min_orders_per_user: int = 1
    max_orders_per_user: int = 6
    threshold: float = 52.5
    missing_rate: float = 0.02

    def __post_init__(self):
        if self.label_rule not in LABEL_RULES:
            raise ValueError(f"unknown label rule {self.label_rule!r}; options: {LABEL_RULES}")
        if self.n_users < 1 or self.n_products < 1:
            raise ValueError("n_users and n_products must be >= 1")
        if not (0 <= self.min_orders_per_user <= self.max_orders_per_user):
            raise ValueError("order fan-out bounds inconsistent")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ValueError(f"missing_rate must lie in [0, 1), got {self.missing_rate}")


def _maybe_missing(value, rng: np.random.Generator, rate: float):
    return None if rate > 0 and rng.random() < rate else value


def _phrase(rng: np.random.Generator, words: tuple[str, ...], n: int) -> str:
    return " ".join(words[rng.integers(0, len(words))] for _ in range(n))


def synthetic_manifest(label_table: str) -> SchemaManifest:
    users_cols = [
        ColumnSpec("id", PRIMARY_KEY),
        ColumnSpec("signup", TIMESTAMP, description="account creation time"),
        ColumnSpec("age", NUMERICAL, description="age in years"),
        ColumnSpec("segment", CATEGORICAL, description="marketing segment"),
        ColumnSpec("bio", TEXTUAL, description="free-text self description"),
        ColumnSpec("snapshot_at", TIMESTAMP, description="prediction snapshot time"),
    ]
    products_cols = [
        ColumnSpec("id", PRIMARY_KEY),
        ColumnSpec("price", NUMERICAL, description="list price"),
        ColumnSpec("category", CATEGORICAL, description="product category"),
        ColumnSpec("name", TEXTUAL, description="product display name"),
    ]
    if label_table == "users":
        users_cols.append(ColumnSpec("label", NUMERICAL, description="training target"))
    else:
        products_cols.append(ColumnSpec("label", NUMERICAL, description="training target"))
    orders_cols = [
        ColumnSpec("id", PRIMARY_KEY),
        ColumnSpec("user_id", FOREIGN_KEY, fk_target="users"),
        ColumnSpec("product_id", FOREIGN_KEY, fk_target="products"),
        ColumnSpec("amount", NUMERICAL, description="order value"),
        ColumnSpec("ts", TIMESTAMP, description="order time"),
        ColumnSpec("note", TEXTUAL, description="fulfilment note"),
    ]
    return SchemaManifest(
        tables=(
            TableSpec("users", tuple(users_cols)),
            TableSpec("products", tuple(products_cols)),
            TableSpec("orders", tuple(orders_cols), time_column="ts"),
        )
    )


def generate_synthetic_db(spec: SyntheticDbSpec) -> tuple[RelationalDatabase, TaskSpec]:
    rng = np.random.default_rng(spec.seed)
    target_table = "products" if spec.label_rule == "product_mean_order_amount" else "users"
    manifest = synthetic_manifest(target_table)

    user_ids = [f"u{i:04d}" for i in range(spec.n_users)]
    product_ids = [f"p{i:03d}" for i in range(spec.n_products)]

    # regimes drive amounts so a threshold on the joined mean separates cleanly
    user_flag = rng.random(spec.n_users) < 0.5
    product_flag = rng.random(spec.n_products) < 0.5

    users = {
        "id": user_ids,
        "signup": [int(rng.integers(START_TIME, HORIZON_TIME - 86400)) for _ in range(spec.n_users)],
        "age": [],
        "segment": [_maybe_missing(_SEGMENTS[rng.integers(0, len(_SEGMENTS))], rng, spec.missing_rate) for _ in range(spec.n_users)],
        "bio": [_maybe_missing(_phrase(rng, _BIO_WORDS, 3), rng, spec.missing_rate) for _ in range(spec.n_users)],
        "snapshot_at": [HORIZON_TIME] * spec.n_users,
    }
    if spec.label_rule == "user_age_threshold":
        ages = np.where(user_flag, rng.uniform(50.0, 80.0, spec.n_users), rng.uniform(18.0, 42.0, spec.n_users))
    else:
        ages = rng.uniform(18.0, 80.0, spec.n_users)
    users["age"] = [round(float(a), 1) for a in ages]

    products = {
        "id": product_ids,
        "price": [round(float(p), 2) for p in rng.uniform(3.0, 400.0, spec.n_products)],
        "category": [_maybe_missing(_CATEGORIES[rng.integers(0, len(_CATEGORIES))], rng, spec.missing_rate) for _ in range(spec.n_products)],
        "name": [_phrase(rng, _NAME_WORDS, 2) for _ in range(spec.n_products)],
    }

    orders: dict[str, list] = {"id": [], "user_id": [], "product_id": [], "amount": [], "ts": [], "note": []}
    order_no = 0
    for u in range(spec.n_users):
        n_orders = int(rng.integers(spec.min_orders_per_user, spec.max_orders_per_user + 1))
        for _ in range(n_orders):
            p = int(rng.integers(0, spec.n_products))
            if spec.label_rule == "product_mean_order_amount":
                hot = product_flag[p]
            else:
                hot = user_flag[u]
            amount = rng.uniform(62.0, 95.0) if hot else rng.uniform(6.0, 44.0)
            orders["id"].append(f"o{order_no:05d}")
            orders["user_id"].append(user_ids[u])
            orders["product_id"].append(product_ids[p])
            orders["amount"].append(round(float(amount), 2))
            orders["ts"].append(int(rng.integers(users["signup"][u], HORIZON_TIME)))
            orders["note"].append(_maybe_missing(_phrase(rng, _NOTE_WORDS, 2), rng, spec.missing_rate))
            order_no += 1

    labels = compute_labels(spec, users, products, orders)
    if target_table == "users":
        users["label"] = labels
    else:
        products["label"] = labels

    tables = {}
    for tspec in manifest.tables:
        data = {"users": users, "products": products, "orders": orders}[tspec.name]
        ordered = {c.name: data[c.name] for c in tspec.columns}
        n_rows = len(next(iter(ordered.values()))) if ordered else 0
        tables[tspec.name] = Table(spec=tspec, columns=ordered, n_rows=n_rows)
    db = RelationalDatabase(manifest=manifest, tables=tables)

    kind = "regression" if spec.label_rule == "user_mean_amount_value" else "classification"
    task = TaskSpec(
        kind=kind,
        target_table=target_table,
        target_column="label",
        seed_time_column="snapshot_at" if target_table == "users" else None,
    )
    return db, task


def compute_labels(spec: SyntheticDbSpec, users: dict, products: dict, orders: dict) -> list[float]:
    """Labels straight from the stated rule over the raw generated columns."""
    if spec.label_rule == "user_age_threshold":
        return [1.0 if a is not None and a > 46.0 else 0.0 for a in users["age"]]

    if spec.label_rule == "product_mean_order_amount":
        keys, key_col = products["id"], "product_id"
    else:
        keys, key_col = users["id"], "user_id"
    sums: dict[str, float] = {k: 0.0 for k in keys}
    counts: dict[str, int] = {k: 0 for k in keys}
    for ref, amount in zip(orders[key_col], orders["amount"]):
        if ref in sums and amount is not None:
            sums[ref] += amount
            counts[ref] += 1
    means = [sums[k] / counts[k] if counts[k] else float("-inf") for k in keys]
    if spec.label_rule == "user_mean_amount_value":
        return [m if np.isfinite(m) else 0.0 for m in means]
    return [1.0 if m > spec.threshold else 0.0 for m in means]


# ---------------------------------------------------------------------------
# bundled task and audit-schema families

DEMO_TASKS: dict[str, SyntheticDbSpec] = {
    "task1": SyntheticDbSpec(seed=7, label_rule="user_mean_order_amount", name="task1"),
    "task2": SyntheticDbSpec(seed=11, label_rule="user_age_threshold", name="task2"),
    "task3": SyntheticDbSpec(seed=13, label_rule="product_mean_order_amount", name="task3", n_products=64),
}

_FAMILY_MODALITIES = (NUMERICAL, CATEGORICAL, TIMESTAMP, TEXTUAL)


def schema_family(n_feature_columns: int, n_tables: int = 15) -> SchemaManifest:
    """Audit schema with the given number of feature columns spread over tables.

    Feature modalities cycle through numerical, categorical, timestamp,
    textual; every table gets a primary key and non-root tables reference
    the first table, mirroring a hub-shaped production schema.
    """
    if n_feature_columns < 1 or n_tables < 1:
        raise ValueError("need at least one feature column and one table")
    n_tables = min(n_tables, n_feature_columns)
    per_table = [n_feature_columns // n_tables] * n_tables
    for i in range(n_feature_columns % n_tables):
        per_table[i] += 1
    tables = []
    col_no = 0
    for t in range(n_tables):
        cols = [ColumnSpec("id", PRIMARY_KEY)]
        if t > 0:
            cols.append(ColumnSpec("t00_id", FOREIGN_KEY, fk_target="t00"))
        for _ in range(per_table[t]):
            modality = _FAMILY_MODALITIES[col_no % len(_FAMILY_MODALITIES)]
            cols.append(ColumnSpec(f"c{col_no:03d}", modality, description=f"synthetic column {col_no}"))
            col_no += 1
        tables.append(TableSpec(f"t{t:02d}", tuple(cols)))
    return SchemaManifest(tables=tuple(tables))
