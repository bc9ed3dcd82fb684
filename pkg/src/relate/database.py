"""CSV ingestion into a typed in-memory relational database.

Cells are parsed per declared modality. The missing-value rule is uniform:
an empty cell, or a numeric/timestamp cell that does not parse, becomes
None. Keys are kept as opaque strings and matched by equality.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .schema import (
    CATEGORICAL,
    FOREIGN_KEY,
    NUMERICAL,
    PRIMARY_KEY,
    TEXTUAL,
    TIMESTAMP,
    SchemaManifest,
    TableSpec,
)

THREADS_ENV = "RELATE_THREADS"


class IngestionError(ValueError):
    """File-level problem: missing CSV, header/spec mismatch."""


class IntegrityError(ValueError):
    """Row-level contract violation: duplicate primary-key value."""


def parse_number(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    # Non-finite inputs carry no usable magnitude; fold into Missing here.
    return value if math.isfinite(value) else None


def parse_timestamp(cell: str) -> int | None:
    """RFC 3339 string or raw integer epoch seconds; naive strings are UTC."""
    cell = cell.strip()
    if not cell:
        return None
    try:
        return int(cell)
    except ValueError:
        pass
    text = cell[:-1] + "+00:00" if cell.endswith(("Z", "z")) else cell
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_cell(cell: str, modality: str):
    if modality == NUMERICAL:
        return parse_number(cell)
    if modality == TIMESTAMP:
        return parse_timestamp(cell)
    # categorical, textual, and both key kinds stay strings
    stripped = cell.strip() if modality in (PRIMARY_KEY, FOREIGN_KEY) else cell
    return stripped if stripped != "" else None


@dataclass
class Table:
    spec: TableSpec
    columns: dict[str, list]
    n_rows: int

    def column_values(self, name: str) -> list:
        return self.columns[name]

    def row(self, i: int) -> dict:
        return {name: values[i] for name, values in self.columns.items()}


@dataclass
class RelationalDatabase:
    manifest: SchemaManifest
    tables: dict[str, Table]

    def table(self, name: str) -> Table:
        return self.tables[name]


def _load_table(spec: TableSpec, path: Path) -> Table:
    if not path.exists():
        raise IngestionError(f"table {spec.name!r}: file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"table {spec.name!r}: empty file {path}") from None
        declared = {c.name for c in spec.columns}
        if set(header) != declared or len(header) != len(declared):
            raise IngestionError(
                f"table {spec.name!r}: header {sorted(header)} does not match declared columns {sorted(declared)}"
            )
        modality_by_name = {c.name: c.modality for c in spec.columns}
        columns: dict[str, list] = {name: [] for name in header}
        n_rows = 0
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestionError(f"table {spec.name!r}: row {row_num} has {len(row)} cells, expected {len(header)}")
            for name, cell in zip(header, row):
                columns[name].append(_parse_cell(cell, modality_by_name[name]))
            n_rows += 1
    # reorder into declaration order
    ordered = {c.name: columns[c.name] for c in spec.columns}
    table = Table(spec=spec, columns=ordered, n_rows=n_rows)
    pk = spec.primary_key
    if pk is not None:
        seen: set[str] = set()
        for value in table.columns[pk]:
            if value is None:
                continue
            if value in seen:
                raise IntegrityError(f"table {spec.name!r}: duplicate primary-key value {value!r}")
            seen.add(value)
    return table


def load_database(manifest: SchemaManifest, directory) -> RelationalDatabase:
    """Load <table>.csv for every manifest table from the given directory.

    Tables parse independently, so the RELATE_THREADS env var (> 1) turns
    on a thread pool; the merged result is identical either way.
    """
    directory = Path(directory)
    jobs = [(spec, directory / f"{spec.name}.csv") for spec in manifest.tables]
    threads = int(os.environ.get(THREADS_ENV, "1") or "1")
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            loaded = list(pool.map(lambda job: _load_table(*job), jobs))
    else:
        loaded = [_load_table(spec, path) for spec, path in jobs]
    return RelationalDatabase(manifest=manifest, tables={t.spec.name: t for t in loaded})


def suggest_modality(values: list[str]) -> str:
    """Advisory modality guess from raw cell strings.

    Declared modalities always win; this exists so an operator writing a
    manifest can sanity-check a column. Heuristic: mostly timestamps ->
    timestamp, mostly numeric -> numerical, low distinct-value ratio ->
    categorical, otherwise textual.
    """
    cells = [v for v in values if v is not None and str(v).strip() != ""]
    if not cells:
        return TEXTUAL
    n = len(cells)
    ts_rate = sum(1 for v in cells if parse_timestamp(str(v)) is not None and not str(v).strip().lstrip("-").isdigit()) / n
    num_rate = sum(1 for v in cells if parse_number(str(v)) is not None) / n
    if ts_rate > 0.9:
        return TIMESTAMP
    if num_rate > 0.9:
        return NUMERICAL
    distinct_ratio = len(set(cells)) / n
    return CATEGORICAL if distinct_ratio < 0.5 else TEXTUAL


def write_database_csv(db: RelationalDatabase, directory) -> list[Path]:
    """Export every table as <table>.csv; Missing becomes the empty cell.

    Floats are written with repr (shortest round-trip), timestamps as
    RFC 3339 Z strings, so exports are byte-stable for identical data.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in db.manifest.tables:
        table = db.tables[spec.name]
        path = directory / f"{spec.name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            names = [c.name for c in spec.columns]
            writer.writerow(names)
            for i in range(table.n_rows):
                row = []
                for c in spec.columns:
                    value = table.columns[c.name][i]
                    if value is None:
                        row.append("")
                    elif c.modality == TIMESTAMP:
                        row.append(format_timestamp(value))
                    elif c.modality == NUMERICAL:
                        row.append(repr(float(value)))
                    else:
                        row.append(str(value))
                writer.writerow(row)
        written.append(path)
    return written
