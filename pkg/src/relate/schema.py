"""Schema manifests: typed tables, column modalities, and key relations.

Modalities are declared by the data owner, never inferred; whether an id
column is a hashed categorical or meaningful text is a semantic judgment
the loader cannot make.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

NUMERICAL = "numerical"
TIMESTAMP = "timestamp"
CATEGORICAL = "categorical"
TEXTUAL = "textual"
PRIMARY_KEY = "primary_key"
FOREIGN_KEY = "foreign_key"

MODALITIES = (NUMERICAL, TIMESTAMP, CATEGORICAL, TEXTUAL, PRIMARY_KEY, FOREIGN_KEY)
FEATURE_MODALITIES = (NUMERICAL, TIMESTAMP, CATEGORICAL, TEXTUAL)


class SchemaError(ValueError):
    """Manifest violates a structural invariant (names the offending table/column)."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    modality: str
    description: str | None = None
    fk_target: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be nonempty")
        if self.modality not in MODALITIES:
            raise SchemaError(f"column {self.name!r}: unknown modality {self.modality!r}")
        if self.modality == FOREIGN_KEY and not self.fk_target:
            raise SchemaError(f"foreign-key column {self.name!r} needs an fk_target")
        if self.modality != FOREIGN_KEY and self.fk_target:
            raise SchemaError(f"column {self.name!r}: fk_target only allowed on foreign keys")


@dataclass(frozen=True)
class TableSpec:
    name: str
    columns: tuple[ColumnSpec, ...]
    time_column: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("table name must be nonempty")
        seen = set()
        for col in self.columns:
            if col.name in seen:
                raise SchemaError(f"table {self.name!r}: duplicate column {col.name!r}")
            seen.add(col.name)
        pks = [c for c in self.columns if c.modality == PRIMARY_KEY]
        if len(pks) > 1:
            raise SchemaError(f"table {self.name!r}: more than one primary key")
        if self.time_column is not None:
            tc = self.column(self.time_column)
            if tc is None:
                raise SchemaError(f"table {self.name!r}: time_column {self.time_column!r} not declared")
            if tc.modality != TIMESTAMP:
                raise SchemaError(f"table {self.name!r}: time_column {self.time_column!r} is not a timestamp")

    def column(self, name: str) -> ColumnSpec | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    @property
    def primary_key(self) -> str | None:
        for col in self.columns:
            if col.modality == PRIMARY_KEY:
                return col.name
        return None

    @property
    def foreign_keys(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.modality == FOREIGN_KEY]

    @property
    def feature_columns(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.modality in FEATURE_MODALITIES]


@dataclass(frozen=True)
class SchemaManifest:
    tables: tuple[TableSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        names = [t.name for t in self.tables]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(f"duplicate table names: {sorted(dupes)}")
        by_name = {t.name: t for t in self.tables}
        for table in self.tables:
            for fk in table.foreign_keys:
                target = by_name.get(fk.fk_target)
                if target is None:
                    raise SchemaError(
                        f"table {table.name!r}, column {fk.name!r}: fk_target {fk.fk_target!r} is not a declared table"
                    )
                if target.primary_key is None:
                    raise SchemaError(
                        f"table {table.name!r}, column {fk.name!r}: target table {fk.fk_target!r} has no primary key"
                    )

    def table(self, name: str) -> TableSpec:
        for t in self.tables:
            if t.name == name:
                return t
        raise SchemaError(f"unknown table {name!r}")

    def relations(self) -> list[tuple[str, str, str]]:
        """All (table, fk column, target table) pairs in declaration order."""
        out = []
        for t in self.tables:
            for fk in t.foreign_keys:
                out.append((t.name, fk.name, fk.fk_target))
        return out

    def to_dict(self) -> dict:
        tables = []
        for t in self.tables:
            cols = []
            for c in t.columns:
                entry: dict = {"name": c.name, "modality": c.modality}
                if c.description is not None:
                    entry["description"] = c.description
                if c.fk_target is not None:
                    entry["fk_target"] = c.fk_target
                cols.append(entry)
            entry = {"name": t.name, "columns": cols}
            if t.time_column is not None:
                entry["time_column"] = t.time_column
            tables.append(entry)
        return {"tables": tables}


def manifest_from_dict(payload: dict) -> SchemaManifest:
    if not isinstance(payload, dict) or "tables" not in payload:
        raise SchemaError("manifest must be an object with a 'tables' list")
    tables = []
    for tbl in payload["tables"]:
        cols = tuple(
            ColumnSpec(
                name=c.get("name", ""),
                modality=c.get("modality", ""),
                description=c.get("description"),
                fk_target=c.get("fk_target"),
            )
            for c in tbl.get("columns", [])
        )
        tables.append(TableSpec(name=tbl.get("name", ""), columns=cols, time_column=tbl.get("time_column")))
    return SchemaManifest(tables=tuple(tables))


def parse_manifest(path) -> SchemaManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"manifest file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from None
    return manifest_from_dict(payload)


def write_manifest(manifest: SchemaManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
