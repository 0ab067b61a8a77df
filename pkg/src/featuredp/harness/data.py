"""CSV datasets described by a JSON manifest.

The manifest lists every column in file order with a kind (numeric,
categorical or label) and a role (public or private), plus an optional
bound on the Euclidean norm of each record's numeric features.  Written
manifests also list each categorical column's levels, so codes survive a
round trip even for levels absent from the file.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from featuredp.errors import NormViolationError, ParseError, SchemaError
from featuredp.sgd.losses import Batch, FeatureSchema
from featuredp.tradeoff.curve import SCHEMA_VERSION

KINDS = ("numeric", "categorical", "label")
ROLES = ("public", "private")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    role: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class DatasetManifest:
    columns: tuple[Column, ...]
    num_records: int | None = None
    norm_bound: float | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        labels = [c for c in self.columns if c.kind == "label"]
        if len(labels) != 1:
            raise SchemaError(f"manifest needs exactly one label column, found {len(labels)}")
        if self.norm_bound is not None and not self.norm_bound > 0:
            raise SchemaError("norm_bound must be > 0")

    @property
    def label(self) -> Column:
        return next(c for c in self.columns if c.kind == "label")

    @property
    def feature_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind != "label"]

    def feature_schema(self) -> FeatureSchema:
        mask = np.array([c.role == "public" for c in self.feature_columns], dtype=bool)
        return FeatureSchema(mask, self.label.role == "public")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "columns": [{"name": c.name, "kind": c.kind, "role": c.role} for c in self.columns],
            "num_records": self.num_records,
            "norm_bound": self.norm_bound,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetManifest":
        try:
            cols = tuple(Column(c["name"], c["kind"], c["role"]) for c in doc["columns"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed manifest: {exc}") from None
        return cls(cols, doc.get("num_records"), doc.get("norm_bound"))


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Parsed records: features in manifest order (label excluded) and integer labels.

    Categorical cells and labels are dictionary-encoded; ``categories`` maps
    a column name to its values in code order.
    """

    manifest: DatasetManifest
    features: np.ndarray
    labels: np.ndarray
    categories: dict = field(default_factory=dict)
    ground_truth: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self) -> Batch:
        return Batch(self.features, self.labels)

    def take(self, idx) -> "FeatureDataset":
        m = self.manifest
        return FeatureDataset(DatasetManifest(m.columns, len(np.arange(len(self))[idx]), m.norm_bound),
                              self.features[idx], self.labels[idx], self.categories, self.ground_truth)

    @property
    def num_classes(self) -> int:
        cats = self.categories.get(self.manifest.label.name)
        if cats is not None:
            return len(cats)
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def max_norm(self) -> float:
        numeric = [i for i, c in enumerate(self.manifest.feature_columns) if c.kind == "numeric"]
        if not len(self) or not numeric:
            return 0.0
        return float(np.linalg.norm(self.features[:, numeric], axis=1).max())


def _format(x: float) -> str:
    return repr(float(x))


def _encode(values: list[str], known: list | None) -> tuple[np.ndarray, list]:
    codes = {v: i for i, v in enumerate(known or [])}
    order = list(known or [])
    out = np.empty(len(values), dtype=int)
    for i, v in enumerate(values):
        if v not in codes:
            codes[v] = len(order)
            order.append(v)
        out[i] = codes[v]
    return out, order


def load_dataset(csv_path, manifest_path) -> FeatureDataset:
    doc = json.loads(Path(manifest_path).read_text())
    manifest = DatasetManifest.from_json(doc)
    return parse_dataset(Path(csv_path).read_text(), manifest, doc.get("ground_truth"), doc.get("categories"))


def parse_dataset(text: str, manifest: DatasetManifest, ground_truth: dict | None = None,
                  levels: dict | None = None) -> FeatureDataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("CSV file has no header row") from None
    expected = [c.name for c in manifest.columns]
    if header != expected:
        missing = [n for n in expected if n not in header]
        extra = [n for n in header if n not in expected]
        if missing:
            raise SchemaError(f"CSV is missing column {missing[0]!r}")
        if extra:
            raise SchemaError(f"CSV has undeclared column {extra[0]!r}")
        raise SchemaError("CSV columns are out of manifest order")
    rows = [r for r in reader]
    cols = manifest.feature_columns
    features = np.zeros((len(rows), len(cols)))
    raw: dict[str, list[str]] = {c.name: [] for c in manifest.columns if c.kind != "numeric"}
    index = {c.name: i for i, c in enumerate(manifest.columns)}
    for r, row in enumerate(rows, start=1):
        if len(row) != len(expected):
            raise ParseError(f"row {r}: expected {len(expected)} cells, found {len(row)}")
        for j, c in enumerate(cols):
            cell = row[index[c.name]]
            if c.kind == "numeric":
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"row {r}, column {c.name!r}: cannot parse {cell!r} as a number") from None
                if not math.isfinite(value):
                    raise ParseError(f"row {r}, column {c.name!r}: non-finite value {cell!r}")
                features[r - 1, j] = value
            else:
                raw[c.name].append(cell)
        raw[manifest.label.name].append(row[index[manifest.label.name]])
    categories = {}
    levels = levels or {}
    for j, c in enumerate(cols):
        if c.kind == "categorical":
            codes, order = _encode(raw[c.name], levels.get(c.name))
            features[:, j] = codes
            categories[c.name] = order
    label_values = raw[manifest.label.name]
    if all(v.lstrip("-").isdigit() for v in label_values):
        labels = np.array([int(v) for v in label_values], dtype=int)
    else:
        labels, order = _encode(label_values, levels.get(manifest.label.name))
        categories[manifest.label.name] = order
    if manifest.num_records is not None and manifest.num_records != len(rows):
        raise SchemaError(f"manifest declares {manifest.num_records} records, CSV has {len(rows)}")
    ds = FeatureDataset(manifest, features, labels, categories, ground_truth or {})
    _check_norm(ds)
    return ds


def _check_norm(ds: FeatureDataset) -> None:
    bound = ds.manifest.norm_bound
    if bound is None or not len(ds):
        return
    numeric = [i for i, c in enumerate(ds.manifest.feature_columns) if c.kind == "numeric"]
    norms = np.linalg.norm(ds.features[:, numeric], axis=1)
    worst = int(np.argmax(norms))
    if norms[worst] > bound * (1 + 1e-12):
        raise NormViolationError(f"row {worst + 1}: norm {norms[worst]:.6g} exceeds declared bound {bound:g}")


def dataset_to_csv(ds: FeatureDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c.name for c in ds.manifest.columns])
    cols = ds.manifest.feature_columns
    pos = {c.name: j for j, c in enumerate(cols)}
    label_cats = ds.categories.get(ds.manifest.label.name)
    for i in range(len(ds)):
        row = []
        for c in ds.manifest.columns:
            if c.kind == "label":
                y = int(ds.labels[i])
                row.append(label_cats[y] if label_cats is not None else str(y))
            elif c.kind == "categorical":
                row.append(ds.categories[c.name][int(ds.features[i, pos[c.name]])])
            else:
                row.append(_format(ds.features[i, pos[c.name]]))
        writer.writerow(row)
    return buf.getvalue()


def write_dataset(ds: FeatureDataset, csv_path, manifest_path) -> None:
    _check_norm(ds)
    manifest = DatasetManifest(ds.manifest.columns, len(ds), ds.manifest.norm_bound)
    doc = manifest.to_json()
    if ds.categories:
        doc["categories"] = ds.categories
    if ds.ground_truth:
        doc["ground_truth"] = ds.ground_truth
    Path(csv_path).write_text(dataset_to_csv(ds))
    Path(manifest_path).write_text(json.dumps(doc, indent=2) + "\n")


def design_matrix(ds: FeatureDataset) -> tuple[Batch, FeatureSchema]:
    """Numeric columns as they are, categorical columns one-hot encoded with their role."""
    blocks, public = [], []
    for j, c in enumerate(ds.manifest.feature_columns):
        if c.kind == "categorical":
            width = len(ds.categories.get(c.name, ())) or int(ds.features[:, j].max(initial=-1)) + 1
            blocks.append(np.eye(width)[ds.features[:, j].astype(int)] if len(ds) else np.zeros((0, width)))
            public.extend([c.role == "public"] * width)
        else:
            blocks.append(ds.features[:, j:j + 1])
            public.append(c.role == "public")
    features = np.hstack(blocks) if blocks else np.zeros((len(ds), 0))
    schema = FeatureSchema(np.array(public, dtype=bool), ds.manifest.label.role == "public")
    return Batch(features, ds.labels), schema
