"""Tabular dataset ingestion, stratified holdout splits and CV fold plans."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
DEFAULT_MISSING = "?"


class DataError(ValueError):
    """Raised for ingestion, splitting and fold-planning failures."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = CONTINUOUS
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CONTINUOUS and self.categories:
            raise DataError(f"column {self.name!r}: continuous columns carry no categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def unknown_code(self) -> int:
        """Reserved code for category values not seen at load time."""
        return len(self.categories)


@dataclass(frozen=True, eq=False)
class Table:
    """Numeric view of (a subset of) a dataset handed to components.

    Categorical cells hold their category code; missing cells are NaN.
    ``row_ids`` tracks provenance back to the originating dataset rows.
    """

    X: np.ndarray
    categorical: tuple[bool, ...]
    n_classes: int
    y: np.ndarray | None = None
    row_ids: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.X.ndim != 2:
            raise ValueError("table data must be 2-D")
        if len(self.categorical) != self.X.shape[1]:
            raise ValueError("column kind list does not match table width")
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(self.X.shape[0]))

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any())

    @property
    def labelled(self) -> bool:
        return self.y is not None

    def take(self, rows) -> "Table":
        rows = np.asarray(rows, dtype=int)
        return Table(
            X=self.X[rows],
            categorical=self.categorical,
            n_classes=self.n_classes,
            y=None if self.y is None else self.y[rows],
            row_ids=self.row_ids[rows],
            weights=None if self.weights is None else self.weights[rows],
        )

    def replace(self, **changes) -> "Table":
        fields = dict(
            X=self.X,
            categorical=self.categorical,
            n_classes=self.n_classes,
            y=self.y,
            row_ids=self.row_ids,
            weights=self.weights,
        )
        fields.update(changes)
        return Table(**fields)

    def unlabelled(self) -> "Table":
        return self.replace(y=None, weights=None)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable typed table with class labels and a missing-value mask."""

    name: str
    columns: tuple[ColumnSpec, ...]
    X: np.ndarray
    labels: np.ndarray
    classes: tuple[str, ...]
    label_name: str = "class"
    missing_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise DataError("every row must have exactly one cell per column")
        if labels.shape != (X.shape[0],):
            raise DataError("every row must carry exactly one label")
        if not self.classes:
            raise DataError("class label set is empty")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.classes)):
            raise DataError("label code outside the class list")
        mask = np.isnan(X)
        if self.missing_mask is not None and not np.array_equal(mask, self.missing_mask):
            raise DataError("missing mask disagrees with cell values")
        if np.isinf(X).any():
            raise DataError("continuous cells must be finite")
        X.setflags(write=False)
        labels.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "missing_mask", mask)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def rows(self) -> list[list[float]]:
        return self.X.tolist()

    @property
    def categorical(self) -> tuple[bool, ...]:
        return tuple(c.is_categorical for c in self.columns)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def table(self, rows=None, labelled: bool = True) -> Table:
        """Materialise rows as a component-facing :class:`Table`."""
        idx = np.arange(self.n_rows) if rows is None else np.asarray(rows, dtype=int)
        return Table(
            X=self.X[idx],
            categorical=self.categorical,
            n_classes=self.n_classes,
            y=self.labels[idx] if labelled else None,
            row_ids=idx,
        )

    def subset(self, rows, name: str | None = None) -> "Dataset":
        idx = np.asarray(rows, dtype=int)
        return Dataset(
            name=name or self.name,
            columns=self.columns,
            X=self.X[idx],
            labels=self.labels[idx],
            classes=self.classes,
            label_name=self.label_name,
        )


def _parse_schema_file(path) -> dict[str, str]:
    kinds = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise DataError(f"schema line {lineno}: expected 'column = kind'")
        value = value.strip().lower()
        if value not in (CONTINUOUS, CATEGORICAL):
            raise DataError(f"schema line {lineno}: unknown kind {value!r}")
        kinds[key.strip()] = value
    return kinds


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def load_csv(path, schema="auto", missing_marker: str = DEFAULT_MISSING, name: str | None = None) -> Dataset:
    """Read a header-first CSV whose last column is the class label.

    ``schema`` is ``"auto"`` (numeric-looking columns become continuous),
    a list of :class:`ColumnSpec`, or a path to a ``column = kind`` sidecar.
    Cells equal to ``missing_marker`` or empty are missing.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least one attribute and a label column")
        raw_rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
                )
            raw_rows.append((lineno, [c.strip() for c in row]))

    attr_names = header[:-1]

    def is_missing(cell: str) -> bool:
        return cell == "" or cell == missing_marker

    specs: list[ColumnSpec]
    if isinstance(schema, (list, tuple)):
        specs = list(schema)
        if [s.name for s in specs] != attr_names:
            raise DataError("schema column names do not match the CSV header")
    else:
        kinds = {} if schema in (None, "auto") else _parse_schema_file(schema)
        specs = []
        for j, col in enumerate(attr_names):
            values = [cells[j] for _, cells in raw_rows if not is_missing(cells[j])]
            kind = kinds.get(col)
            if kind is None:
                kind = CONTINUOUS if all(_is_number(v) for v in values) else CATEGORICAL
            cats = tuple(sorted(set(values))) if kind == CATEGORICAL else ()
            specs.append(ColumnSpec(col, kind, cats))

    n, d = len(raw_rows), len(attr_names)
    X = np.full((n, d), np.nan)
    codes = [{c: k for k, c in enumerate(s.categories)} for s in specs]
    label_text = []
    for i, (lineno, cells) in enumerate(raw_rows):
        for j, spec in enumerate(specs):
            cell = cells[j]
            if is_missing(cell):
                continue
            if spec.is_categorical:
                X[i, j] = codes[j].get(cell, spec.unknown_code)
            else:
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {spec.name!r}: cannot parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(f"{path}: row {lineno}, column {spec.name!r}: non-finite value")
                X[i, j] = value
        if is_missing(cells[-1]):
            raise DataError(f"{path}: row {lineno} has no class label")
        label_text.append(cells[-1])

    classes = tuple(sorted(set(label_text)))
    if not classes:
        raise DataError(f"{path}: no data rows")
    lookup = {c: k for k, c in enumerate(classes)}
    labels = np.array([lookup[t] for t in label_text], dtype=int)
    return Dataset(
        name=name or path.stem,
        columns=tuple(specs),
        X=X,
        labels=labels,
        classes=classes,
        label_name=header[-1],
    )


def _format_cell(value: float, spec: ColumnSpec, missing_marker: str) -> str:
    if np.isnan(value):
        return missing_marker
    if spec.is_categorical:
        code = int(value)
        return spec.categories[code] if code < len(spec.categories) else missing_marker
    return repr(float(value))


def write_csv(dataset: Dataset, path, missing_marker: str = DEFAULT_MISSING) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in dataset.columns] + [dataset.label_name])
        for row, label in zip(dataset.X, dataset.labels):
            cells = [_format_cell(v, s, missing_marker) for v, s in zip(row, dataset.columns)]
            writer.writerow(cells + [dataset.classes[label]])
    return path


def write_schema(dataset: Dataset, path) -> Path:
    path = Path(path)
    path.write_text("".join(f"{c.name} = {c.kind}\n" for c in dataset.columns), encoding="utf-8")
    return path


def file_checksum(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_holdout(d: Dataset, train_fraction: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; each class contributes round(fraction * n_c) training rows."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    counts = d.class_counts()
    present = np.flatnonzero(counts)
    if present.size < 2:
        raise DataError("cannot stratify a dataset with fewer than two classes")
    for c in present:
        if counts[c] < 2:
            raise DataError(f"cannot stratify: class {d.classes[c]!r} has fewer than 2 rows")
    rng = np.random.default_rng(seed)
    train_rows = []
    for c in present:
        members = np.flatnonzero(d.labels == c)
        members = members[rng.permutation(members.size)]
        train_rows.append(members[: _half_up(train_fraction * members.size)])
    train_idx = np.sort(np.concatenate(train_rows))
    test_idx = np.setdiff1d(np.arange(d.n_rows), train_idx)
    return d.subset(train_idx, f"{d.name}-train"), d.subset(test_idx, f"{d.name}-test")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def validation_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def training_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def __eq__(self, other):
        return (
            isinstance(other, FoldPlan)
            and self.k == other.k
            and np.array_equal(self.assignment, other.assignment)
        )


def plan_folds(d: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified k-fold assignment.

    Rows are shuffled within their class, classes are laid end to end and
    dealt round-robin, so per-class and overall fold sizes differ by at most 1.
    """
    if k < 2:
        raise DataError("need at least 2 folds")
    if k > d.n_rows:
        raise DataError(f"cannot plan {k} folds over {d.n_rows} rows")
    rng = np.random.default_rng(seed)
    order = []
    for c in range(d.n_classes):
        members = np.flatnonzero(d.labels == c)
        order.append(members[rng.permutation(members.size)])
    order = np.concatenate(order)
    assignment = np.empty(d.n_rows, dtype=int)
    assignment[order] = np.arange(order.size) % k
    return FoldPlan(k, assignment)


def stratified_sizes_ok(d: Dataset, plan: FoldPlan) -> bool:
    for c in range(d.n_classes):
        per_fold = np.bincount(plan.assignment[d.labels == c], minlength=plan.k)
        if per_fold.max() - per_fold.min() > 1:
            return False
    return True


def class_table(values: Sequence[str]) -> tuple[tuple[str, ...], np.ndarray]:
    classes = tuple(sorted(set(values)))
    lookup = {c: k for k, c in enumerate(classes)}
    return classes, np.array([lookup[v] for v in values], dtype=int)
