"""Descriptors and shared types for the component library."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from mcps_forge.data import Table

STAGES = (
    "missing_values",
    "outliers",
    "transformation",
    "dim_reduction",
    "sampling",
    "predictor",
    "meta_predictor",
)
PREPROCESSING_STAGES = STAGES[:5]
# Structural transitions inside Vote subnets; not a search-space slot.
INTERNAL = "internal"

INSTANCES = "instances"
PREDICTIONS = "predictions"

NONE_ID = "none"


class ComponentError(RuntimeError):
    """A component's input contract was violated (e.g. missing cells reach a predictor)."""


class BudgetExceeded(RuntimeError):
    """Cooperative abort raised from a budget check between work units."""


class EvaluationTimeout(BudgetExceeded):
    pass


class ResourceExceeded(BudgetExceeded):
    pass


@dataclass(frozen=True)
class ParamDescriptor:
    """One hyperparameter.

    ``kind`` is ``continuous``, ``integer``, ``categorical`` (simple value
    list) or ``complex`` (value set is a family of components, expanded
    recursively by the search space).
    """

    name: str
    kind: str
    lo: float | None = None
    hi: float | None = None
    log: bool = False
    values: tuple = ()
    default: Any = None

    def __post_init__(self):
        if self.kind in ("continuous", "integer"):
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"parameter {self.name}: need lo < hi")
            if self.log and self.lo <= 0:
                raise ValueError(f"parameter {self.name}: log scale needs lo > 0")
        elif self.kind in ("categorical", "complex"):
            if not self.values:
                raise ValueError(f"parameter {self.name}: empty value list")
        else:
            raise ValueError(f"parameter {self.name}: unknown kind {self.kind!r}")
        if self.default is None:
            object.__setattr__(self, "default", self._fallback_default())
        if not self.contains(self.default):
            raise ValueError(f"parameter {self.name}: default {self.default!r} out of range")

    def _fallback_default(self):
        if self.kind == "continuous":
            return float(np.sqrt(self.lo * self.hi)) if self.log else (self.lo + self.hi) / 2
        if self.kind == "integer":
            return int((self.lo + self.hi) // 2)
        return self.values[0]

    @property
    def is_numeric(self) -> bool:
        return self.kind in ("continuous", "integer")

    def contains(self, value) -> bool:
        if self.kind == "continuous":
            return isinstance(value, (int, float)) and not isinstance(value, bool) and self.lo <= value <= self.hi
        if self.kind == "integer":
            return isinstance(value, (int, np.integer)) and not isinstance(value, bool) and self.lo <= value <= self.hi
        return any(value == v and type(value) is type(v) for v in self.values)

    def to_unit(self, value) -> float:
        """Map a numeric value onto [0, 1] (log-scaled where flagged)."""
        if self.log:
            return float((np.log(value) - np.log(self.lo)) / (np.log(self.hi) - np.log(self.lo)))
        return float((value - self.lo) / (self.hi - self.lo))

    def from_unit(self, u: float):
        u = min(max(float(u), 0.0), 1.0)
        if self.log:
            value = float(np.exp(np.log(self.lo) + u * (np.log(self.hi) - np.log(self.lo))))
        else:
            value = self.lo + u * (self.hi - self.lo)
        if self.kind == "integer":
            return int(min(max(round(value), self.lo), self.hi))
        return float(min(max(value, self.lo), self.hi))

    def as_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "default": self.default}
        if self.is_numeric:
            out.update(lo=self.lo, hi=self.hi, log=self.log)
        else:
            out["values"] = list(self.values)
        return out


@dataclass(frozen=True)
class ComponentDescriptor:
    """Static description of a component.

    ``arity`` gives (inputs, outputs); -1 means any number >= 1.
    """

    id: str
    stage: str
    params: tuple[ParamDescriptor, ...] = ()
    arity: tuple[int, int] = (1, 1)
    input_kind: str = INSTANCES
    output_kind: str = INSTANCES
    stochastic: bool = False
    summary: str = ""

    def param(self, name: str) -> ParamDescriptor:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(f"{self.id} has no parameter {name!r}")

    @property
    def simple_params(self) -> tuple[ParamDescriptor, ...]:
        return tuple(p for p in self.params if p.kind != "complex")

    @property
    def complex_params(self) -> tuple[ParamDescriptor, ...]:
        return tuple(p for p in self.params if p.kind == "complex")

    def defaults(self) -> dict:
        return {p.name: p.default for p in self.simple_params}

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "stage": self.stage,
            "arity": list(self.arity),
            "input": self.input_kind,
            "output": self.output_kind,
            "stochastic": self.stochastic,
            "summary": self.summary,
            "params": [p.as_dict() for p in self.params],
        }


class Predictions:
    """Per-row class probabilities.

    Probabilities may be supplied eagerly or as a thunk; fit-mode runs
    produce deferred predictions so training-set scoring is only paid for
    when something downstream reads it.
    """

    def __init__(self, proba=None, *, n_rows: int, n_classes: int, row_ids=None,
                 compute: Callable[[], np.ndarray] | None = None):
        if proba is None and compute is None:
            raise ValueError("need probabilities or a thunk computing them")
        self._proba = None if proba is None else np.asarray(proba, dtype=float)
        self._compute = compute
        self.n_rows = n_rows
        self.n_classes = n_classes
        self.row_ids = np.arange(n_rows) if row_ids is None else np.asarray(row_ids)

    @property
    def deferred(self) -> bool:
        return self._proba is None

    @property
    def proba(self) -> np.ndarray:
        if self._proba is None:
            self._proba = np.asarray(self._compute(), dtype=float)
            self._compute = None
        return self._proba

    @property
    def labels(self) -> np.ndarray:
        # argmax keeps the first maximal class, i.e. ties go to the lowest class index
        return np.argmax(self.proba, axis=1)

    def __len__(self) -> int:
        return self.n_rows


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def derive_seed(seed: int, *keys) -> int:
    """Stable child seed from a parent seed and string/int keys."""
    h = hashlib.blake2b(struct.pack("<Q", int(seed) & 0xFFFFFFFFFFFFFFFF), digest_size=4)
    for key in keys:
        h.update(b"\x00" + (repr(int(key)) if isinstance(key, (int, np.integer)) else "s" + str(key)).encode())
    return int.from_bytes(h.digest(), "little")


def require_complete(table: Table, who: str) -> None:
    if table.has_missing:
        n = int(np.isnan(table.X).sum())
        raise ComponentError(f"{who} cannot handle missing values ({n} missing cells)")


def require_labels(table: Table, who: str) -> None:
    if table.y is None:
        raise ComponentError(f"{who} needs labelled instances to fit")
    if table.n_rows == 0:
        raise ComponentError(f"{who} received an empty training table")


@dataclass
class FitContext:
    """Seed and cooperative budget hook passed down to every fit."""

    seed: int = 0
    check: Callable[[], None] | None = None
    memory_limit: int | None = None
    extras: dict = field(default_factory=dict)

    def child(self, *keys) -> "FitContext":
        return FitContext(derive_seed(self.seed, *keys), self.check, self.memory_limit, self.extras)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def tick(self) -> None:
        if self.check is not None:
            self.check()
