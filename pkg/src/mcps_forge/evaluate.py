"""Cross-validated objective with cooperative time and memory budgets."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from mcps_forge import mcps
from mcps_forge.components import FitContext, derive_seed
from mcps_forge.components.base import BudgetExceeded, EvaluationTimeout, ResourceExceeded
from mcps_forge.data import Dataset, FoldPlan
from mcps_forge.space import Configuration, SearchSpace

PENALTY = 1.0

OK = "ok"
ABORTED_TIMEOUT = "aborted_timeout"
ABORTED_RESOURCE = "aborted_resource"
FAILED = "failed"
# challenger rejected by intensification before its full fold ladder
DISCARDED = "discarded"
STATUSES = (OK, ABORTED_TIMEOUT, ABORTED_RESOURCE, FAILED, DISCARDED)


@dataclass(frozen=True)
class Budget:
    wall_clock_limit: float = 300.0
    max_evaluations: int = 500
    per_eval_timeout: float = 10.0
    per_eval_memory: int | None = 3 * 1024**3

    def __post_init__(self):
        if self.wall_clock_limit <= 0 or self.per_eval_timeout <= 0:
            raise ValueError("time budgets must be positive")
        if self.max_evaluations < 0:
            raise ValueError("evaluation budget cannot be negative")
        if self.per_eval_memory is not None and self.per_eval_memory <= 0:
            raise ValueError("memory budget must be positive")


@dataclass
class EvaluationRecord:
    config: Configuration
    fold_losses: list[float]
    cv_error: float
    status: str
    wall_time: float = 0.0
    eval_index: int = 0
    timestamp: float = 0.0
    message: str = ""
    elapsed: float = 0.0
    folds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def ok(self) -> bool:
        return self.status == OK

    @property
    def partial_error(self) -> float:
        """Mean over the folds actually evaluated (penalty if none)."""
        return float(np.mean(self.fold_losses)) if self.fold_losses else PENALTY

    def sort_key(self) -> tuple:
        # any non-ok record ranks after every ok record
        return (0 if self.ok else 1, self.cv_error, self.eval_index)

    def to_dict(self) -> dict:
        return {
            "eval_index": self.eval_index,
            "timestamp": self.timestamp,
            "elapsed": self.elapsed,
            "wall_time": self.wall_time,
            "status": self.status,
            "cv_error": self.cv_error,
            "fold_losses": list(self.fold_losses),
            "folds": list(self.folds),
            "config": self.config.to_dict(),
            "space": self.config.space,
            "origin": self.config.origin,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvaluationRecord":
        return cls(
            config=Configuration(doc["config"], doc.get("space", ""), doc.get("origin", "")),
            fold_losses=list(doc["fold_losses"]),
            cv_error=float(doc["cv_error"]),
            status=doc["status"],
            wall_time=float(doc.get("wall_time", 0.0)),
            eval_index=int(doc.get("eval_index", 0)),
            timestamp=float(doc.get("timestamp", 0.0)),
            message=doc.get("message", ""),
            elapsed=float(doc.get("elapsed", 0.0)),
            folds=list(doc.get("folds", [])),
        )


class EvaluationFailure(RuntimeError):
    pass


def misclassification(predicted: np.ndarray, truth: np.ndarray) -> float:
    if len(truth) == 0:
        raise EvaluationFailure("empty validation fold")
    return float(np.mean(np.asarray(predicted) != np.asarray(truth)))


def _deadline_check(deadline: float) -> Callable[[], None]:
    def check():
        if time.perf_counter() > deadline:
            raise EvaluationTimeout("evaluation exceeded its time budget")
    return check


class CVObjective:
    """k-fold CV misclassification of instantiated nets on a training split.

    Component seeds depend on the run seed and fold index only, so equal
    configurations get equal fold losses.  ``rows_read`` records every
    dataset row handed to a net, which lets tests prove the holdout split
    is never touched.
    """

    def __init__(self, space: SearchSpace, train: Dataset, folds: FoldPlan, seed: int = 0,
                 memory_limit: int | None = None, memoize: bool = True):
        if len(folds.assignment) != train.n_rows:
            raise ValueError("fold plan does not match the training set")
        self.space = space
        self.train = train
        self.plan = folds
        self.k = folds.k
        self.seed = seed
        self.memory_limit = memory_limit
        self.memoize = memoize
        self._cache: dict[tuple[str, int], float] = {}
        self._nets: dict[str, mcps.McpsNet] = {}
        self._tables = {}
        self.rows_read: set[int] = set()

    def _fold_tables(self, i: int):
        if i not in self._tables:
            tr = self.plan.training_rows(i)
            va = self.plan.validation_rows(i)
            self._tables[i] = (self.train.table(tr), self.train.table(va, labelled=False), self.train.labels[va])
        return self._tables[i]

    def fold_loss(self, cfg: Configuration, i: int, check: Callable[[], None] | None = None) -> float:
        key = (cfg.key(), i)
        if self.memoize and key in self._cache:
            return self._cache[key]
        net = self._nets.get(cfg.key())
        if net is None:
            net = self._nets[cfg.key()] = self.space.instantiate(cfg)
        fit_table, valid_table, truth = self._fold_tables(i)
        ctx = FitContext(derive_seed(self.seed, "fold", i), check, self.memory_limit)
        self.rows_read.update(fit_table.row_ids.tolist())
        _, state = mcps.execute(net, mcps.Token(fit_table), "fit", None, ctx)
        if check is not None:
            check()
        out, _ = mcps.execute(net, mcps.Token(valid_table), "predict", state, ctx)
        self.rows_read.update(valid_table.row_ids.tolist())
        loss = misclassification(out.payload.labels, truth)
        if self.memoize:
            self._cache[key] = loss
        return loss


class SyntheticObjective:
    """Direct configuration -> loss function; no model fitting.

    ``fn`` receives the configuration and the fold index.
    """

    def __init__(self, fn: Callable[[Configuration, int], float], k: int = 1):
        self.fn = fn
        self.k = k

    def fold_loss(self, cfg: Configuration, i: int, check=None) -> float:
        if check is not None:
            check()
        loss = float(self.fn(cfg, i))
        if not 0.0 <= loss <= 1.0:
            raise EvaluationFailure(f"loss {loss} outside [0, 1]")
        return loss


def evaluate_folds(objective, cfg: Configuration, folds: Sequence[int], per_eval_timeout: float,
                   hard_deadline: float | None = None) -> tuple[list[float], str, str]:
    """Run ``folds`` in order; returns (losses so far, status, message).

    Timeouts are cooperative: checked between transitions and folds.
    """
    deadline = time.perf_counter() + per_eval_timeout
    if hard_deadline is not None:
        deadline = min(deadline, hard_deadline)
    check = _deadline_check(deadline)
    losses: list[float] = []
    try:
        for i in folds:
            check()
            losses.append(objective.fold_loss(cfg, i, check))
    except EvaluationTimeout as exc:
        return losses, ABORTED_TIMEOUT, str(exc)
    except ResourceExceeded as exc:
        return losses, ABORTED_RESOURCE, str(exc)
    except MemoryError:
        return losses, ABORTED_RESOURCE, "out of memory"
    except BudgetExceeded as exc:
        return losses, ABORTED_TIMEOUT, str(exc)
    except Exception as exc:
        return losses, FAILED, f"{type(exc).__name__}: {exc}"
    return losses, OK, ""


def evaluate(objective, cfg: Configuration, budget: Budget, eval_index: int = 0,
             hard_deadline: float | None = None, run_start: float | None = None) -> EvaluationRecord:
    """Evaluate ``cfg`` on every fold; failures encode into the status."""
    t0 = time.perf_counter()
    folds = list(range(objective.k))
    losses, status, message = evaluate_folds(objective, cfg, folds, budget.per_eval_timeout, hard_deadline)
    now = time.perf_counter()
    return EvaluationRecord(
        config=cfg,
        fold_losses=losses,
        cv_error=float(np.mean(losses)) if status == OK else PENALTY,
        status=status,
        wall_time=now - t0,
        eval_index=eval_index,
        timestamp=time.time(),
        message=message,
        elapsed=now - (run_start if run_start is not None else t0),
        folds=folds[: len(losses)],
    )


def cv_evaluate(cfg: Configuration, train: Dataset, folds: FoldPlan, budget: Budget | None = None,
                seed: int = 0, space: SearchSpace | None = None) -> EvaluationRecord:
    """Stand-alone k-fold evaluation of one configuration."""
    from mcps_forge.space import build_space

    space = space or build_space(cfg.space)
    budget = budget or Budget()
    objective = CVObjective(space, train, folds, seed, budget.per_eval_memory, memoize=False)
    return evaluate(objective, cfg, budget)


def final_fit_and_test(cfg: Configuration, train: Dataset, test: Dataset, seed: int = 0,
                       space: SearchSpace | None = None) -> float:
    """Fit on the whole training split and return holdout misclassification.

    Component failures propagate: the caller chose this configuration.
    """
    from mcps_forge.space import build_space

    space = space or build_space(cfg.space)
    net = space.instantiate(cfg)
    ctx = FitContext(derive_seed(seed, "final"))
    _, state = mcps.execute(net, mcps.Token(train.table()), "fit", None, ctx)
    out, _ = mcps.execute(net, mcps.Token(test.table(labelled=False)), "predict", state, ctx)
    return misclassification(out.payload.labels, test.labels)
