"""Append-only optimisation history with incumbent tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

from mcps_forge.evaluate import DISCARDED, EvaluationRecord


def observed_loss(record: EvaluationRecord) -> float:
    """Value fed to surrogates: the penalty for aborted or failed runs,
    the partial fold mean for challengers discarded early."""
    return record.partial_error if record.status == DISCARDED else record.cv_error


@dataclass
class Trajectory:
    """Best ok CV error so far, as a right-continuous step function."""

    points: list[tuple[float, float]] = field(default_factory=list)

    def append(self, time: float, best: float) -> None:
        if self.points:
            last_t, last_best = self.points[-1]
            if best > last_best:
                raise ValueError("trajectory must be non-increasing")
            time = max(time, last_t)
        self.points.append((float(time), float(best)))

    def value_at(self, t: float, before: float = 1.0) -> float:
        value = before
        for when, best in self.points:
            if when > t:
                break
            value = best
        return value

    @property
    def times(self) -> list[float]:
        return [p[0] for p in self.points]

    @property
    def values(self) -> list[float]:
        return [p[1] for p in self.points]

    def __len__(self):
        return len(self.points)


@dataclass
class OptimizerState:
    history: list[EvaluationRecord] = field(default_factory=list)
    incumbent: EvaluationRecord | None = None
    trajectory: Trajectory = field(default_factory=Trajectory)

    def observe(self, record: EvaluationRecord) -> None:
        self.history.append(record)
        if not record.ok:
            return
        # strict improvement: the first-seen of equal errors stays incumbent
        if self.incumbent is None or record.cv_error < self.incumbent.cv_error:
            self.incumbent = record
        self.trajectory.append(record.elapsed, self.incumbent.cv_error)

    @property
    def ok_history(self) -> list[EvaluationRecord]:
        return [r for r in self.history if r.ok]

    @property
    def n(self) -> int:
        return len(self.history)
