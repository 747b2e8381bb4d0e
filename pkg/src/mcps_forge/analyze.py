"""Post-hoc analysis of finished runs.

Pipelines are compared position by position with a weighted Hamming
similarity; run sets are grouped by complete linkage and summarised by
a best-of-``pick`` bootstrap of their holdout errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mcps_forge.space import WEIGHTS


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class RunSummary:
    """What the analyses need from one finished run."""

    run_id: str
    seed: int
    strategy: str
    space: str
    dataset: str
    feasible: bool
    methods: tuple[str, ...] | None = None
    cv_error: float | None = None
    holdout_error: float | None = None
    trajectory: tuple[tuple[float, float], ...] = ()
    config: dict | None = None


# --- similarity -----------------------------------------------------------

def weights_for(space: str) -> tuple[float, ...]:
    try:
        return WEIGHTS[space.upper()]
    except KeyError:
        raise AnalysisError(f"no similarity weights defined for space {space!r}") from None


def similarity(F: Sequence[str], G: Sequence[str], W: Sequence[float]) -> float:
    """1 - sum(w_i * [F_i != G_i]) / sum(w_i)."""
    if not len(F) == len(G) == len(W):
        raise AnalysisError(f"length mismatch: {len(F)}, {len(G)} and {len(W)} weights")
    W = np.asarray(W, dtype=float)
    if W.size == 0 or (W < 0).any() or W.sum() <= 0:
        raise AnalysisError("weights must be non-negative with a positive sum")
    delta = np.array([f != g for f, g in zip(F, G)], dtype=float)
    return float(1.0 - (W * delta).sum() / W.sum())


@dataclass
class SimilarityMatrix:
    run_ids: list[str]
    values: np.ndarray
    weights: tuple[float, ...]
    cv_errors: list[float]
    excluded: list[str] = field(default_factory=list)

    @property
    def mean_similarity(self) -> float:
        n = len(self.run_ids)
        if n < 2:
            return 1.0
        iu = np.triu_indices(n, k=1)
        return float(self.values[iu].mean())

    @property
    def performance_variance(self) -> float:
        return float(np.var(self.cv_errors)) if self.cv_errors else 0.0

    def distances(self) -> np.ndarray:
        return 1.0 - self.values


def similarity_matrix(runs: Sequence[RunSummary], space: str | None = None) -> SimilarityMatrix:
    """Pairwise similarity of feasible incumbents; infeasible runs are excluded."""
    feasible = [r for r in runs if r.feasible and r.methods is not None]
    excluded = [r.run_id for r in runs if not (r.feasible and r.methods is not None)]
    spaces = {r.space for r in feasible} | ({space} if space else set())
    if len({s.upper() for s in spaces}) > 1:
        raise AnalysisError(f"runs come from different spaces: {sorted(spaces)}")
    W = weights_for(space or (feasible[0].space if feasible else "FULL"))
    n = len(feasible)
    M = np.ones((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            M[a, b] = M[b, a] = similarity(feasible[a].methods, feasible[b].methods, W)
    return SimilarityMatrix([r.run_id for r in feasible], M, tuple(W), [r.cv_error for r in feasible], excluded)


# --- complete-linkage clustering -----------------------------------------

@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int
    mean_cv: float | None = None
    std_cv: float | None = None


@dataclass
class Dendrogram:
    """Leaves are 0..n-1; merge ``j`` creates cluster ``n + j``."""

    leaves: list[str]
    merges: list[Merge]

    def members(self, cluster: int) -> list[int]:
        n = len(self.leaves)
        if cluster < n:
            return [cluster]
        m = self.merges[cluster - n]
        return self.members(m.left) + self.members(m.right)

    def leaf_order(self) -> list[int]:
        if not self.merges:
            return list(range(len(self.leaves)))
        return self._order(len(self.leaves) + len(self.merges) - 1)

    def _order(self, cluster: int) -> list[int]:
        n = len(self.leaves)
        if cluster < n:
            return [cluster]
        m = self.merges[cluster - n]
        a, b = m.left, m.right
        # smaller cluster first; ties by smallest leaf index
        if (len(self.members(b)), min(self.members(b))) < (len(self.members(a)), min(self.members(a))):
            a, b = b, a
        return self._order(a) + self._order(b)

    def linkage_matrix(self) -> np.ndarray:
        """scipy-compatible linkage array."""
        return np.array([[m.left, m.right, m.distance, m.size] for m in self.merges], dtype=float)

    def to_newick(self) -> str:
        n = len(self.leaves)
        heights = {i: 0.0 for i in range(n)}
        for j, m in enumerate(self.merges):
            heights[n + j] = m.distance

        def label(name: str) -> str:
            safe = "".join(c if c.isalnum() or c in "_-." else "_" for c in name)
            return safe or "_"

        def node(c: int, parent_h: float) -> str:
            length = f":{parent_h - heights[c]:.6g}"
            if c < n:
                return label(self.leaves[c]) + length
            m = self.merges[c - n]
            a, b = m.left, m.right
            if (len(self.members(b)), min(self.members(b))) < (len(self.members(a)), min(self.members(a))):
                a, b = b, a
            return f"({node(a, m.distance)},{node(b, m.distance)})" + length

        if not self.merges:
            return label(self.leaves[0]) + ";" if n == 1 else ";"
        root = n + len(self.merges) - 1
        body = node(root, heights[root])
        return body[: body.rfind(":")] + ";"


def complete_linkage(distances: np.ndarray, labels: Sequence[str] | None = None,
                     cv_errors: Sequence[float] | None = None) -> Dendrogram:
    """Agglomerative clustering; cluster distance is the largest pairwise
    distance.  Ties merge the pair with the smallest cluster ids first."""
    D = np.asarray(distances, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise AnalysisError("distance matrix must be square")
    if n < 2:
        raise AnalysisError("clustering needs at least 2 runs")
    if not np.allclose(D, D.T):
        raise AnalysisError("distance matrix must be symmetric")
    labels = list(labels) if labels is not None else [str(i) for i in range(n)]
    errs = None if cv_errors is None else np.asarray(cv_errors, dtype=float)
    active = {i: [i] for i in range(n)}
    merges = []
    next_id = n
    while len(active) > 1:
        ids = sorted(active)
        best = None
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                a, b = ids[x], ids[y]
                d = D[np.ix_(active[a], active[b])].max()
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        members = active.pop(a) + active.pop(b)
        mean = std = None
        if errs is not None:
            mean, std = float(errs[members].mean()), float(errs[members].std())
        merges.append(Merge(a, b, float(d), len(members), mean, std))
        active[next_id] = members
        next_id += 1
    return Dendrogram(labels, merges)


def cluster(matrix: SimilarityMatrix) -> Dendrogram:
    return complete_linkage(matrix.distances(), matrix.run_ids, matrix.cv_errors)


# --- bootstrap ------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapEstimate:
    mean: float
    ci_low: float
    ci_high: float
    B: int
    pick: int
    stderr: float
    replace: bool = True

    def formatted(self, digits: int = 4) -> str:
        return f"{self.mean:.{digits}f} [{self.ci_low:.{digits}f}, {self.ci_high:.{digits}f}]"


def bootstrap_draws(cv_errors: Sequence[float], pick: int, B: int, seed: int, replace: bool = True) -> np.ndarray:
    """Index of the run kept in each of ``B`` draws: the drawn run with
    the lowest CV error, ties to the lowest run index."""
    cv = np.asarray(cv_errors, dtype=float)
    n = len(cv)
    if n == 0:
        raise AnalysisError("bootstrap needs at least one run")
    if pick < 1:
        raise AnalysisError("pick must be at least 1")
    if not replace and pick > n:
        raise AnalysisError(f"cannot pick {pick} of {n} runs without replacement")
    rng = np.random.default_rng(seed)
    # rank by (cv_error, index): the minimum rank in a draw is the winner
    order = np.lexsort((np.arange(n), cv))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    chosen = np.empty(B, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(pick if replace else n, 1))
    for start in range(0, B, chunk):
        m = min(chunk, B - start)
        if replace:
            draws = rng.integers(0, n, size=(m, pick))
        else:
            draws = np.argsort(rng.random((m, n)), axis=1)[:, :pick]
        chosen[start:start + m] = order[rank[draws].min(axis=1)]
    return chosen


def bootstrap(records: Sequence[tuple[float, float]], pick: int = 4, B: int = 100_000, seed: int = 0,
              replace: bool = True) -> BootstrapEstimate:
    """Best-of-``pick`` bootstrap of holdout error over (cv_error, holdout_error) pairs."""
    if not records:
        raise AnalysisError("bootstrap needs at least one run")
    if B < 1:
        raise AnalysisError("B must be positive")
    cv = np.array([r[0] for r in records], dtype=float)
    hold = np.array([r[1] for r in records], dtype=float)
    values = hold[bootstrap_draws(cv, pick, B, seed, replace)]
    mean = float(values.mean())
    lo, hi = np.percentile(values, [2.5, 97.5])
    # a heavily skewed draw distribution can put the mean outside the
    # percentile band; widen the band so it always brackets the mean
    return BootstrapEstimate(
        mean=mean,
        ci_low=min(float(lo), mean),
        ci_high=max(float(hi), mean),
        B=B,
        pick=pick,
        stderr=float(values.std(ddof=1) / math.sqrt(B)) if B > 1 else float("nan"),
        replace=replace,
    )


def bootstrap_expectation(records: Sequence[tuple[float, float]], pick: int) -> float:
    """Exact expectation of the with-replacement estimator by enumerating
    every ordered draw (n ** pick terms)."""
    import itertools

    n = len(records)
    total = 0.0
    for draw in itertools.product(range(n), repeat=pick):
        winner = min(draw, key=lambda i: (records[i][0], i))
        total += records[winner][1]
    return total / n**pick


# --- trajectories ---------------------------------------------------------

@dataclass
class TrajectorySet:
    run_ids: list[str]
    grid: np.ndarray
    values: np.ndarray  # runs x grid
    minimum: np.ndarray
    median: np.ndarray
    maximum: np.ndarray


def step_value(points: Sequence[tuple[float, float]], t: float, before: float = 1.0) -> float:
    value = before
    for when, best in points:
        if when > t:
            break
        value = best
    return value


def trajectories(runs: Sequence[RunSummary], grid: Sequence[float] | None = None, n_points: int = 50,
                 before: float = 1.0) -> TrajectorySet:
    """Best-so-far step functions on a shared time grid with a pointwise
    min / median / max envelope.  Before a run's first ok evaluation its
    value is ``before`` (the penalty)."""
    if not runs:
        raise AnalysisError("no runs to extract trajectories from")
    if grid is None:
        end = max((p[0] for r in runs for p in r.trajectory), default=0.0)
        grid = np.linspace(0.0, end, n_points) if end > 0 else np.zeros(1)
    grid = np.asarray(grid, dtype=float)
    values = np.array([[step_value(r.trajectory, t, before) for t in grid] for r in runs])
    return TrajectorySet(
        [r.run_id for r in runs],
        grid,
        values,
        values.min(axis=0),
        np.median(values, axis=0),
        values.max(axis=0),
    )


# --- comparison tables ----------------------------------------------------

def estimate_pair(runs: Sequence[RunSummary], pick: int, B: int, seed: int, replace: bool = True):
    """Bootstrap estimates of CV error and holdout error over feasible runs."""
    ok = [r for r in runs if r.feasible and r.cv_error is not None and r.holdout_error is not None]
    if not ok:
        return None, None
    pairs_cv = [(r.cv_error, r.cv_error) for r in ok]
    pairs_hold = [(r.cv_error, r.holdout_error) for r in ok]
    return (bootstrap(pairs_cv, pick, B, seed, replace), bootstrap(pairs_hold, pick, B, seed, replace))
