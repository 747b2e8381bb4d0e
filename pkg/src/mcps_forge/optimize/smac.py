"""SMAC-style optimiser: random-forest surrogate, expected improvement,
random interleaving and fold-ladder intensification."""

from __future__ import annotations

import time

import numpy as np
from scipy.stats import norm
from sklearn.ensemble import RandomForestRegressor

from mcps_forge.components import derive_seed
from mcps_forge.evaluate import (
    DISCARDED,
    OK,
    PENALTY,
    Budget,
    EvaluationRecord,
    evaluate_folds,
)
from mcps_forge.optimize.state import OptimizerState, observed_loss
from mcps_forge.space import INACTIVE, Configuration, SearchSpace

VARIANCE_FLOOR = 1e-12


def expected_improvement(mu: np.ndarray, var: np.ndarray, best: float) -> np.ndarray:
    sigma = np.sqrt(np.maximum(var, VARIANCE_FLOOR))
    z = (best - mu) / sigma
    return (best - mu) * norm.cdf(z) + sigma * norm.pdf(z)


class SMAC:
    name = "smac"

    def __init__(self, space: SearchSpace, seed: int = 0, trees: int = 10, min_leaf: int = 3,
                 n_startup: int = 10, pool: int = 1000, interleave: int = 2):
        self.space = space
        self.trees = int(trees)
        self.min_leaf = int(min_leaf)
        self.n_startup = int(n_startup)
        self.pool = int(pool)
        self.interleave = int(interleave)
        self.seed = seed
        self.rng = np.random.default_rng(derive_seed(seed, "smac"))
        # categorical values enter the forest through a fixed random order so
        # threshold splits approximate subset splits
        self.perms = [
            self.rng.permutation(h.arity) if h.is_categorical else None for h in space.hyperparameters
        ]
        self.n_suggested = 0
        self._rows: list[np.ndarray] = []
        self.last_pool_size = 0

    def _forest_view(self, V: np.ndarray) -> np.ndarray:
        X = V.copy()
        for j, perm in enumerate(self.perms):
            if perm is None:
                continue
            col = V[:, j]
            active = col != INACTIVE
            X[active, j] = perm[col[active].astype(int)]
        return X

    def _fit_forest(self, state: OptimizerState):
        for r in state.history[len(self._rows):]:
            self._rows.append(self.space.encode_vector(r.config))
        X = self._forest_view(np.array(self._rows[: state.n]))
        y = np.array([observed_loss(r) for r in state.history])
        forest = RandomForestRegressor(
            n_estimators=self.trees,
            min_samples_leaf=self.min_leaf,
            max_features="sqrt",
            random_state=derive_seed(self.seed, "forest", state.n) % 2**31,
        )
        forest.fit(X, y)
        return forest

    def predict(self, forest, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = self._forest_view(V)
        per_tree = np.stack([t.predict(X) for t in forest.estimators_])
        return per_tree.mean(axis=0), per_tree.var(axis=0)

    def suggest(self, state: OptimizerState) -> Configuration:
        index = self.n_suggested
        self.n_suggested += 1
        if len(state.ok_history) < self.n_startup or index % self.interleave == 1:
            return self.space.sample(self.rng)
        forest = self._fit_forest(state)
        pool = self.space.sample_vectors(self.rng, self.pool)
        centre = state.incumbent or min(state.history, key=observed_loss)
        neighbours = self.space.neighbors(centre.config, self.rng)
        if neighbours:
            pool = np.vstack([pool, np.array([self.space.encode_vector(c) for c in neighbours])])
        self.last_pool_size = len(pool)
        mu, var = self.predict(forest, pool)
        best = state.incumbent.cv_error if state.incumbent else float(min(observed_loss(r) for r in state.history))
        ei = expected_improvement(mu, var, best)
        pick = int(np.argmax(ei))
        if pick >= self.pool:
            return neighbours[pick - self.pool].with_origin("smac")
        return self.space.decode(pool[pick], "smac")


def fold_ladder(k: int, ladder=None) -> list[int]:
    """Cumulative fold counts 1, 2, 4, ... ending at k."""
    if ladder:
        steps = sorted({int(s) for s in ladder if 0 < int(s) < k}) + [k]
        return steps
    steps, m = [], 1
    while m < k:
        steps.append(m)
        m *= 2
    return steps + [k]


def intensify(challenger: Configuration, incumbent: EvaluationRecord, objective, budget: Budget,
              eval_index: int = 0, ladder=None, hard_deadline: float | None = None,
              run_start: float | None = None) -> tuple[EvaluationRecord, bool]:
    """Race ``challenger`` against the incumbent's per-fold losses.

    The challenger is discarded the first time its mean over the shared
    folds is strictly worse.  It replaces the incumbent only with a
    strictly lower mean over all k folds; ties keep the incumbent.
    """
    k = objective.k
    inc_losses = np.asarray(incumbent.fold_losses, dtype=float)
    if len(inc_losses) != k:
        raise ValueError("incumbent must have been evaluated on every fold")
    t0 = time.perf_counter()
    deadline = t0 + budget.per_eval_timeout
    if hard_deadline is not None:
        deadline = min(deadline, hard_deadline)
    losses: list[float] = []
    status, message = OK, ""
    for m in fold_ladder(k, ladder):
        remaining = max(deadline - time.perf_counter(), 0.0)
        more, status, message = evaluate_folds(objective, challenger, range(len(losses), m), remaining)
        losses.extend(more)
        if status != OK:
            break
        if np.mean(losses) > inc_losses[:m].mean():
            status, message = (DISCARDED, f"worse than incumbent after {m} folds") if m < k else (OK, "")
            break
    now = time.perf_counter()
    complete = status == OK and len(losses) == k
    record = EvaluationRecord(
        config=challenger,
        fold_losses=losses,
        cv_error=float(np.mean(losses)) if complete else PENALTY,
        status=status,
        wall_time=now - t0,
        eval_index=eval_index,
        timestamp=time.time(),
        message=message,
        elapsed=now - (run_start if run_start is not None else t0),
        folds=list(range(len(losses))),
    )
    promoted = complete and record.cv_error < incumbent.cv_error
    return record, promoted
