"""Suggest / evaluate / observe loop under a budget."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from mcps_forge.data import Dataset, plan_folds
from mcps_forge.evaluate import Budget, CVObjective, EvaluationRecord, evaluate, final_fit_and_test
from mcps_forge.optimize.random_search import RandomSearch
from mcps_forge.optimize.smac import SMAC, intensify
from mcps_forge.optimize.state import OptimizerState, Trajectory
from mcps_forge.optimize.tpe import TPE
from mcps_forge.space import Configuration, SearchSpace

STRATEGIES = ("random", "tpe", "smac")

# documented override keys -> (strategy, constructor argument)
OVERRIDES = {
    "tpe.gamma": ("tpe", "gamma", float),
    "tpe.candidates": ("tpe", "candidates", int),
    "tpe.startup": ("tpe", "n_startup", int),
    "smac.trees": ("smac", "trees", int),
    "smac.interleave": ("smac", "interleave", int),
    "smac.startup": ("smac", "n_startup", int),
    "smac.pool": ("smac", "pool", int),
    "smac.min_leaf": ("smac", "min_leaf", int),
}
LADDER_KEY = "intensify.ladder"


def parse_ladder(value) -> list[int] | None:
    if value is None or value == "" or value == "doubling":
        return None
    if isinstance(value, str):
        return [int(x) for x in value.replace(";", ",").split(",") if x.strip()]
    return [int(x) for x in value]


def check_overrides(params: Mapping[str, object]) -> None:
    unknown = sorted(set(params) - set(OVERRIDES) - {LADDER_KEY})
    if unknown:
        raise KeyError(f"unknown strategy parameter(s): {', '.join(unknown)}")


def make_optimizer(strategy: str, space: SearchSpace, seed: int, params: Mapping[str, object] | None = None):
    params = dict(params or {})
    check_overrides(params)
    kwargs = {arg: cast(params[key]) for key, (owner, arg, cast) in OVERRIDES.items()
              if owner == strategy and key in params}
    if strategy == "random":
        return RandomSearch(space, seed)
    if strategy == "tpe":
        return TPE(space, seed, **kwargs)
    if strategy == "smac":
        return SMAC(space, seed, **kwargs)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


@dataclass
class RunResult:
    strategy: str
    space: str
    seed: int
    history: list[EvaluationRecord]
    trajectory: Trajectory
    incumbent: EvaluationRecord | None = None
    holdout_error: float | None = None
    final_message: str = ""
    elapsed: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.incumbent is not None

    @property
    def config(self) -> Configuration | None:
        return None if self.incumbent is None else self.incumbent.config


def optimize(strategy: str, space: SearchSpace, objective, budget: Budget, seed: int = 0,
             params: Mapping[str, object] | None = None,
             log: Callable[[EvaluationRecord], None] | None = None) -> tuple[OptimizerState, float]:
    """Run the optimisation loop only; returns the final state and elapsed seconds."""
    params = dict(params or {})
    opt = make_optimizer(strategy, space, seed, params)
    ladder = parse_ladder(params.get(LADDER_KEY))
    state = OptimizerState()
    start = time.perf_counter()
    hard_deadline = start + budget.wall_clock_limit
    index = 0
    while index < budget.max_evaluations and time.perf_counter() < hard_deadline:
        cfg = opt.suggest(state)
        if strategy == "smac" and state.incumbent is not None:
            record, _ = intensify(cfg, state.incumbent, objective, budget, index, ladder, hard_deadline, start)
        else:
            record = evaluate(objective, cfg, budget, index, hard_deadline, start)
        state.observe(record)
        if log is not None:
            log(record)
        index += 1
    return state, time.perf_counter() - start


def random_search(space: SearchSpace, objective, budget: Budget, seed: int = 0):
    """Returns (incumbent configuration or None, trajectory, history)."""
    state, _ = optimize("random", space, objective, budget, seed)
    return (state.incumbent.config if state.incumbent else None), state.trajectory, state.history


def run(strategy: str, space: SearchSpace, train: Dataset, test: Dataset | None, budget: Budget,
        seed: int = 0, params: Mapping[str, object] | None = None, folds: int = 10,
        objective=None, log: Callable[[EvaluationRecord], None] | None = None) -> RunResult:
    """One seeded optimisation run followed by the holdout test of its incumbent."""
    if objective is None:
        plan = plan_folds(train, folds, seed)
        objective = CVObjective(space, train, plan, seed, budget.per_eval_memory)
    state, elapsed = optimize(strategy, space, objective, budget, seed, params, log)
    result = RunResult(strategy, space.name, seed, state.history, state.trajectory, state.incumbent,
                       elapsed=elapsed)
    if state.incumbent is None:
        result.final_message = "no feasible configuration"
    elif test is not None:
        try:
            result.holdout_error = final_fit_and_test(state.incumbent.config, train, test, seed, space)
        except Exception as exc:
            result.final_message = f"final fit failed: {type(exc).__name__}: {exc}"
    return result
