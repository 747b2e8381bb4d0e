"""Search strategies behind one suggest/observe contract."""

from mcps_forge.optimize.random_search import RandomSearch
from mcps_forge.optimize.run import (
    OVERRIDES,
    STRATEGIES,
    RunResult,
    make_optimizer,
    optimize,
    parse_ladder,
    random_search,
    run,
)
from mcps_forge.optimize.smac import SMAC, expected_improvement, fold_ladder, intensify
from mcps_forge.optimize.state import OptimizerState, Trajectory, observed_loss
from mcps_forge.optimize.tpe import TPE, split_history

__all__ = [
    "OVERRIDES",
    "STRATEGIES",
    "OptimizerState",
    "RandomSearch",
    "RunResult",
    "SMAC",
    "TPE",
    "Trajectory",
    "expected_improvement",
    "fold_ladder",
    "intensify",
    "make_optimizer",
    "observed_loss",
    "optimize",
    "parse_ladder",
    "random_search",
    "run",
    "split_history",
]
