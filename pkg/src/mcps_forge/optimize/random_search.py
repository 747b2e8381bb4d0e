from __future__ import annotations

import numpy as np

from mcps_forge.components import derive_seed
from mcps_forge.space import Configuration, SearchSpace


class RandomSearch:
    """Independent prior samples."""

    name = "random"

    def __init__(self, space: SearchSpace, seed: int = 0):
        self.space = space
        self.rng = np.random.default_rng(derive_seed(seed, "random"))

    def suggest(self, state) -> Configuration:
        return self.space.sample(self.rng)
