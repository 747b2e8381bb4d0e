"""Tree-structured Parzen estimator over a conditional space.

History is split at the ``gamma`` quantile of observed loss into a good
set and a bad set.  Each hyperparameter gets a density from each set:
truncated-Gaussian kernels plus a uniform prior component for numerics
(on the unit scale) and add-one smoothed frequencies for categoricals.
Candidates are drawn top-down from the good densities and the one with
the largest summed log ratio good/bad over its active parameters wins.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from mcps_forge.components import derive_seed
from mcps_forge.optimize.state import OptimizerState, observed_loss
from mcps_forge.space import INACTIVE, Configuration, SearchSpace

SQRT_2PI = math.sqrt(2.0 * math.pi)


def split_history(losses, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the good (first ceil(gamma*n) by loss, ties first-seen)
    and bad sets."""
    losses = np.asarray(losses, dtype=float)
    order = np.argsort(losses, kind="stable")
    n_good = int(math.ceil(gamma * len(losses)))
    return np.sort(order[:n_good]), np.sort(order[n_good:])


class NumericDensity:
    def __init__(self, obs: np.ndarray, bw_min: float, bw_max: float):
        self.mu = np.asarray(obs, dtype=float)
        n = len(self.mu)
        if n == 0:
            self.sigma = self.mu
        elif n == 1:
            self.sigma = np.array([bw_max])
        else:
            order = np.argsort(self.mu, kind="stable")
            s = self.mu[order]
            gaps = np.diff(s)
            nearest = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
            sigma = np.empty(n)
            sigma[order] = nearest
            self.sigma = np.clip(sigma, bw_min, bw_max)
        self.mass = ndtr((1.0 - self.mu) / self.sigma) - ndtr(-self.mu / self.sigma) if n else self.mu
        self.weight = 1.0 / (n + 1)

    def pdf(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        dens = np.full(u.shape, self.weight)  # uniform prior on [0, 1]
        if len(self.mu):
            z = (u[:, None] - self.mu[None, :]) / self.sigma[None, :]
            k = np.exp(-0.5 * z * z) / (SQRT_2PI * self.sigma[None, :] * self.mass[None, :])
            dens = dens + self.weight * k.sum(axis=1)
        return dens

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.integers(0, len(self.mu) + 1, size=n)
        out = rng.random(n)
        kernel = comp > 0
        if kernel.any():
            mu, sd = self.mu[comp[kernel] - 1], self.sigma[comp[kernel] - 1]
            draws = rng.normal(mu, sd)
            for _ in range(20):
                bad = (draws < 0.0) | (draws > 1.0)
                if not bad.any():
                    break
                draws[bad] = rng.normal(mu[bad], sd[bad])
            out[kernel] = np.clip(draws, 0.0, 1.0)
        return out


class CategoricalDensity:
    def __init__(self, obs: np.ndarray, arity: int):
        counts = np.bincount(np.asarray(obs, dtype=int), minlength=arity).astype(float)
        self.p = (counts + 1.0) / (counts.sum() + arity)

    def pdf(self, idx: np.ndarray) -> np.ndarray:
        return self.p[np.asarray(idx, dtype=int)]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(len(self.p), size=n, p=self.p).astype(float)


class TPE:
    name = "tpe"

    def __init__(self, space: SearchSpace, seed: int = 0, gamma: float = 0.25, candidates: int = 24,
                 n_startup: int = 10, bw_min: float = 0.01, bw_max: float = 0.5):
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        self.space = space
        self.gamma = gamma
        self.candidates = int(candidates)
        self.n_startup = int(n_startup)
        self.bw_min, self.bw_max = bw_min, bw_max
        self.rng = np.random.default_rng(derive_seed(seed, "tpe"))
        self._rows: list[np.ndarray] = []

    def _encoded(self, history) -> np.ndarray:
        # history is append-only, so encodings are cached by position
        for r in history[len(self._rows):]:
            self._rows.append(self.space.encode_vector(r.config))
        return np.array(self._rows[: len(history)])

    def _densities(self, V: np.ndarray):
        out = []
        for j, h in enumerate(self.space.hyperparameters):
            col = V[:, j]
            obs = col[col != INACTIVE]
            if h.is_categorical:
                out.append(CategoricalDensity(obs, h.arity))
            else:
                out.append(NumericDensity(obs, self.bw_min, self.bw_max))
        return out

    def suggest(self, state: OptimizerState) -> Configuration:
        if len(state.ok_history) < self.n_startup:
            return self.space.sample(self.rng)
        history = state.history
        V = self._encoded(history)
        good, bad = split_history([observed_loss(r) for r in history], self.gamma)
        lden, gden = self._densities(V[good]), self._densities(V[bad])

        n = self.candidates
        hps = self.space.hyperparameters
        cand = np.full((n, len(hps)), INACTIVE)
        score = np.zeros(n)
        for j, h in enumerate(hps):
            if h.parent is None:
                active = np.ones(n, dtype=bool)
            else:
                p = self.space._index[h.parent]
                active = cand[:, p] == h.condition
            m = int(active.sum())
            if not m:
                continue
            draws = lden[j].sample(self.rng, m)
            cand[active, j] = draws
            score[active] += np.log(lden[j].pdf(draws)) - np.log(gden[j].pdf(draws))
        best = int(np.argmax(score))
        return self.space.decode(cand[best], "tpe")
