"""Synthetic datasets and objectives with known optima."""

from __future__ import annotations

import zlib

import numpy as np

from mcps_forge.data import CONTINUOUS, ColumnSpec, Dataset
from mcps_forge.space import Configuration, SearchSpace, build_space


def make_planted(n_rows: int = 1000, n_features: int = 10, missing_fraction: float = 0.2,
                 n_scaled: int = 2, scale: float = 1000.0, seed: int = 0) -> Dataset:
    """Binary task that needs imputation and benefits from standardisation.

    A latent score with margin drives every informative attribute; the
    last ``n_scaled`` attributes are pure noise on a ``scale``-times larger
    range.  Exactly ``missing_fraction`` of all cells are blanked.  After
    mean imputation and standardisation the sum of the informative
    attributes separates the classes.
    """
    rng = np.random.default_rng(seed)
    n_info = n_features - n_scaled
    if n_info < 1:
        raise ValueError("need at least one informative attribute")
    sign = np.where(np.arange(n_rows) % 2 == 0, 1.0, -1.0)
    rng.shuffle(sign)
    z = sign * (0.5 + np.abs(rng.normal(size=n_rows)))
    loadings = rng.uniform(0.5, 2.0, size=n_info)
    info = z[:, None] * loadings[None, :] + rng.uniform(-0.1, 0.1, size=(n_rows, n_info))
    noise = scale * rng.normal(size=(n_rows, n_scaled))
    X = np.hstack([info, noise])
    n_missing = int(round(missing_fraction * X.size))
    cells = rng.choice(X.size, size=n_missing, replace=False)
    X.flat[cells] = np.nan
    labels = (z > 0).astype(int)
    columns = tuple(ColumnSpec(f"a{j + 1}", CONTINUOUS) for j in range(n_features))
    return Dataset("planted", columns, X, labels, ("neg", "pos"))


def make_blobs(n_rows: int = 100, n_features: int = 4, n_classes: int = 2, missing_fraction: float = 0.0,
               seed: int = 0, name: str = "blobs") -> Dataset:
    """Small Gaussian blobs for quick end-to-end runs."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n_rows) % n_classes
    rng.shuffle(labels)
    centres = rng.normal(scale=2.0, size=(n_classes, n_features))
    X = centres[labels] + rng.normal(size=(n_rows, n_features))
    if missing_fraction:
        cells = rng.choice(X.size, size=int(round(missing_fraction * X.size)), replace=False)
        X.flat[cells] = np.nan
    columns = tuple(ColumnSpec(f"x{j + 1}", CONTINUOUS) for j in range(n_features))
    return Dataset(name, columns, X, labels, tuple(f"c{k}" for k in range(n_classes)))


# target of the synthetic FULL-space objective: slot choice and preferred
# parameter values (unit-scale target for numerics)
PLANTED_TARGET = {
    "missing_values": ("ReplaceConstant", {"strategy": "median"}),
    "outliers": ("none", {}),
    "transformation": ("Standardize", {}),
    "dim_reduction": ("PCA", {"variance_kept": 0.8}),
    "sampling": ("none", {}),
    "predictor": ("KNN", {"k": 0.2, "weighted": True}),
    "meta_predictor": ("Bagging", {"n": 0.7, "fraction": 0.8}),
}
SLOT_WEIGHTS = {"predictor": 2.0, "meta_predictor": 1.5}


def _jitter(cfg: Configuration) -> float:
    return (zlib.crc32(cfg.key().encode()) % 10007) / 10007.0


def synthetic_loss(cfg: Configuration, space: SearchSpace | None = None, target=None) -> float:
    """Deterministic loss in [0, 1]: weighted slot mismatches, distance of
    the matched components' parameters to their targets, and a small
    configuration-hash jitter."""
    space = space or build_space("FULL")
    target = target or PLANTED_TARGET
    mismatch = total = param_gap = 0.0
    n_params = 0
    for slot, (choice, wanted) in target.items():
        w = SLOT_WEIGHTS.get(slot, 1.0)
        total += w
        hit = cfg[slot] == choice
        mismatch += 0.0 if hit else w
        for name, goal in wanted.items():
            n_params += 1
            if not hit:
                param_gap += 1.0
                continue
            h = space.hyperparameter(f"{slot}.{choice}.{name}")
            value = cfg[h.path]
            if h.is_categorical:
                param_gap += 0.0 if value == goal else 1.0
            else:
                param_gap += abs(h.descriptor.to_unit(value) - goal)
    score = 0.65 * mismatch / total + 0.3 * param_gap / max(n_params, 1) + 0.05 * _jitter(cfg)
    return float(min(max(score, 0.0), 1.0))


def synthetic_objective(space: SearchSpace | None = None, k: int = 1):
    from mcps_forge.evaluate import SyntheticObjective

    space = space or build_space("FULL")
    return SyntheticObjective(lambda cfg, i: synthetic_loss(cfg, space), k)
