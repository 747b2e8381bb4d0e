"""Preprocessing transitions: imputation, outlier removal, transformation,
dimensionality reduction and sampling.

Row-dropping filters (outlier removal, sampling) act only while fitting;
in predict mode they pass rows through one-to-one.
"""

from __future__ import annotations

import warnings
from typing import ClassVar

import numpy as np

from mcps_forge.components.base import (
    ComponentDescriptor,
    ComponentError,
    FitContext,
    ParamDescriptor,
    require_complete,
)
from mcps_forge.data import Table


class Preprocessor:
    descriptor: ClassVar[ComponentDescriptor]
    drops_rows: ClassVar[bool] = False

    def __init__(self, **params):
        merged = self.descriptor.defaults()
        merged.update(params)
        unknown = set(merged) - {p.name for p in self.descriptor.simple_params}
        if unknown:
            raise ComponentError(f"{self.descriptor.id}: unknown parameters {sorted(unknown)}")
        for p in self.descriptor.simple_params:
            if not p.contains(merged[p.name]):
                raise ComponentError(f"{self.descriptor.id}: {p.name}={merged[p.name]!r} out of range")
        self.params = merged
        self.fitted = False

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def fit_transform(self, table: Table, ctx: FitContext | None = None) -> Table:
        """Learn state from ``table`` and return the fit-time output."""
        self._fit(table, ctx or FitContext())
        self.fitted = True
        return self._fit_output(table, ctx or FitContext())

    def transform(self, table: Table) -> Table:
        if not self.fitted:
            raise ComponentError(f"{self.descriptor.id} applied before fit")
        return self._transform(table)

    def _fit(self, table: Table, ctx: FitContext) -> None:
        pass

    def _fit_output(self, table: Table, ctx: FitContext) -> Table:
        return self._transform(table)

    def _transform(self, table: Table) -> Table:
        return table


def _continuous_mask(table: Table) -> np.ndarray:
    return ~np.asarray(table.categorical, dtype=bool)


def _check_width(fitted_width: int, table: Table, who: str) -> None:
    if table.n_cols != fitted_width:
        raise ComponentError(f"{who}: fitted on {fitted_width} columns, got {table.n_cols}")


def _nan_stat(fn, X):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(X, axis=0)


# --- missing values -------------------------------------------------------

class ReplaceConstant(Preprocessor):
    """Fill missing cells with a per-column constant learned at fit time.

    For categorical columns ``mean`` and ``median`` fall back to the most
    frequent category code.
    """

    descriptor = ComponentDescriptor(
        id="ReplaceConstant",
        stage="missing_values",
        params=(ParamDescriptor("strategy", "categorical", values=("zero", "mean", "median", "min", "max"), default="mean"),),
        summary="replace missing cells by zero, mean, median, min or max of the column",
    )

    def _fit(self, table, ctx):
        X = table.X
        strategy = self.params["strategy"]
        if strategy == "zero":
            fill = np.zeros(table.n_cols)
        else:
            if strategy == "median":
                fill = column_quantiles(X, (0.5,))[0]
            else:
                fn = {"mean": np.nanmean, "min": np.nanmin, "max": np.nanmax}[strategy]
                fill = _nan_stat(fn, X) if X.shape[0] else np.full(table.n_cols, np.nan)
            if strategy in ("mean", "median"):
                for j, is_cat in enumerate(table.categorical):
                    if is_cat:
                        col = X[:, j][~np.isnan(X[:, j])]
                        fill[j] = np.bincount(col.astype(int)).argmax() if col.size else 0.0
        self.fill_ = np.where(np.isnan(fill), 0.0, fill)

    def _transform(self, table):
        _check_width(self.fill_.size, table, self.descriptor.id)
        X = table.X
        if not np.isnan(X).any():
            return table
        X = np.where(np.isnan(X), self.fill_[None, :], X)
        return table.replace(X=X)


# --- outliers -------------------------------------------------------------

def quartiles(values: np.ndarray) -> tuple[float, float]:
    """First and third quartile by linear interpolation (Hyndman-Fan type 7)."""
    q = column_quantiles(np.asarray(values, dtype=float)[:, None], (0.25, 0.75))
    return float(q[0, 0]), float(q[1, 0])


def column_quantiles(X: np.ndarray, probs) -> np.ndarray:
    """Type-7 quantiles of every column, ignoring NaN; NaN for empty columns.

    Returns an array of shape (len(probs), n_cols).
    """
    S = np.sort(X, axis=0)  # NaN sorts last
    n = (~np.isnan(X)).sum(axis=0)
    out = np.full((len(probs), X.shape[1]), np.nan)
    has = n > 0
    if not has.any():
        return out
    cols = np.flatnonzero(has)
    for r, p in enumerate(probs):
        h = (n[cols] - 1) * p
        lo = np.floor(h).astype(int)
        hi = np.minimum(lo + 1, n[cols] - 1)
        a, b = S[lo, cols], S[hi, cols]
        out[r, cols] = a + (h - lo) * (b - a)
    return out


class IQRRemove(Preprocessor):
    """Drop training rows with a continuous value outside
    ``[Q1 - m * IQR, Q3 + m * IQR]``.  Columns whose IQR is zero are ignored.
    """

    drops_rows = True
    descriptor = ComponentDescriptor(
        id="IQRRemove",
        stage="outliers",
        params=(ParamDescriptor("multiplier", "continuous", lo=1.5, hi=3.0, default=1.5),),
        summary="interquartile-range outlier detection and removal (fit only)",
    )

    def _fit(self, table, ctx):
        m = self.params["multiplier"]
        lo = np.full(table.n_cols, -np.inf)
        hi = np.full(table.n_cols, np.inf)
        q1, q3 = column_quantiles(table.X, (0.25, 0.75))
        iqr = q3 - q1
        with np.errstate(invalid="ignore"):
            use = _continuous_mask(table) & (iqr > 0)
        lo[use] = q1[use] - m * iqr[use]
        hi[use] = q3[use] + m * iqr[use]
        self.lower_, self.upper_ = lo, hi

    def outlier_rows(self, table: Table) -> np.ndarray:
        X = table.X
        with np.errstate(invalid="ignore"):
            bad = (X < self.lower_) | (X > self.upper_)
        return np.flatnonzero(bad.any(axis=1))

    def _fit_output(self, table, ctx):
        keep = np.setdiff1d(np.arange(table.n_rows), self.outlier_rows(table))
        return table.take(keep)


# --- transformation -------------------------------------------------------

class Center(Preprocessor):
    descriptor = ComponentDescriptor(
        id="Center", stage="transformation", summary="subtract the column mean"
    )

    def _fit(self, table, ctx):
        cont = _continuous_mask(table)
        mean = _nan_stat(np.nanmean, table.X) if table.n_rows else np.zeros(table.n_cols)
        self.shift_ = np.where(cont & ~np.isnan(mean), mean, 0.0)

    def _transform(self, table):
        _check_width(self.shift_.size, table, self.descriptor.id)
        return table.replace(X=table.X - self.shift_)


class Standardize(Preprocessor):
    """Zero mean and unit sample standard deviation for continuous columns."""

    descriptor = ComponentDescriptor(
        id="Standardize", stage="transformation", summary="zero mean, unit variance"
    )

    def _fit(self, table, ctx):
        cont = _continuous_mask(table)
        X = table.X
        if X.shape[0] >= 2:
            mean = _nan_stat(np.nanmean, X)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                std = np.nanstd(X, axis=0, ddof=1)
        else:
            mean = np.zeros(table.n_cols)
            std = np.ones(table.n_cols)
        self.shift_ = np.where(cont & np.isfinite(mean), mean, 0.0)
        self.scale_ = np.where(cont & np.isfinite(std) & (std > 0), std, 1.0)

    def _transform(self, table):
        _check_width(self.shift_.size, table, self.descriptor.id)
        return table.replace(X=(table.X - self.shift_) / self.scale_)


class Normalize(Preprocessor):
    """Min-max scale continuous columns into ``[lo, hi]``."""

    descriptor = ComponentDescriptor(
        id="Normalize",
        stage="transformation",
        params=(
            ParamDescriptor("lo", "continuous", lo=-1.0, hi=0.0, default=0.0),
            ParamDescriptor("hi", "continuous", lo=0.5, hi=1.5, default=1.0),
        ),
        summary="min-max scaling to [lo, hi]",
    )

    def _fit(self, table, ctx):
        cont = _continuous_mask(table)
        if table.n_rows:
            mn, mx = _nan_stat(np.nanmin, table.X), _nan_stat(np.nanmax, table.X)
        else:
            mn = mx = np.zeros(table.n_cols)
        span = mx - mn
        ok = cont & np.isfinite(span) & (span > 0)
        self.min_ = np.where(ok, mn, 0.0)
        self.span_ = np.where(ok, span, 1.0)
        self.active_ = ok
        self.const_ = cont & ~ok

    def _transform(self, table):
        _check_width(self.min_.size, table, self.descriptor.id)
        lo, hi = self.params["lo"], self.params["hi"]
        X = table.X.copy()
        a = self.active_
        X[:, a] = (X[:, a] - self.min_[a]) / self.span_[a] * (hi - lo) + lo
        X[:, self.const_] = np.where(np.isnan(X[:, self.const_]), np.nan, lo)
        return table.replace(X=X)


# --- dimensionality reduction ---------------------------------------------

class RandomSubset(Preprocessor):
    descriptor = ComponentDescriptor(
        id="RandomSubset",
        stage="dim_reduction",
        params=(ParamDescriptor("fraction", "continuous", lo=0.05, hi=1.0, default=0.5),),
        stochastic=True,
        summary="keep a random subset of the attributes",
    )

    def _fit(self, table, ctx):
        d = table.n_cols
        keep = max(1, int(np.floor(self.params["fraction"] * d + 0.5)))
        self.width_ = d
        self.columns_ = np.sort(ctx.rng().choice(d, size=min(keep, d), replace=False))

    def _transform(self, table):
        _check_width(self.width_, table, self.descriptor.id)
        return table.replace(
            X=table.X[:, self.columns_],
            categorical=tuple(table.categorical[j] for j in self.columns_),
        )


class PCA(Preprocessor):
    """Project centred data onto the leading principal axes that together
    retain ``variance_kept`` of the total variance."""

    descriptor = ComponentDescriptor(
        id="PCA",
        stage="dim_reduction",
        params=(ParamDescriptor("variance_kept", "continuous", lo=0.5, hi=1.0, default=0.95),),
        summary="principal components retaining a variance fraction",
    )

    def _fit(self, table, ctx):
        require_complete(table, "PCA")
        if table.n_rows < 2:
            raise ComponentError("PCA needs at least two rows")
        X = table.X
        self.mean_ = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        var = s**2
        total = var.sum()
        if total <= 0:
            q = 1
        else:
            ratio = np.cumsum(var) / total
            q = int(np.searchsorted(ratio, self.params["variance_kept"] - 1e-12) + 1)
            q = min(q, vt.shape[0])
        self.components_ = vt[:q]
        self.explained_ = var[:q] / total if total > 0 else var[:q]

    def _transform(self, table):
        _check_width(self.mean_.size, table, self.descriptor.id)
        require_complete(table, "PCA")
        Z = (table.X - self.mean_) @ self.components_.T
        return table.replace(X=Z, categorical=(False,) * Z.shape[1])

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        """Map projected data back to centred input coordinates."""
        return Z @ self.components_


class CorrelationTopM(Preprocessor):
    """Keep the ``m`` attributes with the largest absolute correlation to a class indicator."""

    descriptor = ComponentDescriptor(
        id="CorrelationTopM",
        stage="dim_reduction",
        params=(ParamDescriptor("m", "integer", lo=1, hi=32, default=8),),
        summary="rank attributes by |correlation| with the class, keep the top m",
    )

    def _fit(self, table, ctx):
        if table.y is None:
            raise ComponentError("CorrelationTopM needs labels to fit")
        X = table.X
        Y = np.eye(table.n_classes)[table.y]
        scores = np.zeros(table.n_cols)
        for j in range(table.n_cols):
            ok = ~np.isnan(X[:, j])
            if ok.sum() < 2:
                continue
            x = X[ok, j] - X[ok, j].mean()
            sx = np.sqrt((x**2).sum())
            if sx == 0:
                continue
            yc = Y[ok] - Y[ok].mean(axis=0)
            sy = np.sqrt((yc**2).sum(axis=0))
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.abs(x @ yc) / (sx * sy)
            r = r[np.isfinite(r)]
            scores[j] = r.max() if r.size else 0.0
        m = min(self.params["m"], table.n_cols)
        order = np.argsort(-scores, kind="stable")
        self.width_ = table.n_cols
        self.scores_ = scores
        self.columns_ = np.sort(order[:m])

    def _transform(self, table):
        _check_width(self.width_, table, self.descriptor.id)
        return table.replace(
            X=table.X[:, self.columns_],
            categorical=tuple(table.categorical[j] for j in self.columns_),
        )


# --- sampling -------------------------------------------------------------

class Resample(Preprocessor):
    drops_rows = True
    descriptor = ComponentDescriptor(
        id="Resample",
        stage="sampling",
        params=(
            ParamDescriptor("fraction", "continuous", lo=0.1, hi=1.0, default=1.0),
            ParamDescriptor("replace", "categorical", values=(False, True), default=True),
        ),
        stochastic=True,
        summary="random subsample of the training rows (fit only)",
    )

    def _fit_output(self, table, ctx):
        n = table.n_rows
        if n == 0:
            return table
        size = max(1, int(np.floor(self.params["fraction"] * n + 0.5)))
        replace = self.params["replace"]
        rows = ctx.rng().choice(n, size=size if replace else min(size, n), replace=replace)
        return table.take(np.sort(rows))


class Periodic(Preprocessor):
    """Keep every ``interval``-th training row (interval counted in rows)."""

    drops_rows = True
    descriptor = ComponentDescriptor(
        id="Periodic",
        stage="sampling",
        params=(ParamDescriptor("interval", "integer", lo=1, hi=10, default=2),),
        summary="periodic sampling at a fixed row interval (fit only)",
    )

    def _fit_output(self, table, ctx):
        return table.take(np.arange(0, table.n_rows, self.params["interval"]))


PREPROCESSORS = (
    ReplaceConstant,
    IQRRemove,
    Center,
    Standardize,
    Normalize,
    RandomSubset,
    PCA,
    CorrelationTopM,
    Resample,
    Periodic,
)
