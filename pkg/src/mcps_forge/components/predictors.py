"""Base classifiers.

Every predictor rejects missing cells; ``predict`` is the argmax of
``predict_proba`` with ties resolved towards the lowest class index.
"""

from __future__ import annotations

from typing import ClassVar

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from mcps_forge.components.base import (
    ComponentDescriptor,
    ComponentError,
    FitContext,
    INSTANCES,
    ParamDescriptor,
    PREDICTIONS,
    require_complete,
    require_labels,
)
from mcps_forge.data import Table


def _predictor(id, params=(), stochastic=False, summary=""):
    return ComponentDescriptor(
        id=id,
        stage="predictor",
        params=tuple(params),
        input_kind=INSTANCES,
        output_kind=PREDICTIONS,
        stochastic=stochastic,
        summary=summary,
    )


def _normalise_rows(P: np.ndarray) -> np.ndarray:
    P = np.where(np.isfinite(P), P, 0.0)
    P = np.clip(P, 0.0, None)
    s = P.sum(axis=1, keepdims=True)
    uniform = np.full_like(P, 1.0 / P.shape[1]) if P.shape[1] else P
    return np.where(s > 0, P / np.where(s > 0, s, 1.0), uniform)


class Predictor:
    descriptor: ClassVar[ComponentDescriptor]
    supports_weights: ClassVar[bool] = True

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

    def fit(self, table: Table, ctx: FitContext | None = None) -> "Predictor":
        who = self.descriptor.id
        require_labels(table, who)
        require_complete(table, who)
        self.n_classes_ = table.n_classes
        self.width_ = table.n_cols
        if table.weights is not None and self.supports_weights:
            w = np.asarray(table.weights, dtype=float)
            w = w / w.sum() if w.sum() > 0 else np.full(table.n_rows, 1.0 / table.n_rows)
        else:
            w = np.full(table.n_rows, 1.0 / table.n_rows)
        self._fit(table.X, np.asarray(table.y, dtype=int), w, table, ctx or FitContext())
        self.fitted = True
        return self

    def predict_proba(self, table: Table) -> np.ndarray:
        who = self.descriptor.id
        if not self.fitted:
            raise ComponentError(f"{who} applied before fit")
        if table.n_cols != self.width_:
            raise ComponentError(f"{who}: fitted on {self.width_} columns, got {table.n_cols}")
        require_complete(table, who)
        if table.n_rows == 0:
            return np.zeros((0, self.n_classes_))
        return _normalise_rows(self._proba(table.X, table))

    def predict(self, table: Table) -> np.ndarray:
        return np.argmax(self.predict_proba(table), axis=1)

    def _fit(self, X, y, w, table, ctx):
        raise NotImplementedError

    def _proba(self, X, table):
        raise NotImplementedError


class ZeroR(Predictor):
    descriptor = _predictor("ZeroR", summary="predict the (weighted) majority class")

    def _fit(self, X, y, w, table, ctx):
        self.prior_ = np.bincount(y, weights=w, minlength=self.n_classes_)

    def _proba(self, X, table):
        return np.tile(self.prior_, (X.shape[0], 1))


class OneR(Predictor):
    """One-attribute rule: bin each attribute, pick the one whose per-bin
    majority rule has the lowest training error."""

    descriptor = _predictor(
        "OneR",
        [ParamDescriptor("bins", "integer", lo=2, hi=20, default=6)],
        summary="single-attribute rule over equal-width bins",
    )

    def _bin(self, col: np.ndarray, j: int) -> np.ndarray:
        if self.categorical_[j]:
            return np.clip(col.astype(int), 0, self.n_bins_[j] - 1)
        lo, width = self.edges_[j]
        if width <= 0:
            return np.zeros(col.shape, dtype=int)
        return np.clip(((col - lo) / width).astype(int), 0, self.n_bins_[j] - 1)

    def _fit(self, X, y, w, table, ctx):
        k = self.n_classes_
        prior = np.bincount(y, weights=w, minlength=k)
        self.categorical_ = table.categorical
        self.edges_, self.n_bins_ = [], []
        best = (np.inf, 0, None)
        for j in range(X.shape[1]):
            col = X[:, j]
            if self.categorical_[j]:
                nb = int(col.max()) + 2 if col.size else 1
                self.edges_.append((0.0, 1.0))
            else:
                nb = self.params["bins"]
                lo, hi = (col.min(), col.max()) if col.size else (0.0, 0.0)
                self.edges_.append((lo, (hi - lo) / nb))
            self.n_bins_.append(nb)
            b = self._bin(col, j)
            counts = np.zeros((nb, k))
            np.add.at(counts, (b, y), w)
            empty = counts.sum(axis=1) == 0
            counts[empty] = prior
            err = w.sum() - counts[np.arange(nb), counts.argmax(axis=1)][~empty].sum()
            if err < best[0] - 1e-12:
                best = (err, j, counts)
        self.attribute_ = best[1]
        self.table_ = best[2] if best[2] is not None else prior[None, :]

    def _proba(self, X, table):
        j = self.attribute_
        if X.shape[1] == 0:
            return np.tile(self.table_[0], (X.shape[0], 1))
        return self.table_[self._bin(X[:, j], j)]


class Tree(Predictor):
    """CART classification tree (Gini impurity)."""

    descriptor = _predictor(
        "Tree",
        [
            ParamDescriptor("max_depth", "integer", lo=1, hi=12, default=6),
            ParamDescriptor("min_leaf", "integer", lo=1, hi=20, default=2),
        ],
        stochastic=True,
        summary="CART decision tree",
    )

    def _tree_args(self):
        return dict(max_depth=self.params["max_depth"], min_samples_leaf=self.params["min_leaf"])

    def _fit(self, X, y, w, table, ctx):
        self.model_ = DecisionTreeClassifier(random_state=ctx.seed % (2**31), **self._tree_args())
        self.model_.fit(X, y, sample_weight=w)

    def _proba(self, X, table):
        P = np.zeros((X.shape[0], self.n_classes_))
        P[:, self.model_.classes_] = self.model_.predict_proba(X)
        return P


class DecisionStump(Tree):
    descriptor = _predictor("DecisionStump", summary="one-level decision tree")

    def _tree_args(self):
        return dict(max_depth=1, min_samples_leaf=1)


class KNN(Predictor):
    """k-nearest neighbours under Euclidean distance.

    Neighbour ties are broken by training-row order; ``weighted`` votes
    with inverse distance.
    """

    supports_weights = False
    descriptor = _predictor(
        "KNN",
        [
            ParamDescriptor("k", "integer", lo=1, hi=30, default=5),
            ParamDescriptor("weighted", "categorical", values=(False, True), default=False),
        ],
        summary="k-nearest neighbours",
    )

    def _fit(self, X, y, w, table, ctx):
        self.X_ = np.array(X, dtype=float)
        self.y_ = y
        self.sq_ = (self.X_**2).sum(axis=1)

    def _proba(self, X, table):
        n = self.X_.shape[0]
        k = min(self.params["k"], n)
        P = np.zeros((X.shape[0], self.n_classes_))
        for start in range(0, X.shape[0], 512):
            Q = X[start:start + 512]
            if n * len(Q) * max(Q.shape[1], 1) <= 4_000_000:
                # direct differences: identical rows get an exact zero distance
                d2 = ((Q[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
            else:
                d2 = (Q**2).sum(axis=1)[:, None] + self.sq_[None, :] - 2.0 * Q @ self.X_.T
                d2 = np.maximum(d2, 0.0)
            idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
            rows = np.arange(len(Q))[:, None]
            votes = np.ones(idx.shape)
            if self.params["weighted"]:
                votes = 1.0 / (np.sqrt(d2[rows, idx]) + 1e-9)
            block = np.zeros((len(Q), self.n_classes_))
            np.add.at(block, (np.repeat(np.arange(len(Q)), k), self.y_[idx].ravel()), votes.ravel())
            P[start:start + 512] = block
        return P


class NaiveBayes(Predictor):
    """Gaussian likelihoods for continuous attributes, Laplace-smoothed
    frequencies for categorical ones."""

    descriptor = _predictor(
        "NaiveBayes",
        [ParamDescriptor("smoothing", "continuous", lo=1e-3, hi=1.0, default=0.1)],
        summary="naive Bayes",
    )

    def _fit(self, X, y, w, table, ctx):
        k, alpha = self.n_classes_, self.params["smoothing"]
        Y = np.eye(k)[y] * w[:, None]
        mass = Y.sum(axis=0)
        self.log_prior_ = np.log((mass + alpha / len(y)) / (mass.sum() + k * alpha / len(y)))
        cat = np.asarray(table.categorical, dtype=bool)
        self.cat_ = cat
        safe = np.where(mass > 0, mass, 1.0)
        mean = (Y.T @ X) / safe[:, None]
        var = (Y.T @ X**2) / safe[:, None] - mean**2
        overall = X.var(axis=0) if X.shape[0] else np.ones(X.shape[1])
        floor = alpha * 0.01 * np.where(overall > 0, overall, 1.0) + 1e-9
        self.mean_ = mean
        self.var_ = np.maximum(var, 0.0) + floor[None, :]
        self.cat_tables_ = {}
        for j in np.flatnonzero(cat):
            codes = X[:, j].astype(int)
            nv = int(codes.max()) + 2 if codes.size else 1
            counts = np.zeros((k, nv))
            np.add.at(counts, (y, codes), w)
            counts += alpha * w.mean()
            self.cat_tables_[j] = np.log(counts / counts.sum(axis=1, keepdims=True))

    def _proba(self, X, table):
        cont = ~self.cat_
        L = np.tile(self.log_prior_, (X.shape[0], 1))
        if cont.any():
            Xc = X[:, cont]
            m, v = self.mean_[:, cont], self.var_[:, cont]
            L += -0.5 * (
                np.log(2 * np.pi * v).sum(axis=1)[None, :]
                + (((Xc[:, None, :] - m[None, :, :]) ** 2) / v[None, :, :]).sum(axis=2)
            )
        for j, logp in self.cat_tables_.items():
            codes = np.clip(X[:, j].astype(int), 0, logp.shape[1] - 1)
            L += logp[:, codes].T
        L -= L.max(axis=1, keepdims=True)
        return np.exp(L)


class Logistic(Predictor):
    """Multinomial logistic regression trained by full-batch gradient descent
    from zero weights (deterministic)."""

    descriptor = _predictor(
        "Logistic",
        [
            ParamDescriptor("l2", "continuous", lo=1e-6, hi=10.0, log=True, default=1e-3),
            ParamDescriptor("epochs", "integer", lo=10, hi=200, default=100),
            ParamDescriptor("rate", "continuous", lo=1e-3, hi=1.0, log=True, default=0.1),
        ],
        summary="multinomial logistic regression",
    )

    @staticmethod
    def _softmax(Z):
        Z = Z - Z.max(axis=1, keepdims=True)
        E = np.exp(Z)
        return E / E.sum(axis=1, keepdims=True)

    def _fit(self, X, y, w, table, ctx):
        n, d = X.shape
        k = self.n_classes_
        Xb = np.hstack([X, np.ones((n, 1))])
        Y = np.eye(k)[y]
        W = np.zeros((d + 1, k))
        l2, rate = self.params["l2"], self.params["rate"]
        reg = np.ones((d + 1, 1))
        reg[-1] = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.params["epochs"]):
                if epoch % 25 == 0:
                    ctx.tick()
                P = self._softmax(Xb @ W)
                grad = Xb.T @ ((P - Y) * w[:, None]) + l2 * reg * W
                W = W - rate * grad
                if not np.all(np.isfinite(W)):
                    break
        self.W_ = W

    def _proba(self, X, table):
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        with np.errstate(over="ignore", invalid="ignore"):
            return self._softmax(Xb @ self.W_)


PREDICTORS = (ZeroR, OneR, DecisionStump, KNN, NaiveBayes, Logistic, Tree)
