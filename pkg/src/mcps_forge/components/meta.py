"""Meta-predictors wrapping a base learner.

A base learner is anything with ``fit(table, ctx)`` returning an object
with ``predict_proba(table)``; atomic predictors and nested nets both
qualify.  Member 0 of every ensemble is fitted with the caller's seed so
that a single full-data member reproduces the bare base learner.
"""

from __future__ import annotations

from typing import ClassVar, Protocol

import numpy as np

from mcps_forge.components.base import (
    ComponentDescriptor,
    ComponentError,
    FitContext,
    INSTANCES,
    INTERNAL,
    ParamDescriptor,
    PREDICTIONS,
    one_hot,
    require_labels,
)
from mcps_forge.data import Table

PREDICTOR_IDS = ("ZeroR", "OneR", "DecisionStump", "KNN", "NaiveBayes", "Logistic", "Tree")


class FittedLearner(Protocol):
    def predict_proba(self, table: Table) -> np.ndarray: ...


class BaseLearner(Protocol):
    supports_weights: bool

    def fit(self, table: Table, ctx: FitContext) -> FittedLearner: ...


class ComponentLearner:
    """Adapts a predictor class + parameters to the base-learner protocol."""

    def __init__(self, cls, params: dict | None = None):
        self.cls = cls
        self.params = dict(params or {})
        self.supports_weights = cls.supports_weights

    def fit(self, table, ctx):
        return self.cls(**self.params).fit(table, ctx)

    def __repr__(self):
        return f"ComponentLearner({self.cls.__name__}, {self.params})"


def _base_param():
    return ParamDescriptor("base", "complex", values=PREDICTOR_IDS, default="ZeroR")


def _meta(id, params, summary):
    return ComponentDescriptor(
        id=id,
        stage="meta_predictor",
        params=tuple(params) + (_base_param(),),
        input_kind=INSTANCES,
        output_kind=PREDICTIONS,
        stochastic=True,
        summary=summary,
    )


def _member_ctx(ctx: FitContext, m: int) -> FitContext:
    return ctx if m == 0 else ctx.child("member", m)


def combine_votes(probas, rule: str, n_classes: int) -> np.ndarray:
    """Merge per-member class probabilities by majority vote or averaging."""
    probas = [np.asarray(p, dtype=float) for p in probas]
    if not probas:
        raise ComponentError("vote needs at least one input")
    if rule == "average":
        return np.mean(probas, axis=0)
    if rule == "majority":
        votes = sum(one_hot(np.argmax(p, axis=1), n_classes) for p in probas)
        return votes / len(probas)
    raise ComponentError(f"unknown vote rule {rule!r}")


class MetaPredictor:
    descriptor: ClassVar[ComponentDescriptor]
    supports_weights: ClassVar[bool] = False

    def __init__(self, base: BaseLearner, **params):
        merged = self.descriptor.defaults()
        merged.update(params)
        for p in self.descriptor.simple_params:
            if not p.contains(merged[p.name]):
                raise ComponentError(f"{self.descriptor.id}: {p.name}={merged[p.name]!r} out of range")
        self.base = base
        self.params = merged
        self.fitted = False

    def fit(self, table: Table, ctx: FitContext | None = None) -> "MetaPredictor":
        require_labels(table, self.descriptor.id)
        self.n_classes_ = table.n_classes
        self._fit(table, ctx or FitContext())
        self.fitted = True
        return self

    def predict_proba(self, table: Table) -> np.ndarray:
        if not self.fitted:
            raise ComponentError(f"{self.descriptor.id} applied before fit")
        return self._proba(table)

    def predict(self, table: Table) -> np.ndarray:
        return np.argmax(self.predict_proba(table), axis=1)


class Bagging(MetaPredictor):
    """Average of ``n`` members, each trained on a random ``fraction`` of the
    rows drawn without replacement (rows kept in original order)."""

    descriptor = _meta(
        "Bagging",
        [
            ParamDescriptor("n", "integer", lo=1, hi=10, default=5),
            ParamDescriptor("fraction", "continuous", lo=0.1, hi=1.0, default=1.0),
        ],
        "bootstrap-aggregated ensemble of the base predictor",
    )

    def _fit(self, table, ctx):
        N = table.n_rows
        size = max(1, int(np.floor(self.params["fraction"] * N + 0.5)))
        rng = ctx.child("rows").rng()
        self.members_ = []
        for m in range(self.params["n"]):
            ctx.tick()
            if size >= N:
                sub = table
            else:
                sub = table.take(np.sort(rng.choice(N, size=size, replace=False)))
            self.members_.append(self.base.fit(sub, _member_ctx(ctx, m)))

    def _proba(self, table):
        return np.mean([m.predict_proba(table) for m in self.members_], axis=0)


class RandomSubspace(MetaPredictor):
    """Average of ``n`` members, each seeing a random ``fraction`` of the attributes."""

    descriptor = _meta(
        "RandomSubspace",
        [
            ParamDescriptor("n", "integer", lo=1, hi=10, default=5),
            ParamDescriptor("fraction", "continuous", lo=0.1, hi=1.0, default=0.5),
        ],
        "random subspace ensemble",
    )

    @staticmethod
    def _view(table, cols):
        if len(cols) == table.n_cols:
            return table
        return table.replace(X=table.X[:, cols], categorical=tuple(table.categorical[j] for j in cols))

    def _fit(self, table, ctx):
        d = table.n_cols
        size = min(d, max(1, int(np.floor(self.params["fraction"] * d + 0.5))))
        rng = ctx.child("columns").rng()
        self.members_ = []
        for m in range(self.params["n"]):
            ctx.tick()
            cols = np.arange(d) if size >= d else np.sort(rng.choice(d, size=size, replace=False))
            self.members_.append((cols, self.base.fit(self._view(table, cols), _member_ctx(ctx, m))))

    def _proba(self, table):
        return np.mean([f.predict_proba(self._view(table, cols)) for cols, f in self.members_], axis=0)


class AdaBoostM1(MetaPredictor):
    """AdaBoost.M1.

    Stops early when a round's weighted error is 0 or at least 0.5; such a
    round's model is kept only if it is the first one.
    """

    descriptor = _meta(
        "AdaBoostM1",
        [
            ParamDescriptor("rounds", "integer", lo=2, hi=10, default=10),
            ParamDescriptor("resample", "categorical", values=(False, True), default=False),
        ],
        "AdaBoost.M1 boosting",
    )

    def _fit(self, table, ctx):
        N = table.n_rows
        y = np.asarray(table.y)
        w = np.full(N, 1.0 / N)
        rng = ctx.child("resample").rng()
        plain = table.replace(weights=None)
        self.models_, self.alphas_, self.weight_sums_, self.errors_ = [], [], [], []
        use_resample = self.params["resample"] or not self.base.supports_weights
        for r in range(self.params["rounds"]):
            ctx.tick()
            if use_resample:
                rows = np.sort(rng.choice(N, size=N, replace=True, p=w))
                train = plain.take(rows)
            else:
                train = table.replace(weights=w.copy())
            model = self.base.fit(train, _member_ctx(ctx, r))
            miss = np.argmax(model.predict_proba(plain.unlabelled()), axis=1) != y
            err = float(w[miss].sum())
            self.errors_.append(err)
            if err >= 0.5 or err <= 0.0:
                if not self.models_:
                    self.models_.append(model)
                    self.alphas_.append(1.0)
                break
            self.models_.append(model)
            self.alphas_.append(float(np.log((1.0 - err) / err)))
            w = np.where(miss, w, w * err / (1.0 - err))
            w = w / w.sum()
            self.weight_sums_.append(float(w.sum()))

    def _proba(self, table):
        votes = np.zeros((table.n_rows, self.n_classes_))
        for a, m in zip(self.alphas_, self.models_):
            votes += a * one_hot(np.argmax(m.predict_proba(table), axis=1), self.n_classes_)
        return votes


class Vote(MetaPredictor):
    """``inputs`` copies of the base predictor, differing only by seed,
    merged by majority vote or probability averaging."""

    descriptor = _meta(
        "Vote",
        [
            ParamDescriptor("inputs", "integer", lo=1, hi=5, default=3),
            ParamDescriptor("rule", "categorical", values=("majority", "average"), default="majority"),
        ],
        "vote over 1-5 base predictor branches",
    )

    def _fit(self, table, ctx):
        self.members_ = []
        for m in range(self.params["inputs"]):
            ctx.tick()
            self.members_.append(self.base.fit(table, _member_ctx(ctx, m)))

    def _proba(self, table):
        return combine_votes([m.predict_proba(table) for m in self.members_], self.params["rule"], self.n_classes_)


META_PREDICTORS = (Bagging, AdaBoostM1, RandomSubspace, Vote)


# --- structural transitions used inside Vote subnets ----------------------

SPLIT = ComponentDescriptor(
    id="Split",
    stage=INTERNAL,
    arity=(1, -1),
    input_kind=INSTANCES,
    output_kind=INSTANCES,
    summary="AND-split: copy the incoming data token to every output place",
)

VOTE_COMBINER = ComponentDescriptor(
    id="VoteCombiner",
    stage=INTERNAL,
    params=(ParamDescriptor("rule", "categorical", values=("majority", "average"), default="majority"),),
    arity=(-1, 1),
    input_kind=PREDICTIONS,
    output_kind=PREDICTIONS,
    summary="AND-join: merge the prediction tokens of all inputs",
)
