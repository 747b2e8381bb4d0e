"""Component library: the atomic transitions an MCPS is built from."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from mcps_forge.components.base import (
    INSTANCES,
    INTERNAL,
    NONE_ID,
    PREDICTIONS,
    PREPROCESSING_STAGES,
    STAGES,
    ComponentDescriptor,
    ComponentError,
    FitContext,
    ParamDescriptor,
    Predictions,
    derive_seed,
)
from mcps_forge.components.meta import (
    META_PREDICTORS,
    PREDICTOR_IDS,
    SPLIT,
    VOTE_COMBINER,
    ComponentLearner,
    MetaPredictor,
    combine_votes,
)
from mcps_forge.components.predictors import PREDICTORS, Predictor
from mcps_forge.components.preprocessing import PREPROCESSORS, Preprocessor
from mcps_forge.data import Table

_CLASSES = {cls.descriptor.id: cls for cls in PREPROCESSORS + PREDICTORS + META_PREDICTORS}
_NONE = {
    stage: ComponentDescriptor(id=NONE_ID, stage=stage, summary="no operation at this stage")
    for stage in STAGES
    if stage != "predictor"
}


def registry() -> list[ComponentDescriptor]:
    """All selectable components, grouped by stage in pipeline order.

    Each stage except ``predictor`` starts with its ``none`` choice.
    """
    out = []
    for stage in STAGES:
        if stage in _NONE:
            out.append(_NONE[stage])
        out.extend(cls.descriptor for cls in _CLASSES.values() if cls.descriptor.stage == stage)
    return out


def stage_choices(stage: str) -> tuple[str, ...]:
    return tuple(d.id for d in registry() if d.stage == stage)


def descriptor(component_id: str, stage: str | None = None) -> ComponentDescriptor:
    if component_id == NONE_ID:
        if stage is None or stage not in _NONE:
            raise KeyError("the 'none' choice needs a non-predictor stage")
        return _NONE[stage]
    if component_id == SPLIT.id:
        return SPLIT
    if component_id == VOTE_COMBINER.id:
        return VOTE_COMBINER
    try:
        return _CLASSES[component_id].descriptor
    except KeyError:
        raise KeyError(f"unknown component {component_id!r}") from None


def component_class(component_id: str):
    try:
        return _CLASSES[component_id]
    except KeyError:
        raise KeyError(f"unknown component {component_id!r}") from None


def make_learner(component_id: str, params: dict | None = None) -> ComponentLearner:
    cls = component_class(component_id)
    if not issubclass(cls, Predictor):
        raise ComponentError(f"{component_id} is not a base predictor")
    return ComponentLearner(cls, params)


@dataclass
class FittedComponent:
    component_id: str
    stage: str
    model: Any
    fit_output: Table | None = None


def _as_descriptor(c) -> ComponentDescriptor:
    return c if isinstance(c, ComponentDescriptor) else descriptor(c)


def fit(c, params: dict | None, data: Table, seed: int = 0) -> FittedComponent:
    """Fit one component.

    Meta-predictors take their base predictor through ``params["base"]``,
    either an id or ``{"id": ..., "params": {...}}``.
    """
    desc = _as_descriptor(c)
    params = dict(params or {})
    ctx = FitContext(seed)
    if desc.id == NONE_ID:
        return FittedComponent(NONE_ID, desc.stage, None, data)
    cls = component_class(desc.id)
    if issubclass(cls, Preprocessor):
        model = cls(**params)
        out = model.fit_transform(data, ctx)
        return FittedComponent(desc.id, desc.stage, model, out)
    if issubclass(cls, MetaPredictor):
        base = params.pop("base", None)
        if base is None:
            raise ComponentError(f"{desc.id} needs a base predictor")
        if isinstance(base, str):
            base = {"id": base, "params": {}}
        learner = make_learner(base["id"], base.get("params"))
        return FittedComponent(desc.id, desc.stage, cls(learner, **params).fit(data, ctx))
    return FittedComponent(desc.id, desc.stage, cls(**params).fit(data, ctx))


def apply(f: FittedComponent, data: Table):
    """Apply a fitted component in predict mode: tables in, tables or labels out."""
    if f.component_id == NONE_ID:
        return data
    if isinstance(f.model, Preprocessor):
        return f.model.transform(data)
    return np.argmax(f.model.predict_proba(data), axis=1)


def catalogue() -> list[dict]:
    return [d.as_dict() for d in registry()]


def catalogue_json() -> str:
    return json.dumps(catalogue(), indent=2, sort_keys=True)


__all__ = [
    "INSTANCES",
    "INTERNAL",
    "NONE_ID",
    "PREDICTIONS",
    "PREDICTOR_IDS",
    "PREPROCESSING_STAGES",
    "SPLIT",
    "STAGES",
    "VOTE_COMBINER",
    "ComponentDescriptor",
    "ComponentError",
    "ComponentLearner",
    "FitContext",
    "FittedComponent",
    "MetaPredictor",
    "ParamDescriptor",
    "Predictions",
    "Predictor",
    "Preprocessor",
    "apply",
    "catalogue",
    "catalogue_json",
    "combine_votes",
    "component_class",
    "derive_seed",
    "descriptor",
    "fit",
    "make_learner",
    "registry",
    "stage_choices",
]
