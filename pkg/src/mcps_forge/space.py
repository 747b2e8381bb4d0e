"""Conditional search spaces over MCPS configurations.

A space is an ordered list of slots.  Each slot is a categorical choice
among options; each option activates its own hyperparameters under the
path ``slot.option.param``.  Meta-predictor options take their base
predictor from the ``predictor`` slot, so the complex ``base`` parameter
is bound rather than expanded a second time.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from mcps_forge import components as comp
from mcps_forge import mcps
from mcps_forge.components import NONE_ID, PREPROCESSING_STAGES, STAGES, ParamDescriptor

INACTIVE = -1.0
NEIGHBOR_STEP = 0.2


@dataclass(frozen=True)
class Option:
    id: str
    params: tuple[ParamDescriptor, ...] = ()


@dataclass(frozen=True)
class Slot:
    name: str
    options: tuple[Option, ...]

    @property
    def choices(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.options)


@dataclass(frozen=True)
class Hyperparameter:
    """One node of the activation tree, flattened.

    ``parent`` is the path of the slot whose choice activates this node
    and ``condition`` the option index it requires; slot roots have no
    parent.
    """

    path: str
    descriptor: ParamDescriptor
    parent: str | None = None
    condition: int | None = None

    @property
    def is_categorical(self) -> bool:
        return not self.descriptor.is_numeric

    @property
    def values(self) -> tuple:
        return self.descriptor.values

    @property
    def arity(self) -> int:
        return len(self.descriptor.values)


class Configuration(Mapping):
    """One assignment of the active hyperparameters of a space."""

    def __init__(self, assignments: Mapping[str, Any], space: str, origin: str = ""):
        self._items = tuple(sorted(dict(assignments).items()))
        self._map = dict(self._items)
        self.space = space
        self.origin = origin

    def __getitem__(self, key):
        return self._map[key]

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other):
        if isinstance(other, Configuration):
            return self.space == other.space and self._items == other._items
        return NotImplemented

    def __hash__(self):
        return hash((self.space, self._items))

    def __repr__(self):
        body = ", ".join(f"{k}={v!r}" for k, v in self._items)
        return f"Configuration[{self.space}]({body})"

    def to_dict(self) -> dict:
        return dict(self._items)

    def key(self) -> str:
        return json.dumps(self._items, separators=(",", ":"))

    def with_origin(self, origin: str) -> "Configuration":
        return Configuration(self._map, self.space, origin)


def _slot_descriptor(slot: Slot) -> ParamDescriptor:
    return ParamDescriptor(slot.name, "categorical", values=slot.choices, default=slot.choices[0])


@dataclass(frozen=True, eq=False)
class SearchSpace:
    name: str
    slots: tuple[Slot, ...]
    components: bool = False
    hyperparameters: tuple[Hyperparameter, ...] = field(init=False)

    def __post_init__(self):
        hps = []
        for slot in self.slots:
            hps.append(Hyperparameter(slot.name, _slot_descriptor(slot)))
            for k, opt in enumerate(slot.options):
                for p in opt.params:
                    if p.kind == "complex":
                        continue
                    hps.append(Hyperparameter(f"{slot.name}.{opt.id}.{p.name}", p, slot.name, k))
        paths = [h.path for h in hps]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate hyperparameter path")
        object.__setattr__(self, "hyperparameters", tuple(hps))
        object.__setattr__(self, "_index", {h.path: j for j, h in enumerate(hps)})

    # --- structure ------------------------------------------------------

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(h.path for h in self.hyperparameters)

    def hyperparameter(self, path: str) -> Hyperparameter:
        return self.hyperparameters[self._index[path]]

    def slot(self, name: str) -> Slot:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    def activation_chain(self, path: str) -> list[tuple[str, str]]:
        """(slot, choice) pairs that must hold for ``path`` to be active."""
        h = self.hyperparameter(path)
        if h.parent is None:
            return []
        parent = self.hyperparameter(h.parent)
        return self.activation_chain(h.parent) + [(h.parent, parent.values[h.condition])]

    def active_paths(self, assignments: Mapping[str, Any]) -> list[str]:
        out = []
        for h in self.hyperparameters:
            if h.parent is None:
                out.append(h.path)
            elif h.parent in assignments and assignments[h.parent] == self.hyperparameter(h.parent).values[h.condition]:
                out.append(h.path)
        return out

    # --- validity -------------------------------------------------------

    def problems(self, cfg: Mapping[str, Any]) -> list[str]:
        out = []
        active = set(self.active_paths(cfg))
        for key in cfg:
            if key not in self._index:
                out.append(f"unknown parameter {key!r}")
            elif key not in active:
                out.append(f"inactive parameter {key!r} is assigned")
        for path in sorted(active):
            if path not in cfg:
                out.append(f"active parameter {path!r} is unassigned")
            elif not self.hyperparameter(path).descriptor.contains(cfg[path]):
                out.append(f"{path}={cfg[path]!r} is out of range")
        return out

    def is_valid(self, cfg: Mapping[str, Any]) -> bool:
        return not self.problems(cfg)

    def complete(self, partial: Mapping[str, Any], origin: str = "") -> Configuration:
        """Fill unassigned active parameters with defaults and drop inactive ones."""
        values = {}
        for h in self.hyperparameters:
            if h.parent is not None and values.get(h.parent) != self.hyperparameter(h.parent).values[h.condition]:
                continue
            values[h.path] = partial.get(h.path, h.descriptor.default)
        return Configuration(values, self.name, origin)

    def default(self) -> Configuration:
        return self.complete({}, "default")

    # --- vector codec ---------------------------------------------------

    def encode_vector(self, cfg: Mapping[str, Any]) -> np.ndarray:
        """Categoricals as value index, numerics on the unit scale, inactive as -1."""
        v = np.full(len(self.hyperparameters), INACTIVE)
        for j, h in enumerate(self.hyperparameters):
            if h.path not in cfg:
                continue
            value = cfg[h.path]
            if h.is_categorical:
                v[j] = next(k for k, x in enumerate(h.values) if x == value and type(x) is type(value))
            else:
                v[j] = h.descriptor.to_unit(value)
        return v

    def decode(self, vector, origin: str = "") -> Configuration:
        values = {}
        for j, h in enumerate(self.hyperparameters):
            if h.parent is not None:
                parent = self.hyperparameter(h.parent)
                if values.get(h.parent, _MISSING) != parent.values[h.condition]:
                    continue
            u = float(vector[j])
            if h.is_categorical:
                values[h.path] = h.values[int(round(u))]
            else:
                values[h.path] = h.descriptor.from_unit(u)
        return Configuration(values, self.name, origin)

    def activity_mask(self, choices: np.ndarray) -> np.ndarray:
        """Which hyperparameters are active, row-wise, given categorical indices."""
        active = np.zeros_like(choices, dtype=bool)
        for j, h in enumerate(self.hyperparameters):
            if h.parent is None:
                active[:, j] = True
            else:
                p = self._index[h.parent]
                active[:, j] = active[:, p] & (choices[:, p] == h.condition)
        return active

    def sample_vectors(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` encoded random configurations (prior sampling, vectorised)."""
        out = np.empty((n, len(self.hyperparameters)))
        for j, h in enumerate(self.hyperparameters):
            d = h.descriptor
            if h.is_categorical:
                out[:, j] = rng.integers(0, h.arity, size=n)
            elif d.kind == "integer":
                draws = rng.integers(int(d.lo), int(d.hi) + 1, size=n)
                if d.log:
                    out[:, j] = (np.log(draws) - np.log(d.lo)) / (np.log(d.hi) - np.log(d.lo))
                else:
                    out[:, j] = (draws - d.lo) / (d.hi - d.lo)
            else:
                out[:, j] = rng.random(n)
        active = self.activity_mask(out)
        out[~active] = INACTIVE
        return out

    def sample(self, rng) -> Configuration:
        """Uniform prior sample; ``rng`` may be a seed or a Generator."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return self.decode(self.sample_vectors(rng, 1)[0], "random")

    # --- local moves ----------------------------------------------------

    def neighbors(self, cfg: Configuration, rng) -> list[Configuration]:
        """One-change neighbours: every alternative value of each active
        categorical, and one Gaussian step per active numeric."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        out = []
        base = cfg.to_dict()
        for path in self.active_paths(base):
            h = self.hyperparameter(path)
            d = h.descriptor
            if h.is_categorical:
                for value in h.values:
                    if value == base[path] and type(value) is type(base[path]):
                        continue
                    changed = dict(base)
                    changed[path] = value
                    out.append(self.complete(changed, "neighbor"))
            else:
                u = d.to_unit(base[path])
                new = base[path]
                for _ in range(8):
                    new = d.from_unit(float(np.clip(u + rng.normal(0.0, NEIGHBOR_STEP), 0.0, 1.0)))
                    if new != base[path]:
                        break
                if new == base[path] and d.kind == "integer":
                    new = base[path] + 1 if base[path] < d.hi else base[path] - 1
                changed = dict(base)
                changed[path] = new
                out.append(Configuration(changed, self.name, "neighbor"))
        return out

    # --- nets -----------------------------------------------------------

    def slot_methods(self, cfg: Mapping[str, Any]) -> list[str]:
        return [cfg[s] for s in self.slot_names]

    def params_of(self, cfg: Mapping[str, Any], slot: str) -> dict:
        prefix = f"{slot}.{cfg[slot]}."
        return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}

    def instantiate(self, cfg: Mapping[str, Any]) -> mcps.McpsNet:
        """Linear net in slot order; a meta-predictor becomes a subnet
        transition wrapping the predictor."""
        if not self.components:
            raise TypeError(f"space {self.name!r} is not built from components")
        problems = self.problems(cfg)
        if problems:
            raise ValueError("invalid configuration: " + "; ".join(problems))
        items = []
        for slot in self.slot_names:
            if slot in ("predictor", "meta_predictor") or cfg[slot] == NONE_ID:
                continue
            tid = f"t{STAGES.index(slot) + 1}_{slot}"
            items.append((tid, mcps.atomic(cfg[slot], slot, **self.params_of(cfg, slot))))
        predictor = mcps.atomic(cfg["predictor"], "predictor", **self.params_of(cfg, "predictor"))
        meta = cfg.get("meta_predictor", NONE_ID)
        if meta == NONE_ID:
            items.append(("t6_predictor", predictor))
        else:
            meta_params = self.params_of(cfg, "meta_predictor")
            if meta == "Vote":
                inner = mcps.vote_net(predictor, meta_params["inputs"], meta_params["rule"])
            else:
                inner = mcps.chain(("t1_predictor", predictor))
            items.append(("t7_meta_predictor", mcps.subnet(meta, inner, **meta_params)))
        return mcps.chain(*items)

    def encode(self, net: mcps.McpsNet) -> Configuration:
        """Inverse of :meth:`instantiate` for nets of this space's shape."""
        walk = mcps._linear_walk(net)
        if walk is None:
            raise mcps.FlattenError("only linear nets map onto slot configurations")
        values = {s: NONE_ID for s in self.slot_names if s != "predictor"}

        def put(stage, spec):
            if stage not in self.slot_names:
                raise ValueError(f"stage {stage!r} is not a slot of space {self.name!r}")
            values[stage] = spec.method_id
            for k, v in spec.hyperparameters.items():
                values[f"{stage}.{spec.method_id}.{k}"] = v

        for tid in walk:
            spec = net.transitions[tid]
            if spec.kind == mcps.SUBNET:
                put("meta_predictor", spec)
                inner = spec.method
                base_ids = [t for t in sorted(inner.transitions) if inner.transitions[t].stage == "predictor"]
                if not base_ids:
                    raise ValueError("subnet holds no predictor")
                put("predictor", inner.transitions[base_ids[0]])
            else:
                put(spec.stage, spec)
        cfg = Configuration(values, self.name, "encoded")
        problems = self.problems(cfg)
        if problems:
            raise ValueError("net does not belong to this space: " + "; ".join(problems))
        return cfg


_MISSING = object()


def _component_slot(stage: str) -> Slot:
    options = []
    for d in comp.registry():
        if d.stage == stage:
            options.append(Option(d.id, d.simple_params))
    return Slot(stage, tuple(options))


def build_space(name: str) -> SearchSpace:
    """``NEW`` (predictor, meta-predictor) or ``FULL`` (five preprocessing
    slots, predictor, meta-predictor) over the component registry."""
    key = name.upper()
    if key == "NEW":
        stages = ("predictor", "meta_predictor")
    elif key == "FULL":
        stages = PREPROCESSING_STAGES + ("predictor", "meta_predictor")
    else:
        raise ValueError(f"unknown search space {name!r}")
    return SearchSpace(key, tuple(_component_slot(s) for s in stages), components=True)


def toy_space(name: str, slots: Mapping[str, Mapping[str, list[ParamDescriptor]]]) -> SearchSpace:
    """Free-standing space for tests and synthetic objectives."""
    built = tuple(
        Slot(slot, tuple(Option(opt, tuple(params)) for opt, params in options.items()))
        for slot, options in slots.items()
    )
    return SearchSpace(name, built)


WEIGHTS = {
    "NEW": (2.0, 1.5),
    "FULL": (1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.5),
}
