"""Multicomponent predictive systems as well-handled acyclic workflow Petri nets.

Places are data buffers holding at most one token; transitions are
components.  A transition fires when every input place holds a token
(AND-join), consumes them, and puts a token in every output place
(AND-split).  Subnet transitions hold a nested net; their ``label`` names
the meta-predictor wrapping it.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from mcps_forge import components as comp
from mcps_forge.components import (
    INSTANCES,
    INTERNAL,
    NONE_ID,
    PREDICTIONS,
    ComponentError,
    FitContext,
    Predictions,
)
from mcps_forge.components.base import BudgetExceeded, ResourceExceeded
from mcps_forge.components.meta import VOTE_COMBINER, combine_votes
from mcps_forge.components.predictors import Predictor
from mcps_forge.components.preprocessing import Preprocessor
from mcps_forge.data import Table

ATOMIC = "atomic"
SUBNET = "subnet"

CLAUSES = {
    1: "workflow net",
    2: "well-handled and acyclic",
    3: "interior places single input/output",
    4: "1-sound",
    5: "safe",
    6: "AND-join / AND-split",
    7: "source instances, sink predictions",
    8: "hierarchy",
}

MAX_MARKINGS = 20000


class NetError(ValueError):
    """Structural problem preventing execution or flattening."""


class FlattenError(NetError):
    pass


class SafenessError(RuntimeError):
    pass


class ExecutionError(RuntimeError):
    """A transition's component failed during execution."""

    def __init__(self, transition: str, cause: BaseException):
        super().__init__(f"transition {transition!r} failed: {cause}")
        self.transition = transition
        self.cause = cause


@dataclass(frozen=True)
class TransitionSpec:
    kind: str
    method: Any
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    stage: str | None = None
    label: str | None = None
    join: str = "and"
    split: str = "and"

    @property
    def method_id(self) -> str:
        return self.label if self.kind == SUBNET else self.method


def atomic(method: str, stage: str | None = None, **hyperparameters) -> TransitionSpec:
    if stage is None and method != NONE_ID:
        stage = comp.descriptor(method).stage
    return TransitionSpec(ATOMIC, method, dict(hyperparameters), stage)


def subnet(label: str, net: "McpsNet", **hyperparameters) -> TransitionSpec:
    return TransitionSpec(SUBNET, net, dict(hyperparameters), "meta_predictor", label)


@dataclass(frozen=True, eq=False)
class McpsNet:
    places: tuple[str, ...]
    transitions: Mapping[str, TransitionSpec]
    arcs: tuple[tuple[str, str], ...]
    source: str = "i"
    sink: str = "o"

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "arcs", tuple(tuple(a) for a in self.arcs))
        object.__setattr__(self, "transitions", dict(self.transitions))
        object.__setattr__(self, "_cache", {})

    def inputs(self, node: str) -> list[str]:
        return [a for a, b in self.arcs if b == node]

    def outputs(self, node: str) -> list[str]:
        return [b for a, b in self.arcs if a == node]

    def __eq__(self, other):
        return isinstance(other, McpsNet) and to_dict(self) == to_dict(other)

    def __hash__(self):
        return hash(to_json(self))


def chain(*specs: tuple[str, TransitionSpec] | TransitionSpec, source="i", sink="o") -> McpsNet:
    """Linear net source -> t1 -> p1 -> ... -> tn -> sink."""
    items = [s if isinstance(s, tuple) else (f"t{k + 1}", s) for k, s in enumerate(specs)]
    if not items:
        raise NetError("a net needs at least one transition")
    places = [source] + [f"p{k}" for k in range(1, len(items))] + [sink]
    arcs = []
    for k, (tid, _) in enumerate(items):
        arcs.append((places[k], tid))
        arcs.append((tid, places[k + 1]))
    return McpsNet(tuple(places), dict(items), tuple(arcs), source, sink)


def vote_net(base: TransitionSpec, inputs: int, rule: str = "majority") -> McpsNet:
    """Inner net of a Vote subnet: AND-split into ``inputs`` copies of the
    base predictor, AND-joined by the vote combiner."""
    places = ["i", "o"]
    transitions = {"split": atomic("Split", INTERNAL), "vote": atomic("VoteCombiner", INTERNAL, rule=rule)}
    arcs = [("i", "split"), ("vote", "o")]
    for j in range(inputs):
        a, b, tid = f"a{j}", f"b{j}", f"base_{j}"
        places += [a, b]
        transitions[tid] = base
        arcs += [("split", a), (a, tid), (tid, b), (b, "vote")]
    return McpsNet(tuple(places), transitions, tuple(arcs))


# --- validation -----------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    clause: int
    code: str
    node: str | None
    message: str

    def __str__(self):
        where = f" at {self.node!r}" if self.node else ""
        return f"clause {self.clause} ({CLAUSES[self.clause]}) {self.code}{where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    @property
    def clauses(self) -> set[int]:
        return {v.clause for v in self.violations}

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def __bool__(self):
        return self.valid

    def __str__(self):
        return "valid" if self.valid else "\n".join(map(str, self.violations))


def _descriptor_for(spec: TransitionSpec):
    if spec.kind == SUBNET:
        return None
    return comp.descriptor(spec.method, spec.stage)


def _io_kinds(spec: TransitionSpec) -> tuple[str, str]:
    if spec.kind == SUBNET:
        return INSTANCES, PREDICTIONS
    d = _descriptor_for(spec)
    return d.input_kind, d.output_kind


def _has_cycle(net: McpsNet) -> str | None:
    succ = {}
    for a, b in net.arcs:
        succ.setdefault(a, []).append(b)
    state = {}
    for start in sorted(set(net.places) | set(net.transitions)):
        if state.get(start):
            continue
        stack = [(start, iter(succ.get(start, ())))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                return nxt
            elif not state.get(nxt):
                state[nxt] = 1
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return None


def _reach(start: str, edges: dict) -> set[str]:
    seen, todo = {start}, [start]
    while todo:
        for nxt in edges.get(todo.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def _token_game(net: McpsNet) -> list[Violation]:
    """Explore all reachable markings; report 1-soundness and safeness failures."""
    places = list(net.places)
    index = {p: k for k, p in enumerate(places)}
    pre = {t: Counter(index[p] for p in net.inputs(t)) for t in net.transitions}
    post = {t: Counter(index[p] for p in net.outputs(t)) for t in net.transitions}
    order = sorted(net.transitions)
    m0 = [0] * len(places)
    m0[index[net.source]] = 1
    final = [0] * len(places)
    final[index[net.sink]] = 1
    final = tuple(final)

    out: list[Violation] = []
    unsafe, fired, seen = set(), set(), {tuple(m0)}
    queue = deque([tuple(m0)])
    improper = deadlock = None
    while queue:
        m = queue.popleft()
        for k, n in enumerate(m):
            if n > 1:
                unsafe.add(places[k])
        if m[index[net.sink]] and m != final and improper is None:
            improper = m
        enabled = [t for t in order if pre[t] and all(m[k] >= n for k, n in pre[t].items())]
        if not enabled and m != final and deadlock is None:
            deadlock = m
        for t in enabled:
            fired.add(t)
            nm = list(m)
            for k, n in pre[t].items():
                nm[k] -= n
            for k, n in post[t].items():
                nm[k] += n
            nm = tuple(nm)
            if nm not in seen:
                if len(seen) >= MAX_MARKINGS:
                    out.append(Violation(4, "soundness", None, "state space too large to establish 1-soundness"))
                    return out
                seen.add(nm)
                queue.append(nm)

    def describe(m):
        return ", ".join(f"{places[k]}:{n}" for k, n in enumerate(m) if n) or "empty"

    for p in sorted(unsafe):
        out.append(Violation(5, "safeness", p, "place can hold more than one token"))
    if final not in seen:
        out.append(Violation(4, "soundness", net.sink, "no execution ends with exactly one token at the sink"))
    if deadlock is not None:
        out.append(Violation(4, "soundness", None, f"execution gets stuck in marking [{describe(deadlock)}]"))
    if improper is not None:
        out.append(Violation(4, "soundness", net.sink, f"sink marked while other tokens remain [{describe(improper)}]"))
    for t in order:
        if t not in fired:
            out.append(Violation(4, "soundness", t, "transition can never fire"))
    return out


def validate(net: McpsNet, strict: bool = True) -> ValidationReport:
    """Check the eight MCPS conditions; violations name clause and node.

    With ``strict=False`` the sink may hold transformed instances instead
    of predictions (used when executing pure preprocessing nets).
    """
    key = ("validate", strict)
    cached = getattr(net, "_cache", {}).get(key)
    if cached is not None:
        return cached
    v: list[Violation] = []
    places, transitions = set(net.places), set(net.transitions)
    nodes = places | transitions

    # clause 1: workflow net
    structural_ok = True
    for p in sorted(places & transitions):
        v.append(Violation(1, "duplicate_id", p, "identifier used for both a place and a transition"))
        structural_ok = False
    if net.source not in places:
        v.append(Violation(1, "missing_source", net.source, "source is not a place of the net"))
        structural_ok = False
    if net.sink not in places:
        v.append(Violation(1, "missing_sink", net.sink, "sink is not a place of the net"))
        structural_ok = False
    for a, b in net.arcs:
        if a not in nodes or b not in nodes:
            v.append(Violation(1, "unknown_node", a if a not in nodes else b, f"arc {a}->{b} references an unknown node"))
            structural_ok = False
        elif (a in places) == (b in places):
            v.append(Violation(1, "bipartite", a, f"arc {a}->{b} does not connect a place and a transition"))
            structural_ok = False
    if not structural_ok:
        return ValidationReport(tuple(v))
    if net.inputs(net.source):
        v.append(Violation(1, "source_input", net.source, "source place has an incoming arc"))
    if net.outputs(net.sink):
        v.append(Violation(1, "sink_output", net.sink, "sink place has an outgoing arc"))
    fwd, bwd = {}, {}
    for a, b in net.arcs:
        fwd.setdefault(a, []).append(b)
        bwd.setdefault(b, []).append(a)
    from_source, to_sink = _reach(net.source, fwd), _reach(net.sink, bwd)
    for n in sorted(nodes):
        if n not in from_source or n not in to_sink:
            v.append(Violation(1, "disconnected", n, "node is not on a path from source to sink"))

    # clause 2: well-handled and acyclic
    for (a, b), count in sorted(Counter(net.arcs).items()):
        if count > 1:
            v.append(Violation(2, "multi_arc", a, f"{count} parallel arcs {a}->{b}"))
    cyc = _has_cycle(net)
    if cyc is not None:
        v.append(Violation(2, "acyclicity", cyc, "net contains a cycle"))

    # clause 3: interior places
    for p in sorted(places - {net.source, net.sink}):
        n_in, n_out = len(set(net.inputs(p))), len(set(net.outputs(p)))
        if n_in != 1:
            v.append(Violation(3, "interior place in-degree", p, f"{n_in} inputs"))
        if n_out != 1:
            v.append(Violation(3, "interior place out-degree", p, f"{n_out} outputs"))

    # clauses 4 and 5: token game over the reachable markings
    v.extend(_token_game(net))

    # clauses 6 and 7: firing semantics, arity and payload typing
    kinds: dict[str, str] = {}
    for tid in sorted(transitions):
        spec = net.transitions[tid]
        # parallel duplicate arcs are a clause 2 matter, count distinct neighbours here
        n_in, n_out = len(set(net.inputs(tid))), len(set(net.outputs(tid)))
        if n_in > 1 and spec.join != "and":
            v.append(Violation(6, "join", tid, f"{n_in} inputs but {spec.join}-join"))
        if n_out > 1 and spec.split != "and":
            v.append(Violation(6, "split", tid, f"{n_out} outputs but {spec.split}-split"))
        if spec.kind == ATOMIC:
            try:
                d = _descriptor_for(spec)
            except KeyError as exc:
                v.append(Violation(7, "unknown_component", tid, str(exc)))
                continue
            max_in, max_out = d.arity
            if (max_in != -1 and n_in > max_in) or (max_out != -1 and n_out > max_out):
                v.append(Violation(6, "arity", tid, f"{d.id} takes {d.arity}, wired {n_in}->{n_out}"))
        elif spec.kind == SUBNET:
            if n_in > 1 or n_out > 1:
                v.append(Violation(6, "arity", tid, f"subnet transitions are 1->1, wired {n_in}->{n_out}"))
        for p in net.outputs(tid):
            kinds[p] = _io_kinds(spec)[1] if spec.kind in (ATOMIC, SUBNET) else "?"
    kinds[net.source] = INSTANCES
    for tid in sorted(transitions):
        spec = net.transitions[tid]
        if spec.kind not in (ATOMIC, SUBNET):
            v.append(Violation(7, "unknown_kind", tid, f"transition kind {spec.kind!r}"))
            continue
        try:
            want = _io_kinds(spec)[0]
        except KeyError:
            continue
        for p in net.inputs(tid):
            if kinds.get(p, INSTANCES) != want:
                v.append(Violation(7, "typing", tid, f"expects {want} but place {p!r} holds {kinds.get(p)}"))
    if strict and kinds.get(net.sink) != PREDICTIONS:
        v.append(Violation(7, "sink_payload", net.sink, f"sink holds {kinds.get(net.sink)}, not predictions"))

    # clause 8: hierarchy, nested nets must be MCPSs themselves
    for tid in sorted(transitions):
        spec = net.transitions[tid]
        if spec.kind != SUBNET:
            continue
        if not isinstance(spec.method, McpsNet):
            v.append(Violation(8, "subnet", tid, "subnet transition does not hold a net"))
            continue
        inner = validate(spec.method, strict=True)
        if not inner.valid:
            detail = "; ".join(str(x) for x in inner.violations)
            v.append(Violation(8, "subnet", tid, f"nested net is not an MCPS: {detail}"))
        if not spec.label:
            v.append(Violation(8, "subnet", tid, "subnet transition has no meta-predictor label"))

    report = ValidationReport(tuple(v))
    net._cache[key] = report
    return report


# --- execution ------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    payload: Any
    provenance: str | None = None

    @property
    def kind(self) -> str:
        return PREDICTIONS if isinstance(self.payload, Predictions) else INSTANCES


@dataclass
class ExecutionState:
    marking: dict
    fired: set
    mode: str

    def put(self, place: str, token: Token) -> None:
        if self.marking.get(place) is not None:
            raise SafenessError(f"place {place!r} would hold two tokens")
        self.marking[place] = token


class FittedNet:
    """A nested net fitted as a base learner."""

    def __init__(self, net: McpsNet, state: dict, ctx: FitContext):
        self.net, self.state, self.ctx = net, state, ctx

    def predict_proba(self, table: Table) -> np.ndarray:
        out, _ = execute(self.net, Token(table.unlabelled()), "predict", self.state, self.ctx)
        return out.payload.proba


class NetLearner:
    """Adapts a nested net to the meta-predictor base-learner protocol."""

    def __init__(self, net: McpsNet):
        self.net = net
        self.supports_weights = all(
            comp.component_class(s.method).supports_weights
            for s in net.transitions.values()
            if s.kind == ATOMIC and s.stage == "predictor"
        )

    def fit(self, table: Table, ctx: FitContext) -> FittedNet:
        _, state = execute(self.net, Token(table), "fit", None, ctx)
        return FittedNet(self.net, state, ctx)


def _check_memory(ctx: FitContext, payload) -> None:
    if ctx.memory_limit and isinstance(payload, Table) and payload.X.nbytes > ctx.memory_limit:
        raise ResourceExceeded(f"token of {payload.X.nbytes} bytes exceeds the {ctx.memory_limit}-byte cap")


def _fire(tid: str, spec: TransitionSpec, payloads: list, mode: str, state: dict, ctx: FitContext):
    table = payloads[0] if payloads else None
    if spec.kind == SUBNET:
        if mode == "fit":
            if spec.label == "Vote":
                model = NetLearner(spec.method).fit(table, ctx)
            else:
                meta_cls = comp.component_class(spec.label)
                model = meta_cls(NetLearner(spec.method), **spec.hyperparameters).fit(table, ctx)
            state[tid] = model
            query = table.unlabelled()
            return Predictions(n_rows=table.n_rows, n_classes=table.n_classes, row_ids=table.row_ids,
                               compute=lambda: model.predict_proba(query))
        model = state[tid]
        return Predictions(model.predict_proba(table), n_rows=table.n_rows, n_classes=table.n_classes,
                           row_ids=table.row_ids)

    method = spec.method
    if method == NONE_ID or method == "Split":
        return table
    if method == VOTE_COMBINER.id:
        rule = spec.hyperparameters.get("rule", "majority")
        first = payloads[0]
        if mode == "fit":
            return Predictions(n_rows=first.n_rows, n_classes=first.n_classes, row_ids=first.row_ids,
                               compute=lambda: combine_votes([p.proba for p in payloads], rule, first.n_classes))
        return Predictions(combine_votes([p.proba for p in payloads], rule, first.n_classes),
                           n_rows=first.n_rows, n_classes=first.n_classes, row_ids=first.row_ids)
    cls = comp.component_class(method)
    if not isinstance(table, Table):
        raise ComponentError(f"{method} expects a data table")
    if issubclass(cls, Preprocessor):
        if mode == "fit":
            model = cls(**spec.hyperparameters)
            out = model.fit_transform(table, ctx)
            state[tid] = model
            return out
        return state[tid].transform(table)
    if issubclass(cls, Predictor):
        if mode == "fit":
            model = cls(**spec.hyperparameters).fit(table, ctx)
            state[tid] = model
            query = table.unlabelled()
            return Predictions(n_rows=table.n_rows, n_classes=table.n_classes, row_ids=table.row_ids,
                               compute=lambda: model.predict_proba(query))
        return Predictions(state[tid].predict_proba(table), n_rows=table.n_rows, n_classes=table.n_classes,
                           row_ids=table.row_ids)
    raise ComponentError(f"{method} cannot be used as an atomic transition")


def execute(net: McpsNet, token: Token, mode: str = "fit", fitted_state: dict | None = None,
            ctx: FitContext | None = None) -> tuple[Token, dict]:
    """Play the token game with real payloads.

    In ``fit`` mode every stateful transition learns from its input and
    the learned state is returned per transition id; ``predict`` mode
    replays the net with that state.  Among enabled transitions the
    lexicographically smallest id fires first.
    """
    if mode not in ("fit", "predict"):
        raise ValueError(f"unknown mode {mode!r}")
    report = validate(net, strict=False)
    if not report.valid:
        raise NetError(f"cannot execute an invalid net:\n{report}")
    if mode == "predict" and fitted_state is None:
        raise NetError("predict mode needs the fitted per-transition state")
    ctx = ctx or FitContext()
    if not isinstance(token, Token):
        token = Token(token)
    payload = token.payload
    if mode == "predict" and isinstance(payload, Table) and payload.y is not None:
        payload = payload.unlabelled()
    state = {} if mode == "fit" else fitted_state
    run = ExecutionState({p: None for p in net.places}, set(), mode)
    run.put(net.source, Token(payload, None))
    order = sorted(net.transitions)
    inputs = {t: net.inputs(t) for t in order}
    outputs = {t: net.outputs(t) for t in order}
    while True:
        enabled = [t for t in order if t not in run.fired and all(run.marking[p] is not None for p in inputs[t])]
        if not enabled:
            break
        tid = enabled[0]
        ctx.tick()
        payloads = [run.marking[p].payload for p in inputs[tid]]
        for p in inputs[tid]:
            run.marking[p] = None
        try:
            result = _fire(tid, net.transitions[tid], payloads, mode, state, ctx.child(tid))
        except (BudgetExceeded, ExecutionError, SafenessError):
            raise
        except Exception as exc:
            raise ExecutionError(tid, exc) from exc
        _check_memory(ctx, result)
        run.fired.add(tid)
        for p in outputs[tid]:
            run.put(p, Token(result, tid))
    leftover = [p for p, tok in run.marking.items() if tok is not None and p != net.sink]
    if run.marking[net.sink] is None or leftover:
        raise SafenessError(f"execution did not end 1-sound (left tokens in {leftover})")
    return run.marking[net.sink], state


# --- flattening -----------------------------------------------------------

def _linear_walk(net: McpsNet) -> list[str] | None:
    """Transition ids from source to sink if the net is a simple chain."""
    seq, place, seen = [], net.source, set()
    while place != net.sink:
        outs = net.outputs(place)
        if len(outs) != 1 or outs[0] in seen:
            return None
        tid = outs[0]
        if len(net.inputs(tid)) != 1 or len(net.outputs(tid)) != 1:
            return None
        seen.add(tid)
        seq.append(tid)
        place = net.outputs(tid)[0]
    return seq if len(seq) == len(net.transitions) else None


def _flatten_items(net: McpsNet) -> list[tuple[str, str]]:
    walk = _linear_walk(net)
    if walk is None:
        raise FlattenError("net has parallel paths; positional flattening is undefined")
    items = []
    for tid in walk:
        spec = net.transitions[tid]
        if spec.kind == SUBNET:
            items.extend(_subnet_head(spec.method))
            items.append(("meta_predictor", spec.label))
        else:
            items.append((spec.stage, spec.method))
    return items


def _subnet_head(inner: McpsNet) -> list[tuple[str, str]]:
    if _linear_walk(inner) is not None:
        return [item for item in _flatten_items(inner) if item[0] != INTERNAL]
    heads = []
    for tid in sorted(inner.transitions):
        spec = inner.transitions[tid]
        if spec.kind == ATOMIC and spec.stage == INTERNAL:
            continue
        item = (spec.stage, spec.method_id)
        if item not in heads:
            heads.append(item)
    if len(heads) != 1:
        raise FlattenError("nested net branches hold different methods")
    return heads


def flatten(net: McpsNet, slots: tuple[str, ...] | None = None) -> list[str]:
    """Method identifiers along a linear net, recursing into subnets.

    A subnet contributes its inner chain followed by its own label.  With
    ``slots`` the result is positional: one entry per stage, ``"none"``
    where the net has no transition for that stage.
    """
    items = _flatten_items(net)
    if slots is None:
        return [m for _, m in items]
    out = {}
    for stage, method in items:
        if stage not in slots:
            raise FlattenError(f"stage {stage!r} is not one of the slots {slots}")
        if stage in out:
            raise FlattenError(f"two transitions occupy stage {stage!r}")
        out[stage] = method
    return [out.get(s, NONE_ID) for s in slots]


# --- serialisation --------------------------------------------------------

def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def to_dict(net: McpsNet) -> dict:
    transitions = {}
    for tid in sorted(net.transitions):
        spec = net.transitions[tid]
        entry = {
            "kind": spec.kind,
            "stage": spec.stage,
            "hyperparameters": {k: _jsonable(spec.hyperparameters[k]) for k in sorted(spec.hyperparameters)},
        }
        if spec.kind == SUBNET:
            entry["label"] = spec.label
            entry["net"] = to_dict(spec.method)
        else:
            entry["method"] = spec.method
        if spec.join != "and":
            entry["join"] = spec.join
        if spec.split != "and":
            entry["split"] = spec.split
        transitions[tid] = entry
    return {
        "source": net.source,
        "sink": net.sink,
        "places": list(net.places),
        "transitions": transitions,
        "arcs": [list(a) for a in net.arcs],
    }


def from_dict(doc: dict) -> McpsNet:
    transitions = {}
    for tid, entry in doc["transitions"].items():
        common = dict(
            hyperparameters=dict(entry.get("hyperparameters", {})),
            stage=entry.get("stage"),
            join=entry.get("join", "and"),
            split=entry.get("split", "and"),
        )
        if entry["kind"] == SUBNET:
            transitions[tid] = TransitionSpec(SUBNET, from_dict(entry["net"]), label=entry.get("label"), **common)
        else:
            transitions[tid] = TransitionSpec(entry["kind"], entry["method"], **common)
    return McpsNet(tuple(doc["places"]), transitions, tuple(tuple(a) for a in doc["arcs"]),
                   doc.get("source", "i"), doc.get("sink", "o"))


def to_json(net: McpsNet) -> str:
    return json.dumps(to_dict(net), sort_keys=True, indent=2)


def from_json(text: str) -> McpsNet:
    return from_dict(json.loads(text))


def to_dot(net: McpsNet, name: str = "mcps") -> str:
    """Graphviz rendering: circles for places, boxes for transitions,
    subnets as dashed clusters."""
    lines = [f"digraph {json.dumps(name)} {{", "  rankdir=LR;"]
    counter = [0]

    def emit(n: McpsNet, prefix: str, indent: str):
        for p in n.places:
            lines.append(f'{indent}"{prefix}{p}" [shape=circle, label="{p}"];')
        for tid in sorted(n.transitions):
            spec = n.transitions[tid]
            node = f"{prefix}{tid}"
            if spec.kind == SUBNET:
                counter[0] += 1
                k = counter[0]
                params = ", ".join(f"{a}={b}" for a, b in sorted(spec.hyperparameters.items()))
                lines.append(f'{indent}subgraph "cluster_{k}" {{')
                lines.append(f'{indent}  label="{spec.label}({params})"; style=dashed;')
                lines.append(f'{indent}  "{node}" [shape=box, style=filled, fillcolor=gray80, label="{spec.label}"];')
                emit(spec.method, f"{node}/", indent + "  ")
                lines.append(f"{indent}}}")
            else:
                params = "\\n".join(f"{a}={b}" for a, b in sorted(spec.hyperparameters.items()))
                label = spec.method + (f"\\n{params}" if params else "")
                lines.append(f'{indent}"{node}" [shape=box, style=filled, fillcolor=black, fontcolor=white, label="{label}"];')
        for a, b in n.arcs:
            lines.append(f'{indent}"{prefix}{a}" -> "{prefix}{b}";')

    emit(net, "", "  ")
    lines.append("}")
    return "\n".join(lines) + "\n"
