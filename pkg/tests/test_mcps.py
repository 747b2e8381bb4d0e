import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import nets
from oracles import has_cycle
from mcps_forge.components import FitContext
from mcps_forge.mcps import (
    ExecutionError,
    ExecutionState,
    FlattenError,
    McpsNet,
    NetError,
    SafenessError,
    Token,
    atomic,
    chain,
    execute,
    flatten,
    from_json,
    subnet,
    to_dot,
    to_json,
    validate,
    vote_net,
)


@pytest.mark.parametrize("clause,name,factory,expected", nets.CLAUSE_SUITE, ids=[c[1] for c in nets.CLAUSE_SUITE])
def test_clause_suite(clause, name, factory, expected):
    report = validate(factory())
    assert report.clauses == expected
    assert report.valid == (not expected)
    if expected:
        assert clause in report.clauses
        assert all(v.message for v in report.violations)


def test_back_arc_is_reported_as_acyclicity():
    report = validate(nets.back_arc_cycle())
    assert "acyclicity" in report.codes()
    assert 2 in report.clauses


def test_interior_out_degree_code_and_node():
    report = validate(nets.interior_two_outputs())
    (v,) = report.violations
    assert v.code == "interior place out-degree" and v.node == "p1"


def test_violation_names_offending_node():
    report = validate(nets.or_join())
    assert [v.node for v in report.violations] == ["vote"]


PREPROCESSORS = ["ReplaceConstant", "IQRRemove", "Standardize", "Center", "PCA", "Periodic"]
PREDICTORS = ["KNN", "ZeroR", "Tree", "NaiveBayes"]


def _mutate(base: McpsNet, kind: str) -> McpsNet:
    tr, arcs, places = dict(base.transitions), list(base.arcs), list(base.places)
    if kind == "bipartite":
        arcs.append((base.source, base.sink))
    elif kind == "multi_arc":
        arcs.append(arcs[0])
    elif kind == "out_degree":
        before = [a for a, b in arcs if b == sorted(tr)[-1]][0]
        tr["tz"] = atomic("ZeroR")
        arcs += [(before, "tz"), ("tz", base.sink)]
    elif kind == "sink_payload":
        last = sorted(tr)[-1]
        if len(tr) == 1:
            tr[last] = atomic("Center")
        else:
            before = [a for a, b in arcs if b == last][0]
            del tr[last]
            arcs = [(a, b) for a, b in arcs if last not in (a, b)]
            arcs = [(a, base.sink if b == before else b) for a, b in arcs]
            places.remove(before)
    elif kind == "subnet":
        last = sorted(tr)[-1]
        tr[last] = subnet("Bagging", chain(atomic("Center")), n=2)
    return McpsNet(tuple(places), tr, tuple(arcs))


EXPECTED = {"bipartite": {1}, "multi_arc": {2, 4}, "out_degree": {3}, "sink_payload": {7}, "subnet": {8}}


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from(PREPROCESSORS), min_size=1, max_size=4), st.sampled_from(PREDICTORS),
       st.sampled_from(sorted(EXPECTED)))
def test_single_fault_isolation(pre, pred, kind):
    base = chain(*[atomic(p) for p in pre], atomic(pred))
    assert validate(base).valid
    mutated = _mutate(base, kind)
    assert len(mutated.places) + len(mutated.transitions) <= 12
    assert validate(mutated).clauses == EXPECTED[kind]


@settings(max_examples=60, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 2), st.booleans()), max_size=10))
def test_acyclicity_matches_path_enumeration(edges):
    places = ["i", "p1", "p2", "p3", "o"]
    trans = ["t1", "t2", "t3"]
    arcs = []
    for p, t, forward in sorted(edges):
        arcs.append((places[p], trans[t]) if forward else (trans[t], places[p]))
    net = McpsNet(tuple(places), {t: atomic("Split", "internal") for t in trans}, tuple(arcs))
    report = validate(net)
    assert ("acyclicity" in report.codes()) == has_cycle(places + trans, arcs)


def test_structural_garbage_reports_clause_one():
    net = McpsNet(("i", "o"), {"t": atomic("KNN")}, (("i", "t"), ("t", "zz")))
    assert validate(net).codes() == {"unknown_node"}
    net = McpsNet(("i",), {"t": atomic("KNN")}, (("i", "t"),))
    assert "missing_sink" in validate(net).codes()


def test_unknown_component():
    net = chain(atomic("Wavelet", "transformation"), atomic("KNN"))
    assert "unknown_component" in validate(net).codes()


# --- execution ------------------------------------------------------------

def test_identity_net_passes_payload_through(blobs):
    net = chain(atomic("none", "outliers"))
    t = blobs.table()
    out, state = execute(net, Token(t), "fit")
    assert out.payload is t and state == {}


def test_fig3_net_predicts_every_row(blobs_missing):
    net = nets.fig3_shape()
    train = blobs_missing.table()
    out, state = execute(net, Token(train), "fit", ctx=FitContext(1))
    assert out.kind == "predictions"
    pred, _ = execute(net, Token(blobs_missing.table(labelled=False)), "predict", state, FitContext(1))
    assert pred.payload.proba.shape == (blobs_missing.n_rows, blobs_missing.n_classes)
    assert pred.provenance == "t6"


def test_missing_values_fail_at_predictor(blobs_missing):
    with pytest.raises(ExecutionError) as err:
        execute(nets.two_step(), Token(blobs_missing.table()), "fit")
    assert err.value.transition == "t2"
    assert "missing" in str(err.value)


@pytest.mark.parametrize("factory", [nets.split_join, nets.vote_subnet, nets.bagging_subnet, nets.bare_vote,
                                     nets.preprocessing_chain])
def test_execution_one_prediction_per_row(factory, blobs):
    net = factory()
    _, state = execute(net, Token(blobs.table()), "fit", ctx=FitContext(2))
    out, _ = execute(net, Token(blobs.table(labelled=False)), "predict", state, FitContext(2))
    assert len(out.payload) == blobs.n_rows
    assert out.payload.labels.shape == (blobs.n_rows,)


def test_execution_deterministic(blobs):
    net = nets.bagging_subnet()

    def once():
        _, s = execute(net, Token(blobs.table()), "fit", ctx=FitContext(9))
        return execute(net, Token(blobs.table(labelled=False)), "predict", s, FitContext(9))[0].payload.proba

    assert np.array_equal(once(), once())


def test_preprocessing_preserves_rows_in_predict(blobs):
    net = chain(atomic("Center"), atomic("Periodic", interval=3))
    fit_out, state = execute(net, Token(blobs.table()), "fit")
    assert fit_out.payload.n_rows == 30
    out, _ = execute(net, Token(blobs.table()), "predict", state)
    assert out.payload.n_rows == blobs.n_rows


def test_execute_refuses_invalid_net(blobs):
    with pytest.raises(NetError):
        execute(nets.interior_two_outputs(), Token(blobs.table()))
    with pytest.raises(NetError):
        execute(nets.single(), Token(blobs.table()), "predict")


def test_place_cannot_hold_two_tokens():
    run = ExecutionState({"p": None}, set(), "fit")
    run.put("p", Token(1))
    with pytest.raises(SafenessError):
        run.put("p", Token(2))


def test_lexicographic_firing_order(blobs):
    order = []

    def tick():
        order.append(len(order))

    execute(nets.split_join(), Token(blobs.table()), "fit", ctx=FitContext(0, check=tick))
    assert len(order) == 4


# --- flattening and serialisation -----------------------------------------

def test_flatten_examples():
    assert flatten(nets.two_step()) == ["Standardize", "KNN"]
    assert len(flatten(nets.fig3_shape())) == 7
    assert flatten(nets.fig3_shape())[-2:] == ["Logistic", "AdaBoostM1"]
    assert flatten(nets.vote_subnet()) == ["Center", "NaiveBayes", "Vote"]
    with pytest.raises(FlattenError):
        flatten(nets.split_join())


def test_flatten_positional():
    slots = ("missing_values", "outliers", "transformation", "dim_reduction", "sampling", "predictor",
             "meta_predictor")
    assert flatten(nets.two_step(), slots) == ["none", "none", "Standardize", "none", "none", "KNN", "none"]


def test_json_round_trip():
    for factory in (nets.fig3_shape, nets.vote_subnet, nets.split_join):
        net = factory()
        text = to_json(net)
        assert from_json(text) == net
        assert to_json(from_json(text)) == text


def test_dot_export():
    dot = to_dot(nets.fig3_shape())
    assert dot.startswith('digraph "mcps"')
    assert "cluster_1" in dot and "AdaBoostM1" in dot


def test_vote_net_shape():
    net = vote_net(atomic("KNN"), 5)
    assert len(net.transitions) == 7
    assert validate(net).valid
