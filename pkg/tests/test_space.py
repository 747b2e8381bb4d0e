import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcps_forge.components import STAGES, ParamDescriptor, stage_choices
from mcps_forge.mcps import flatten, validate
from mcps_forge.space import INACTIVE, WEIGHTS, Configuration, build_space, toy_space

FULL = build_space("FULL")
NEW = build_space("NEW")


def test_full_slots_in_pipeline_order():
    assert FULL.slot_names == STAGES
    assert len(FULL.slot_names) == 7


def test_new_slots():
    assert NEW.slot_names == ("predictor", "meta_predictor")
    predictor_paths = [p for p in NEW.paths if p == "predictor" or p.startswith("predictor.")]
    assert len(NEW.paths) > len(predictor_paths)


def test_each_non_predictor_slot_offers_none():
    for slot in FULL.slots:
        assert set(slot.choices) == set(stage_choices(slot.name))
        assert ("none" in slot.choices) == (slot.name != "predictor")


def test_no_meta_inside_meta():
    metas = set(stage_choices("meta_predictor"))
    for path in FULL.paths:
        parts = path.split(".")
        assert sum(p in metas for p in parts) <= 1


def test_activation_paths_are_unique_chains():
    for space in (NEW, FULL):
        assert len(set(space.paths)) == len(space.paths)
        for path in space.paths:
            chain = space.activation_chain(path)
            if "." in path:
                slot, option, _ = path.split(".")
                assert chain == [(slot, option)]
            else:
                assert chain == []


def test_weights_match_slot_counts():
    assert len(WEIGHTS["NEW"]) == len(NEW.slot_names)
    assert len(WEIGHTS["FULL"]) == len(FULL.slot_names)


def test_missing_handler_prior_is_one_half():
    rng = np.random.default_rng(0)
    n = 10_000
    hits = sum(FULL.sample(rng)["missing_values"] != "none" for _ in range(n))
    assert abs(hits / n - 0.5) <= 0.02


def test_sample_deterministic_per_seed():
    assert FULL.sample(42) == FULL.sample(42)
    assert FULL.sample(42) != FULL.sample(43)


@pytest.mark.parametrize("space", [NEW, FULL], ids=["NEW", "FULL"])
def test_samples_instantiate_to_valid_nets(space):
    rng = np.random.default_rng(1)
    vectors = space.sample_vectors(rng, 10_000)
    for v in vectors:
        cfg = space.decode(v)
        assert space.is_valid(cfg)
        assert set(cfg) == set(space.active_paths(cfg))
        net = space.instantiate(cfg)
        assert validate(net).valid
        assert space.encode(net) == cfg
        assert flatten(net, space.slot_names) == space.slot_methods(cfg)


def test_all_none_zero_r_is_single_transition():
    cfg = FULL.complete({"predictor": "ZeroR"})
    assert FULL.slot_methods(cfg) == ["none"] * 5 + ["ZeroR", "none"]
    net = FULL.instantiate(cfg)
    assert len(net.transitions) == 1 and validate(net).valid


def test_five_preprocessors_inside_boosting():
    cfg = FULL.complete({
        "missing_values": "ReplaceConstant",
        "outliers": "IQRRemove",
        "transformation": "Standardize",
        "dim_reduction": "PCA",
        "sampling": "Resample",
        "predictor": "Logistic",
        "meta_predictor": "AdaBoostM1",
    })
    net = FULL.instantiate(cfg)
    assert flatten(net) == ["ReplaceConstant", "IQRRemove", "Standardize", "PCA", "Resample", "Logistic",
                            "AdaBoostM1"]
    assert net.transitions["t7_meta_predictor"].kind == "subnet"


def test_vote_instantiates_branches():
    cfg = NEW.complete({"predictor": "KNN", "meta_predictor": "Vote", "meta_predictor.Vote.inputs": 4})
    net = NEW.instantiate(cfg)
    inner = net.transitions["t7_meta_predictor"].method
    assert sum(t.startswith("base_") for t in inner.transitions) == 4
    assert flatten(net) == ["KNN", "Vote"]


def test_problems_detect_orphans_and_gaps():
    cfg = FULL.default().to_dict()
    cfg["outliers.IQRRemove.multiplier"] = 2.0
    assert any("inactive" in p for p in FULL.problems(cfg))
    cfg = FULL.default().to_dict()
    cfg["predictor"] = "KNN"
    assert any("unassigned" in p for p in FULL.problems(cfg))
    cfg = FULL.complete({"predictor": "KNN"}).to_dict()
    cfg["predictor.KNN.k"] = 99
    assert any("out of range" in p for p in FULL.problems(cfg))


def test_encode_vector_inactive_sentinel():
    cfg = FULL.complete({"predictor": "KNN"})
    v = FULL.encode_vector(cfg)
    j = FULL.paths.index("predictor.Tree.max_depth")
    assert v[j] == INACTIVE
    assert FULL.decode(v) == cfg


def _arity_space():
    num = ParamDescriptor("u", "continuous", lo=0.0, hi=1.0)
    return toy_space("toy", {
        "a": {"x": [num], "y": []},
        "b": {"p": [ParamDescriptor("v", "integer", lo=1, hi=9)], "q": [], "r": []},
        "c": {"s": [], "t": [], "u": [], "w": []},
    })


def test_neighbor_count_arity_arithmetic():
    space = _arity_space()
    cfg = space.complete({"a": "x", "b": "p", "c": "s"})
    ns = space.neighbors(cfg, 0)
    assert len(ns) == 1 + 2 + 3 + 2
    assert all(space.is_valid(n) for n in ns)
    assert sum(n["a.x.u"] != cfg["a.x.u"] for n in ns if "a.x.u" in n) == 1


def test_binary_flip_returns():
    space = _arity_space()
    cfg = space.complete({"a": "x", "b": "q", "c": "t"})
    flipped = [n for n in space.neighbors(cfg, 0) if n["a"] == "y"][0]
    back = [n for n in space.neighbors(flipped, 0) if n["a"] == "x"][0]
    assert back == cfg


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["NEW", "FULL"]))
def test_neighbors_valid_property(seed, name):
    space = NEW if name == "NEW" else FULL
    cfg = space.sample(seed)
    for n in space.neighbors(cfg, seed):
        assert space.is_valid(n)
        assert n != cfg
        assert set(n) == set(space.active_paths(n))


def test_configuration_key_is_stable_and_ignores_origin():
    a = Configuration({"b": 1, "a": 2}, "X", "one")
    b = Configuration({"a": 2, "b": 1}, "X", "two")
    assert a == b and a.key() == b.key() and hash(a) == hash(b)


def test_unknown_space():
    with pytest.raises(ValueError):
        build_space("PREV")
