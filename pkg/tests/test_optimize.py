import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import balanced
from oracles import expected_improvement as ei_oracle
from oracles import geometric_mean_trials
from mcps_forge.components import derive_seed
from mcps_forge.data import split_holdout
from mcps_forge.evaluate import PENALTY, Budget, EvaluationRecord, SyntheticObjective, evaluate
from mcps_forge.optimize import (
    SMAC,
    TPE,
    OptimizerState,
    RandomSearch,
    Trajectory,
    expected_improvement,
    fold_ladder,
    intensify,
    make_optimizer,
    optimize,
    parse_ladder,
    random_search,
    run,
    split_history,
)
from mcps_forge.optimize.tpe import CategoricalDensity
from mcps_forge.space import Configuration, build_space, toy_space

NEW = build_space("NEW")
FULL = build_space("FULL")


def record(cfg, err, index=0, status="ok", folds=1, elapsed=None):
    losses = [err] * folds if status == "ok" else []
    return EvaluationRecord(cfg, losses, err if status == "ok" else PENALTY, status, eval_index=index,
                            elapsed=float(index if elapsed is None else elapsed))


# --- random search ----------------------------------------------------------

def test_single_evaluation_budget():
    obj = SyntheticObjective(lambda c, i: 0.5)
    cfg, traj, history = random_search(NEW, obj, Budget(max_evaluations=1), seed=4)
    assert len(history) == 1 and cfg == history[0].config
    assert cfg == NEW.sample(np.random.default_rng(derive_seed(4, "random")))
    assert traj.values == [0.5]


def test_knn_indicator_hits_after_predictor_arity_draws():
    obj = SyntheticObjective(lambda c, i: 0.0 if c["predictor"] == "KNN" else 1.0)
    trials = []
    for seed in range(1000):
        opt, state = RandomSearch(NEW, seed), OptimizerState()
        for k in range(1, 200):
            state.observe(evaluate(obj, opt.suggest(state), Budget(), k))
            if state.incumbent.cv_error == 0.0:
                break
        trials.append(k)
    expected = geometric_mean_trials(1 / 7)
    assert abs(np.mean(trials) - expected) <= 0.15 * expected


def test_trajectory_non_increasing_random():
    obj = SyntheticObjective(lambda c, i: (hash(c.key()) % 1000) / 1000)
    _, traj, _ = random_search(FULL, obj, Budget(max_evaluations=50), seed=1)
    assert all(b <= a for a, b in zip(traj.values, traj.values[1:]))


def test_zero_budget_is_infeasible():
    d = balanced(60)
    train, test = split_holdout(d, 0.7)
    res = run("random", NEW, train, test, Budget(max_evaluations=0), seed=0, folds=3)
    assert not res.feasible and res.final_message == "no feasible configuration"
    assert res.history == [] and res.holdout_error is None


# --- state ------------------------------------------------------------------

def test_trajectory_step_semantics():
    t = Trajectory()
    t.append(1.0, 0.5)
    t.append(2.0, 0.3)
    assert t.value_at(1.5) == 0.5 and t.value_at(0.5) == 1.0 and t.value_at(2.0) == 0.3
    with pytest.raises(ValueError):
        t.append(3.0, 0.4)


def test_ties_keep_first_seen():
    s = OptimizerState()
    a, b = NEW.sample(1), NEW.sample(2)
    s.observe(record(a, 0.3, 0))
    s.observe(record(b, 0.3, 1))
    assert s.incumbent.config == a


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["ok", "ok", "failed", "aborted_timeout", "discarded"]),
                          st.floats(0, 1), st.floats(0, 5)), max_size=40))
def test_incumbent_invariance_property(items):
    s = OptimizerState()
    for k, (status, err, dt) in enumerate(items):
        s.observe(record(NEW.sample(k), err, k, status, elapsed=dt))
        ok = [r.cv_error for r in s.history if r.ok]
        if ok:
            assert s.incumbent.cv_error == min(ok)
        else:
            assert s.incumbent is None
        vals = s.trajectory.values
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        times = s.trajectory.times
        assert all(b >= a for a, b in zip(times, times[1:]))


# --- TPE --------------------------------------------------------------------

def test_split_twenty_gives_five():
    good, bad = split_history(np.linspace(0, 1, 20), 0.25)
    assert len(good) == 5 and len(bad) == 15


@given(st.lists(st.floats(0, 1), max_size=60), st.floats(0.05, 0.95))
def test_split_sizes_property(losses, gamma):
    good, bad = split_history(losses, gamma)
    assert len(good) + len(bad) == len(losses)
    assert len(good) == math.ceil(gamma * len(losses))
    assert not set(good) & set(bad)
    if len(good) and len(bad):
        assert max(np.asarray(losses)[good]) <= min(np.asarray(losses)[bad])


def test_tpe_startup_is_prior_sampling():
    s = OptimizerState()
    s.observe(record(NEW.sample(1), 0.2, 0))
    s.observe(record(NEW.sample(2), 0.4, 1))
    tpe = TPE(NEW, seed=5)
    rng = np.random.default_rng(derive_seed(5, "tpe"))
    for _ in range(5):
        assert tpe.suggest(s) == NEW.sample(rng)


def _knn_state():
    s = OptimizerState()
    others = [p for p in NEW.slot("predictor").choices if p != "KNN"]
    for k in range(20):
        if k < 5:
            cfg = NEW.complete({"predictor": "KNN"})
            s.observe(record(cfg, 0.05 + 0.01 * k, k))
        else:
            cfg = NEW.complete({"predictor": others[k % len(others)]})
            s.observe(record(cfg, 0.5 + 0.01 * k, k))
    return s


def test_tpe_density_oracle():
    # five good records all KNN, fifteen bad never KNN; seven predictors
    h = NEW.hyperparameter("predictor")
    knn = h.values.index("KNN")
    good = CategoricalDensity(np.full(5, knn), h.arity)
    bad_obs = [i for i in range(h.arity) if i != knn] * 3
    bad = CategoricalDensity(np.array(bad_obs[:15]), h.arity)
    assert good.pdf([knn])[0] == pytest.approx(6 / 12)
    assert bad.pdf([knn])[0] == pytest.approx(1 / 22)
    ratios = good.p / bad.p
    assert np.argmax(ratios) == knn


def test_tpe_favours_good_predictor():
    s = _knn_state()
    tpe = TPE(NEW, seed=0)
    picks = [tpe.suggest(s)["predictor"] == "KNN" for _ in range(1000)]
    assert np.mean(picks) > 1 / 7


# --- SMAC -------------------------------------------------------------------

def test_expected_improvement_matches_closed_form():
    mu = np.array([0.1, 0.5, 0.3, 0.2])
    var = np.array([0.01, 0.04, 0.0, 0.09])
    got = expected_improvement(mu, var, 0.25)
    for m, v, g in zip(mu, var, got):
        assert g == pytest.approx(ei_oracle(m, math.sqrt(max(v, 1e-12)), 0.25), abs=1e-9)


def _toy():
    return toy_space("toy", {"x": {v: [] for v in "abcde"}})


def _toy_state(space, low="c"):
    s = OptimizerState()
    k = 0
    for rep in range(4):
        for v in "abcde":
            s.observe(record(Configuration({"x": v}, space.name), 0.1 if v == low else 0.9, k))
            k += 1
    return s


def test_smac_constant_history_is_deterministic():
    space = _toy()
    s = OptimizerState()
    for k in range(12):
        s.observe(record(Configuration({"x": "abcde"[k % 5]}, "toy"), 0.5, k))
    a, b = SMAC(space, seed=3), SMAC(space, seed=3)
    assert [a.suggest(s) for _ in range(6)] == [b.suggest(s) for _ in range(6)]
    forest = a._fit_forest(s)
    mu, var = a.predict(forest, space.sample_vectors(np.random.default_rng(0), 50))
    assert np.allclose(mu, 0.5) and np.allclose(var, 0.0)
    ei = expected_improvement(mu, var, 0.5)
    assert np.all(ei == ei[0])


def test_smac_argmax_ei_lies_in_low_error_region():
    space = _toy()
    s = _toy_state(space)
    smac = SMAC(space, seed=1)
    forest = smac._fit_forest(s)
    values = np.arange(5, dtype=float)[:, None]
    mu, var = smac.predict(forest, values)
    brute = [ei_oracle(m, math.sqrt(max(v, 1e-12)), s.incumbent.cv_error) for m, v in zip(mu, var)]
    assert "abcde"[int(np.argmax(brute))] == "c"
    assert smac.suggest(s)["x"] == "c"


def test_smac_odd_suggestions_are_random():
    space = _toy()
    s = _toy_state(space)
    even, odd = [], []
    for seed in range(300):
        smac = SMAC(space, seed=seed, pool=20)
        even.append(smac.suggest(s)["x"] == "c")
        odd.append(smac.suggest(s)["x"] == "c")
    assert np.mean(even) > 0.9
    assert abs(np.mean(odd) - 0.2) < 0.08


def test_smac_pool_includes_incumbent_neighbours():
    s = _knn_state()
    smac = SMAC(NEW, seed=0, pool=100)
    smac.suggest(s)
    assert smac.last_pool_size == 100 + len(NEW.neighbors(s.incumbent.config, 0))


def test_fold_ladder():
    assert fold_ladder(10) == [1, 2, 4, 8, 10]
    assert fold_ladder(1) == [1]
    assert fold_ladder(10, [3, 6]) == [3, 6, 10]
    assert parse_ladder("1,3;5") == [1, 3, 5] and parse_ladder("doubling") is None


class Counting:
    def __init__(self, table, k=10):
        self.table, self.k, self.calls = table, k, 0

    def fold_loss(self, cfg, i, check=None):
        self.calls += 1
        return self.table[cfg["x"]][i]


def _inc(obj, name="a"):
    cfg = Configuration({"x": name}, "toy")
    return EvaluationRecord(cfg, list(obj.table[name]), float(np.mean(obj.table[name])), "ok")


def test_intensify_better_everywhere_is_promoted():
    obj = Counting({"a": [0.5] * 10, "b": [0.2] * 10})
    inc = _inc(obj)
    rec, promoted = intensify(Configuration({"x": "b"}, "toy"), inc, obj, Budget())
    assert promoted and rec.ok and obj.calls == 10 and rec.cv_error == pytest.approx(0.2)


def test_intensify_early_discard():
    obj = Counting({"a": [0.5] * 10, "b": [0.9] + [0.0] * 9})
    rec, promoted = intensify(Configuration({"x": "b"}, "toy"), _inc(obj), obj, Budget())
    assert not promoted and rec.status == "discarded" and obj.calls == 1
    assert rec.cv_error == PENALTY and rec.fold_losses == [0.9]


def test_intensify_tie_keeps_incumbent():
    obj = Counting({"a": [0.3] * 10})
    inc = _inc(obj)
    rec, promoted = intensify(Configuration({"x": "a"}, "toy"), inc, obj, Budget())
    assert not promoted and rec.ok and rec.cv_error == inc.cv_error


def test_intensify_failure_discards():
    class Failing(Counting):
        def fold_loss(self, cfg, i, check=None):
            raise RuntimeError("boom")

    obj = Failing({"a": [0.3] * 10})
    rec, promoted = intensify(Configuration({"x": "b"}, "toy"), _inc(obj), obj, Budget())
    assert not promoted and rec.status == "failed" and rec.cv_error == PENALTY


# --- orchestration ----------------------------------------------------------

def test_overrides():
    tpe = make_optimizer("tpe", NEW, 0, {"tpe.gamma": "0.5", "tpe.candidates": 7})
    assert tpe.gamma == 0.5 and tpe.candidates == 7
    smac = make_optimizer("smac", NEW, 0, {"smac.trees": 4, "smac.interleave": 3, "intensify.ladder": "2,5"})
    assert smac.trees == 4 and smac.interleave == 3
    with pytest.raises(KeyError):
        make_optimizer("tpe", NEW, 0, {"tpe.bogus": 1})
    with pytest.raises(ValueError):
        make_optimizer("spearmint", NEW, 0)


def _strip(history):
    return [{k: v for k, v in r.to_dict().items() if k not in ("timestamp", "wall_time", "elapsed")}
            for r in history]


@pytest.mark.parametrize("strategy", ["random", "tpe", "smac"])
def test_same_seed_same_history(strategy):
    from mcps_forge.synthetic import synthetic_objective

    obj = synthetic_objective(FULL, k=4)
    a, _ = optimize(strategy, FULL, obj, Budget(max_evaluations=25), seed=7, params={"smac.pool": 50})
    b, _ = optimize(strategy, FULL, obj, Budget(max_evaluations=25), seed=7, params={"smac.pool": 50})
    c, _ = optimize(strategy, FULL, obj, Budget(max_evaluations=25), seed=8, params={"smac.pool": 50})
    assert _strip(a.history) == _strip(b.history)
    assert _strip(a.history) != _strip(c.history)


def test_run_end_to_end_reports_holdout():
    d = balanced(90, d=3, seed=1)
    train, test = split_holdout(d, 0.7)
    res = run("tpe", NEW, train, test, Budget(max_evaluations=6), seed=2, folds=3)
    assert res.feasible and 0.0 <= res.holdout_error <= 1.0
    assert len(res.history) == 6
