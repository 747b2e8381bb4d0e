import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import balanced, sixty_forty
from mcps_forge import evaluate as ev
from mcps_forge.data import plan_folds, split_holdout
from mcps_forge.evaluate import (
    ABORTED_TIMEOUT,
    FAILED,
    OK,
    PENALTY,
    Budget,
    CVObjective,
    EvaluationRecord,
    SyntheticObjective,
    cv_evaluate,
    evaluate,
    final_fit_and_test,
)
from mcps_forge.optimize import optimize
from mcps_forge.space import Configuration, build_space

FULL = build_space("FULL")
NEW = build_space("NEW")


def zero_r(space=FULL):
    return space.complete({"predictor": "ZeroR"})


def test_zero_r_sixty_forty_cv():
    d = sixty_forty(100)
    plan = plan_folds(d, 10, seed=0)
    rec = cv_evaluate(zero_r(), d, plan, seed=0)
    assert rec.status == OK and len(rec.fold_losses) == 10
    # hand oracle: every training split keeps class 0 as majority, so a fold's
    # loss is its share of class 1
    for i, loss in enumerate(rec.fold_losses):
        rows = plan.validation_rows(i)
        assert loss == pytest.approx(np.mean(d.labels[rows] == 1))
    assert rec.cv_error == np.mean(rec.fold_losses)
    assert rec.cv_error == pytest.approx(0.40, abs=0.01)


def test_missing_values_without_imputation_fail(blobs_missing):
    plan = plan_folds(blobs_missing, 5)
    cfg = FULL.complete({"predictor": "KNN"})
    rec = cv_evaluate(cfg, blobs_missing, plan)
    assert rec.status == FAILED and rec.cv_error == PENALTY
    assert "missing" in rec.message


def test_cv_evaluate_deterministic(blobs):
    plan = plan_folds(blobs, 5)
    cfg = FULL.complete({"predictor": "Tree", "meta_predictor": "Bagging", "transformation": "Standardize"})
    a = cv_evaluate(cfg, blobs, plan, seed=3).to_dict()
    b = cv_evaluate(cfg, blobs, plan, seed=3).to_dict()
    for k in ("timestamp", "wall_time", "elapsed"):
        a.pop(k), b.pop(k)
    assert a == b


def test_never_trains_on_validation_rows(blobs, monkeypatch):
    seen = []
    real = ev.mcps.execute

    def spy(net, token, mode="fit", state=None, ctx=None):
        seen.append((mode, set(token.payload.row_ids.tolist())))
        return real(net, token, mode, state, ctx)

    monkeypatch.setattr(ev.mcps, "execute", spy)
    plan = plan_folds(blobs, 6)
    cv_evaluate(FULL.complete({"predictor": "KNN"}), blobs, plan)
    assert len(seen) == 12
    for i in range(6):
        (m1, fit_rows), (m2, val_rows) = seen[2 * i], seen[2 * i + 1]
        assert (m1, m2) == ("fit", "predict")
        assert not fit_rows & val_rows
        assert val_rows == set(plan.validation_rows(i).tolist())


def test_holdout_untouched_until_final_fit():
    d = balanced(120, d=3, seed=2)
    train, test = split_holdout(d, 0.7)
    reads = []
    real = test.table
    object.__setattr__(test, "table", lambda *a, **k: reads.append(1) or real(*a, **k))
    objective = CVObjective(NEW, train, plan_folds(train, 5))
    state, _ = optimize("random", NEW, objective, Budget(max_evaluations=5), seed=0)
    assert reads == []
    assert objective.rows_read == set(range(train.n_rows))
    err = final_fit_and_test(state.incumbent.config, train, test, space=NEW)
    assert reads and 0.0 <= err <= 1.0


def test_final_fit_zero_r_and_knn():
    d = sixty_forty(200, seed=1)
    train, test = split_holdout(d, 0.7)
    assert final_fit_and_test(zero_r(), train, test) == pytest.approx(0.40)
    knn = FULL.complete({"predictor": "KNN", "predictor.KNN.k": 1})
    assert final_fit_and_test(knn, train, train) == 0.0


def test_final_fit_surfaces_failures(blobs_missing):
    train, test = split_holdout(blobs_missing, 0.7)
    with pytest.raises(Exception):
        final_fit_and_test(FULL.complete({"predictor": "KNN"}), train, test)


def test_timeout_becomes_penalty():
    def slow(cfg, i):
        time.sleep(0.05)
        return 0.1

    rec = evaluate(SyntheticObjective(slow, k=10), zero_r(), Budget(per_eval_timeout=0.12))
    assert rec.status == ABORTED_TIMEOUT
    assert rec.cv_error == PENALTY
    assert 1 <= len(rec.fold_losses) < 10


def test_loss_outside_unit_interval_fails():
    rec = evaluate(SyntheticObjective(lambda c, i: 2.0), zero_r(), Budget())
    assert rec.status == FAILED and rec.cv_error == PENALTY


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget(wall_clock_limit=0)
    with pytest.raises(ValueError):
        Budget(per_eval_memory=-1)
    assert Budget().per_eval_memory == 3 * 1024**3


def test_record_round_trip():
    rec = evaluate(SyntheticObjective(lambda c, i: 0.25 + 0.1 * i, k=3), zero_r(), Budget(), eval_index=7)
    back = EvaluationRecord.from_dict(rec.to_dict())
    assert back.to_dict() == rec.to_dict()
    assert rec.cv_error == pytest.approx(0.35)


statuses = st.sampled_from(["ok", "failed", "aborted_timeout", "aborted_resource", "discarded"])


@given(st.lists(st.tuples(statuses, st.floats(0.0, 0.999)), min_size=2, max_size=20))
def test_penalty_records_sort_after_ok(items):
    recs = []
    for k, (status, err) in enumerate(items):
        ok = status == "ok"
        recs.append(EvaluationRecord(Configuration({}, "X"), [err] if ok else [], err if ok else PENALTY, status,
                                     eval_index=k))
    ranked = sorted(recs, key=EvaluationRecord.sort_key)
    seen_bad = False
    for r in ranked:
        if not r.ok:
            seen_bad = True
        else:
            assert not seen_bad
    for r in recs:
        assert 0.0 <= r.cv_error <= 1.0


def test_fold_losses_bounded(blobs):
    plan = plan_folds(blobs, 5)
    for seed in range(5):
        rec = cv_evaluate(FULL.sample(seed), blobs, plan, seed=seed)
        assert all(0.0 <= x <= 1.0 for x in rec.fold_losses)
        if rec.ok:
            assert rec.cv_error == np.mean(rec.fold_losses)
        else:
            assert rec.cv_error == PENALTY
