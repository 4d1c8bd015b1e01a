import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from gaitprint.errors import EmptyInput, MissingSession, SingleClass
from gaitprint.evaluation import (ProtocolConfig, aggregate, build_pair_experiments, compute_ccr, compute_eer,
                                  eligible_subjects, group_by_subject, iter_pair_experiments, read_details_csv,
                                  run_protocol, write_details_csv, EvalTable)
from gaitprint.features import FeatureVector

from oracles import count_correct


def vector(subject, session, values, axis="Z", task=1, k=0):
    return FeatureVector(*values, axis_id=axis,
                         provenance={"subject": subject, "session": session, "task": task, "complex": k})


def toy_vectors(subjects, per_session=8, seed=0, spread=1.0, sessions=(1, 2)):
    rng = np.random.default_rng(seed)
    out = []
    for si, s in enumerate(subjects):
        centre = np.r_[si * spread * np.ones(5), 100 + si * spread * np.ones(4)]
        for session in sessions:
            for k in range(per_session):
                out.append(vector(s, session, centre + rng.normal(scale=0.3, size=9), k=k))
    return out


# --- metrics ---------------------------------------------------------------

def test_ccr_cases():
    assert compute_ccr([0, 1, 1, 0], [0, 1, 1, 0]) == 100.0
    assert compute_ccr([1, 0], [0, 1]) == 0.0
    assert compute_ccr([1, 1, 0, 0], [1, 0, 0, 1]) == 50.0
    with pytest.raises(EmptyInput):
        compute_ccr([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_ccr_matches_count_oracle(pairs):
    p, t = zip(*pairs)
    assert compute_ccr(p, t) == pytest.approx(count_correct(p, t))


def test_eer_separable_is_zero():
    r = compute_eer([-3, -2, -1, 1, 2, 3], [0, 0, 0, 1, 1, 1])
    assert r.eer == 0.0


def test_eer_constant_scores_is_fifty():
    assert compute_eer(np.zeros(10), [0] * 5 + [1] * 5).eer == pytest.approx(50.0)


def test_eer_needs_both_classes():
    with pytest.raises(SingleClass):
        compute_eer([1.0, 2.0], [0, 0])


def test_eer_gaussian_matches_normal_cdf():
    rng = np.random.default_rng(0)
    n = 1000
    scores = np.r_[rng.normal(0, 1, n), rng.normal(1, 1, n)]
    # unit-variance classes one sd apart cross at 0.5
    expected = 100 * norm.cdf(-0.5)
    assert compute_eer(scores, np.r_[np.zeros(n), np.ones(n)]).eer == pytest.approx(expected, abs=3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=2, max_size=40), st.integers(0, 2 ** 32 - 1))
def test_eer_invariances(raw, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, len(raw))
    labels[0], labels[1] = 0, 1
    s = np.array(raw, dtype=float) / 10
    base = compute_eer(s, labels).eer
    assert 0 <= base <= 100
    # strictly increasing transforms leave the curve unchanged
    assert compute_eer(np.exp(s), labels).eer == pytest.approx(base, abs=1e-9)
    assert compute_eer(3 * s - 7, labels).eer == pytest.approx(base, abs=1e-9)
    # flipping the score sign and swapping the roles gives the same curve
    assert compute_eer(-s, 1 - labels).eer == pytest.approx(base, abs=1e-9)


# --- pairing ---------------------------------------------------------------

def test_three_subjects_give_six_ordered_pairs():
    by = group_by_subject(toy_vectors(["a", "b", "c"]), "Z")
    exps = build_pair_experiments(by, "Z", 3, "lda")
    assert [(e.genuine_subject, e.impostor_subject) for e in exps] == [
        ("a", "b"), ("a", "c"), ("b", "a"), ("b", "c"), ("c", "a"), ("c", "b")]


def test_pair_count_for_eighty_nine_subjects():
    subjects = [f"{i:03d}" for i in range(89)]
    vs = [vector(s, sess, np.arange(9.0)) for s in subjects for sess in (1, 2)]
    by = group_by_subject(vs, "Z")
    n = sum(1 for _ in iter_pair_experiments(by, "Z", 1, "lda"))
    assert n == 89 * 88 == 7832


def test_missing_session_subject_is_excluded():
    vs = toy_vectors(["a", "b", "c"]) + toy_vectors(["d"], sessions=(1,))
    by = group_by_subject(vs, "Z")
    keep, excluded = eligible_subjects(by)
    assert keep == ["a", "b", "c"] and "d" in excluded
    assert len(build_pair_experiments(by, "Z", 1, "svm")) == 6
    with pytest.raises(MissingSession):
        build_pair_experiments(group_by_subject(toy_vectors(["a"]), "Z"), "Z", 1, "lda")


def test_train_and_test_never_share_a_complex():
    vs = toy_vectors(["a", "b", "c"], per_session=5) + toy_vectors(["b"], per_session=3, seed=1)
    for e in build_pair_experiments(group_by_subject(vs, "Z"), "Z", 3, "lda"):
        assert {t[1] for t in e.train.provenance} == {1}
        assert {t[1] for t in e.test.provenance} == {2}
        assert not set(e.train.provenance) & set(e.test.provenance)
        # genuine rows come from the genuine subject only
        assert {t[0] for t, y in zip(e.train.provenance, e.train.labels) if y == 0} == {e.genuine_subject}
        n_gen, n_imp = np.bincount(e.test_balanced.labels)
        assert n_gen == n_imp


# --- protocol --------------------------------------------------------------

def test_protocol_reaggregation_and_csv_roundtrip():
    vs = toy_vectors(["a", "b", "c", "d"], spread=0.5)
    res = run_protocol(vs, ProtocolConfig(seed=1, axes=("Z",), svm_epochs=50))
    assert len(res.table.rows) == 6
    for row in res.table.rows:
        mine = [d for d in res.details if (d.axis, d.set, d.classifier) == (row.axis, row.set, row.classifier)]
        assert len(mine) == row.n_pairs == 12
        assert abs(np.mean([d.ccr for d in mine]) - row.mean_ccr) < 1e-9
        assert abs(np.mean([d.eer for d in mine]) - row.mean_eer) < 1e-9
    buf = io.StringIO()
    write_details_csv(buf, res.details)
    back = read_details_csv(io.StringIO(buf.getvalue()))
    assert back == res.details
    assert aggregate(back) == res.table.rows
    assert EvalTable.from_json(res.table.to_json()) == res.table


def test_protocol_separates_distinct_subjects():
    vs = toy_vectors(["a", "b", "c"], spread=3.0)
    res = run_protocol(vs, ProtocolConfig(axes=("Z",), sets=(1,), svm_epochs=50))
    for row in res.table.rows:
        assert row.mean_ccr == 100.0 and row.mean_eer == 0.0


def test_pooled_eer_flag():
    vs = toy_vectors(["a", "b", "c"], spread=0.3)
    res = run_protocol(vs, ProtocolConfig(axes=("Z",), sets=(2,), classifiers=("lda",), pooled_eer=True))
    row = res.table.rows[0]
    assert row.pooled_eer is not None and 0 <= row.pooled_eer <= 100
    plain = run_protocol(vs, ProtocolConfig(axes=("Z",), sets=(2,), classifiers=("lda",)))
    assert plain.table.rows[0].pooled_eer is None


def test_failed_pair_is_flagged_not_averaged():
    vs = toy_vectors(["a", "b", "c"])
    # subject c has a single training complex, too few for a pooled covariance
    vs = [v for v in vs if not (v.provenance["subject"] == "c" and v.provenance["session"] == 1
                                and v.provenance["complex"] > 0)]
    res = run_protocol(vs, ProtocolConfig(axes=("Z",), sets=(1,), classifiers=("lda",)))
    row = res.table.rows[0]
    failed = [d for d in res.details if d.status != "ok"]
    assert row.n_failed == len(failed) > 0
    assert all(math.isnan(d.ccr) for d in failed)
    assert not math.isnan(row.mean_ccr)
