"""Acceptance gate: one PASS/FAIL line per criterion, collected in the pytest summary.

Run on its own with ``pytest tests/test_acceptance.py -s`` to see the lines
as each check finishes.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from gaitprint.classifiers import LabeledSet, SvmConfig, lda_train, predict, svm_train
from gaitprint.detector import ExtremumPoint, PqrstComplex, detect_complexes
from gaitprint.evaluation import ProtocolConfig, compute_eer, run_protocol
from gaitprint.features import FeatureSet, extract_features, select_features
from gaitprint.ingest import filter_incomplete_subjects, load_corpus, preprocess_corpus
from gaitprint.pipeline import corpus_features
from gaitprint.report import PUBLISHED_TABLE, y_and_z_beat_x
from gaitprint.signals import AXES, TriaxialSeries, preprocess_recording, zscore_normalize
from gaitprint.synth import (GaitParams, distinct_amplitude_sampler, generate_corpus, generate_recording,
                             identical_sampler, perturb_amplitudes)

from acceptance_log import record
from oracles import angle, batch_subgradient_svm, closed_form_lda_direction

ENV_DATA = "GAITPRINT_DATA"


def normalize_only(rec: TriaxialSeries) -> TriaxialSeries:
    axes = [zscore_normalize(rec.axis(a)).values for a in AXES]
    return TriaxialSeries(rec.sample_rate_hz, *axes, rec.origin)


def run_pipeline(root, seed):
    pre = preprocess_corpus(filter_incomplete_subjects(load_corpus(root)))
    vectors, _ = corpus_features(pre.recordings)
    return run_protocol(vectors, ProtocolConfig(seed=seed))


def verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# --- 1 -----------------------------------------------------------------------

_exact_cases = []


@settings(max_examples=40, deadline=None)
@given(st.floats(800, 1400), st.floats(0.0, 0.2), st.integers(0, 2 ** 31))
def _exact_recovery_property(cycle_ms, amp_scale, seed):
    params = perturb_amplitudes(GaitParams(cycle_ms=cycle_ms), np.random.default_rng(seed), amp_scale)
    rec, truth = generate_recording(params, 20.0)
    det = detect_complexes(normalize_only(rec))
    planted = detected = 0
    for axis in AXES:
        want = {tuple(row) for row in truth.indices(axis)}
        got = {c.indices for c in det.complexes[axis]}
        planted += len(want)
        detected += len(want & got)
        # nothing spurious either
        assert got <= want, (axis, sorted(got - want))
    _exact_cases.append((planted, detected))
    assert detected == planted


def test_criterion_01_detector_exactness():
    title = "detector exactness at zero noise"
    try:
        _exact_recovery_property()
        ok_prop = True
    except AssertionError:
        ok_prop = False
    planted = sum(p for p, _ in _exact_cases)
    found = sum(d for _, d in _exact_cases)

    rec, _ = generate_recording(GaitParams(), 60.0)
    t0 = time.perf_counter()
    detect_complexes(normalize_only(rec))
    elapsed = time.perf_counter() - t0
    ok = ok_prop and elapsed < 1.0
    record(1, title, verdict(ok), f"{found}/{planted} planted complexes exact over {len(_exact_cases)} "
                                  f"generated recordings; 60 s recording detected in {elapsed:.3f} s (< 1 s)")
    assert ok


# --- 2 -----------------------------------------------------------------------

def test_criterion_02_detector_robustness():
    per_axis = {a: [0, 0] for a in AXES}
    for seed in range(20):
        rec, truth = generate_recording(GaitParams(noise_sigma=0.05, jitter=0.05, seed=seed), 60.0)
        det = detect_complexes(preprocess_recording(rec))
        for axis in AXES:
            got = np.array([c.indices for c in det.complexes[axis]]).reshape(-1, 5)
            for row in truth.indices(axis):
                per_axis[axis][1] += 1
                if got.size and (np.abs(got - row).max(axis=1) <= 2).any():
                    per_axis[axis][0] += 1
    rates = {a: 100.0 * h / n for a, (h, n) in per_axis.items()}
    ok = min(rates.values()) >= 95.0
    detail = ", ".join(f"{a} {rates[a]:.2f}%" for a in AXES)
    record(2, "detector robustness (noise 0.05, jitter 5%, 20 seeds)", verdict(ok),
           f"within +-2 samples: {detail} (need >= 95%)")
    assert ok


# --- 3 -----------------------------------------------------------------------

def test_criterion_03_feature_identities():
    rng = np.random.default_rng(2024)
    kinds = ("valley", "peak", "valley", "peak", "valley")
    mismatches = 0
    for k in range(10_000):
        fs = (50.0, 100.0, 128.0, 200.0)[k % 4]
        idx = np.cumsum(np.r_[rng.integers(0, 100_000), rng.integers(1, 200, 4)])
        base = rng.uniform(-3, 3, 5)
        amps = base + np.array([0, 7, 0, 7, 0])  # peaks lifted clear of their neighbours
        pts = [ExtremumPoint(int(i), i * 1000.0 / fs, float(a), kd) for i, a, kd in zip(idx, amps, kinds)]
        c = PqrstComplex("Z", *pts)
        fv = extract_features(c, fs)
        if fv.pq_inter + fv.qr_inter + fv.rs_inter + fv.st_inter != (idx[4] - idx[0]) * 1000.0 / fs:
            mismatches += 1
    lengths = [len(select_features(fv, s)) for s in FeatureSet]
    ok = mismatches == 0 and lengths == [5, 4, 9]
    record(3, "feature identities", verdict(ok),
           f"{mismatches} interval-sum mismatches in 10000 complexes; set lengths {lengths}")
    assert ok


# --- 4 -----------------------------------------------------------------------

def test_criterion_04_lda_direction():
    rng = np.random.default_rng(4)
    worst = 0.0
    for k in range(50):
        d = 1 + k % 9
        n0, n1 = rng.integers(d + 5, 80, 2)
        A = rng.normal(size=(d, d))
        X0 = rng.normal(size=(n0, d)) @ A
        X1 = rng.normal(size=(n1, d)) @ A + rng.normal(size=d)
        X = np.vstack((X0, X1))
        y = np.r_[np.zeros(n0), np.ones(n1)]
        m = lda_train(LabeledSet(X, y), reg=0.0)
        worst = max(worst, angle(m.weight, closed_form_lda_direction(X, y)) if d > 1 else
                    abs(m.weight[0] / closed_form_lda_direction(X, y)[0] - 1))
    ok = worst < 1e-6
    record(4, "LDA direction vs closed-form solve", verdict(ok),
           f"worst angle {worst:.2e} rad over 50 problems, d = 1..9 (need < 1e-6)")
    assert ok


# --- 5 -----------------------------------------------------------------------

def test_criterion_05_svm_separable():
    # wide-margin clusters, so the soft-margin optimum at C = 1 is itself hinge-free
    rng = np.random.default_rng(5)
    toys = [LabeledSet(np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 0.0], [3.0, 1.0]]), [0, 0, 1, 1])]
    for _ in range(9):
        d = int(rng.integers(2, 10))
        n = int(rng.integers(10, 60))
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        X = np.vstack((rng.uniform(-1, 1, (n, d)) - 4 * u, rng.uniform(-1, 1, (n, d)) + 4 * u))
        toys.append(LabeledSet(X, np.r_[np.zeros(n), np.ones(n)]))
    worst_acc, worst_hinge, worst_ref, reproducible = 100.0, 0.0, 0.0, True
    for k, data in enumerate(toys):
        a = svm_train(data, SvmConfig(seed=k))
        b = svm_train(data, SvmConfig(seed=k))
        acc = 100.0 * np.mean(predict(a.decision(data.samples)) == data.labels)
        worst_acc = min(worst_acc, acc)
        worst_hinge = max(worst_hinge, a.training_meta["mean_hinge"])
        reproducible &= a.weight.tobytes() == b.weight.tobytes() and a.bias == b.bias
        # premise check with the independent solver on the same standardized inputs
        Xs = a.scaler.transform(data.samples)
        _, w, bias = batch_subgradient_svm(Xs, data.labels, 1.0, iters=5000)
        y = np.where(data.labels == 1, 1.0, -1.0)
        worst_ref = max(worst_ref, float(np.maximum(0, 1 - y * (Xs @ w + bias)).mean()))
    ok = worst_acc == 100.0 and worst_hinge < 1e-3 and reproducible
    record(5, "SVM on separable sets", verdict(ok),
           f"min train accuracy {worst_acc:.1f}%, max mean hinge {worst_hinge:.2e} (reference solver "
           f"{worst_ref:.2e}), bit-reproducible {reproducible} over {len(toys)} sets")
    assert ok


# --- 6 -----------------------------------------------------------------------

def test_criterion_06_eer():
    sep = compute_eer([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], [0, 0, 0, 1, 1, 1]).eer
    const = compute_eer(np.full(20, 0.3), [0] * 10 + [1] * 10).eer
    rng = np.random.default_rng(6)
    n = 1000
    gauss = compute_eer(np.r_[rng.normal(0, 1, n), rng.normal(1, 1, n)], np.r_[np.zeros(n), np.ones(n)]).eer
    target = 100 * norm.cdf(-0.5)
    ok = sep == 0.0 and const == 50.0 and abs(gauss - target) <= 3.0
    record(6, "EER metric", verdict(ok),
           f"separable {sep:.2f}, constant {const:.2f}, gaussian {gauss:.2f} vs {target:.2f} +- 3")
    assert ok


# --- 7, 8, 10: protocol on synthetic corpora --------------------------------------

@pytest.mark.slow
def test_criterion_07_amplitude_beats_interval(tmp_path):
    root = generate_corpus(tmp_path / "distinct", 10, distinct_amplitude_sampler(spread=0.2),
                           session_jitter=0.03, seed=7)
    table = run_pipeline(root, seed=7).table
    gaps = []
    for axis in AXES:
        for kind in ("lda", "svm"):
            gaps.append((axis, kind, table.get(axis, 1, kind).mean_ccr, table.get(axis, 2, kind).mean_ccr))
    worst = min(s1 - s2 for _, _, s1, s2 in gaps)
    s1 = np.mean([g[2] for g in gaps])
    s2 = np.mean([g[3] for g in gaps])
    ok = worst >= 5.0
    record(7, "amplitude features beat interval features", verdict(ok),
           f"mean CCR Set1 {s1:.2f} vs Set2 {s2:.2f}; smallest per axis/classifier gap {worst:+.2f} (need >= 5)")
    assert ok


@pytest.mark.slow
def test_criterion_08_identical_subjects_control(tmp_path):
    root = generate_corpus(tmp_path / "identical", 10, identical_sampler(), session_jitter=0.0, seed=8)
    table = run_pipeline(root, seed=8).table
    ccr = [r.mean_ccr for r in table.rows]
    eer = [r.mean_eer for r in table.rows]
    ok = all(abs(v - 50) <= 7 for v in ccr + eer)
    record(8, "identical-subject control", verdict(ok),
           f"CCR range {min(ccr):.2f}..{max(ccr):.2f}, EER range {min(eer):.2f}..{max(eer):.2f} "
           f"over {len(table.rows)} cells (need 50 +- 7)")
    assert ok


def test_criterion_09_real_corpus():
    title = "published Acc_Y/Set3/SVM numbers on the real corpus"
    root = os.environ.get(ENV_DATA)
    if not root or not Path(root).is_dir():
        record(9, title, "SKIP", f"${ENV_DATA} not set or not a directory; criteria 1-8 stand as acceptance")
        pytest.skip("real corpus not available")
    table = run_pipeline(root, seed=0).table
    row = table.get("Y", 3, "svm")
    ref_ccr, ref_eer = PUBLISHED_TABLE[("Y", 3, "svm")]
    direction = y_and_z_beat_x(table)
    ok = (abs(row.mean_ccr - ref_ccr) <= 5 and abs(row.mean_eer - ref_eer) <= 5
          and all(c.passed for c in direction))
    record(9, title, verdict(ok),
           f"CCR {row.mean_ccr:.2f} vs {ref_ccr} +- 5, EER {row.mean_eer:.2f} vs {ref_eer} +- 5, "
           f"Y/Z beat X in {sum(c.passed for c in direction)}/{len(direction)} cells")
    assert ok


@pytest.mark.slow
def test_criterion_10_end_to_end_determinism(tmp_path):
    root = generate_corpus(tmp_path / "fixture", 10, distinct_amplitude_sampler(spread=0.2),
                           durations_s={1: 20.0, 3: 20.0, 5: 20.0}, session_jitter=0.03, seed=10)
    outputs, times = [], []
    for _ in range(2):
        t0 = time.perf_counter()
        table = run_pipeline(root, seed=10).table
        times.append(time.perf_counter() - t0)
        outputs.append(table.to_json().encode())
    same = outputs[0] == outputs[1]
    ok = same and max(times) < 60.0
    record(10, "end-to-end determinism", verdict(ok),
           f"EvalTable byte-identical {same}; wall time {times[0]:.1f} s and {times[1]:.1f} s (< 60 s)")
    assert ok
