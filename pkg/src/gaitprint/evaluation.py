"""Pairwise verification protocol, CCR/EER metrics and the summary table.

For every ordered pair (genuine, impostor) a two-class model is trained on
Session 1 complexes and tested on Session 2 complexes. Results are averaged
per (axis, feature set, classifier).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .classifiers import LabeledSet, SvmConfig, balance, lda_train, predict, svm_train
from .errors import (ClassMissing, EmptyInput, GaitprintError, MissingSession, SingleClass,
                     SingularCovariance)
from .features import FeatureSet, FeatureVector, feature_matrix
from .signals import AXES

logger = logging.getLogger(__name__)

TRAIN_SESSION = 1
TEST_SESSION = 2
CLASSIFIERS = ("lda", "svm")
DETAIL_HEADER = ("genuine", "impostor", "axis", "set", "classifier", "ccr", "eer", "threshold",
                 "n_train", "n_test", "ccr_unbalanced", "status")
TABLE_HEADER = ("axis", "set", "classifier", "mean_ccr", "mean_eer", "n_pairs", "n_failed",
                "sd_ccr", "sd_eer", "mean_ccr_unbalanced", "pooled_eer")


def compute_ccr(predictions, labels) -> float:
    predictions = np.asarray(predictions).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        raise EmptyInput("no predictions to score")
    if predictions.size != labels.size:
        raise ValueError(f"{predictions.size} predictions for {labels.size} labels")
    return 100.0 * np.count_nonzero(predictions == labels) / labels.size


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float


def error_curve(scores, labels):
    """FAR and FRR at ``-inf`` and at every unique score.

    A sample is rejected as impostor when its score is above the threshold.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    gen = np.sort(scores[labels == 0])
    imp = np.sort(scores[labels == 1])
    if gen.size == 0 or imp.size == 0:
        raise SingleClass("EER needs both genuine and impostor scores")
    thresholds = np.concatenate(([-np.inf], np.unique(scores)))
    far = np.searchsorted(imp, thresholds, side="right") / imp.size
    frr = 1.0 - np.searchsorted(gen, thresholds, side="right") / gen.size
    return thresholds, far, frr


def compute_eer(scores, labels) -> EerResult:
    """Equal error rate in percent, linearly interpolated where FAR crosses FRR."""
    thresholds, far, frr = error_curve(scores, labels)
    diff = far - frr  # non-decreasing
    k = int(np.searchsorted(diff, 0.0, side="left"))
    if diff[k] == 0.0:
        return EerResult(100.0 * far[k], float(thresholds[k]))
    # crossing lies strictly between k-1 and k
    a = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + a * (far[k] - far[k - 1])
    lo = thresholds[k - 1] if np.isfinite(thresholds[k - 1]) else thresholds[k]
    return EerResult(100.0 * float(eer), float(lo + a * (thresholds[k] - lo)))


@dataclass
class PairExperiment:
    genuine_subject: str
    impostor_subject: str
    axis_id: str
    feature_set: FeatureSet
    classifier_kind: str
    train: LabeledSet
    test: LabeledSet
    test_balanced: LabeledSet


def group_by_subject(vectors, axis_id: str) -> dict[str, dict[int, list[FeatureVector]]]:
    out: dict[str, dict[int, list[FeatureVector]]] = defaultdict(lambda: defaultdict(list))
    for v in vectors:
        if v.axis_id == axis_id:
            out[str(v.provenance["subject"])][int(v.provenance["session"])].append(v)
    return {s: dict(sessions) for s, sessions in out.items()}


def _pair_rng(seed: int, genuine: str, impostor: str, axis_id: str) -> np.random.Generator:
    key = zlib.crc32(f"{genuine}|{impostor}|{axis_id}".encode())
    return np.random.default_rng([seed, key])


def _tags(vectors, session):
    return tuple((str(v.provenance.get("subject")), session, v.provenance.get("task"),
                  v.provenance.get("complex")) for v in vectors)


def eligible_subjects(features_by_subject) -> tuple[list[str], dict[str, str]]:
    """Subjects with complexes in both sessions, plus a reason for each exclusion."""
    keep, excluded = [], {}
    for subject in sorted(features_by_subject):
        sessions = features_by_subject[subject]
        missing = [s for s in (TRAIN_SESSION, TEST_SESSION) if not sessions.get(s)]
        if missing:
            excluded[subject] = f"MissingSession: no complexes in session(s) {missing}"
        else:
            keep.append(subject)
    return keep, excluded


def iter_pair_experiments(features_by_subject, axis_id: str, set_id, kind: str, seed: int = 0,
                          balance_train: bool = True) -> Iterator[PairExperiment]:
    """Yield one experiment per ordered (genuine, impostor) pair, sorted by pair id."""
    set_id = FeatureSet.parse(set_id)
    subjects, excluded = eligible_subjects(features_by_subject)
    for subject, reason in excluded.items():
        logger.warning("subject %s excluded: %s", subject, reason)
    if len(subjects) < 2:
        raise MissingSession(f"need >= 2 subjects with both sessions, have {len(subjects)}")
    cache = {}
    for s in subjects:
        tr = features_by_subject[s][TRAIN_SESSION]
        te = features_by_subject[s][TEST_SESSION]
        cache[s] = (feature_matrix(tr, set_id), _tags(tr, TRAIN_SESSION),
                    feature_matrix(te, set_id), _tags(te, TEST_SESSION))
    for g in subjects:
        for i in subjects:
            if g == i:
                continue
            g_tr, g_tr_tags, g_te, g_te_tags = cache[g]
            i_tr, i_tr_tags, i_te, i_te_tags = cache[i]
            train = LabeledSet(np.vstack((g_tr, i_tr)), np.r_[np.zeros(len(g_tr)), np.ones(len(i_tr))],
                               g_tr_tags + i_tr_tags)
            test = LabeledSet(np.vstack((g_te, i_te)), np.r_[np.zeros(len(g_te)), np.ones(len(i_te))],
                              g_te_tags + i_te_tags)
            rng = _pair_rng(seed, g, i, axis_id)
            if balance_train:
                train = balance(train, rng)
            test_bal = balance(test, rng)
            yield PairExperiment(g, i, axis_id, set_id, kind, train, test, test_bal)


def build_pair_experiments(features_by_subject, axis_id: str, set_id, kind: str,
                           seed: int = 0) -> list[PairExperiment]:
    return list(iter_pair_experiments(features_by_subject, axis_id, set_id, kind, seed))


@dataclass
class ProtocolConfig:
    seed: int = 0
    axes: tuple[str, ...] = AXES
    sets: tuple[int, ...] = (1, 2, 3)
    classifiers: tuple[str, ...] = CLASSIFIERS
    lda_reg: float | None = None
    svm_c: float = 1.0
    svm_epochs: int = 200
    pooled_eer: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("axes", "sets", "classifiers"):
            d[k] = list(d[k])
        return d


@dataclass
class PairResult:
    genuine: str
    impostor: str
    axis: str
    set: int
    classifier: str
    ccr: float = math.nan
    eer: float = math.nan
    threshold: float = math.nan
    n_train: int = 0
    n_test: int = 0
    ccr_unbalanced: float = math.nan
    status: str = "ok"


def train_model(exp: PairExperiment, cfg: ProtocolConfig):
    if exp.classifier_kind == "lda":
        return lda_train(exp.train, cfg.lda_reg)
    if exp.classifier_kind == "svm":
        return svm_train(exp.train, SvmConfig(seed=_svm_seed(cfg.seed, exp), c_param=cfg.svm_c,
                                              epochs=cfg.svm_epochs))
    raise ValueError(f"unknown classifier {exp.classifier_kind!r}")


def _svm_seed(seed: int, exp: PairExperiment) -> int:
    return zlib.crc32(f"{seed}|{exp.genuine_subject}|{exp.impostor_subject}|{exp.axis_id}|"
                      f"{exp.feature_set.value}".encode())


def run_experiment(exp: PairExperiment, cfg: ProtocolConfig):
    """Train and test one pair; returns the result row and the balanced test scores."""
    res = PairResult(exp.genuine_subject, exp.impostor_subject, exp.axis_id, exp.feature_set.value,
                     exp.classifier_kind, n_train=len(exp.train), n_test=len(exp.test_balanced))
    try:
        model = train_model(exp, cfg)
        scores = model.decision(exp.test_balanced.samples)
        res.ccr = compute_ccr(predict(scores), exp.test_balanced.labels)
        eer = compute_eer(scores, exp.test_balanced.labels)
        res.eer, res.threshold = eer.eer, eer.threshold
        res.ccr_unbalanced = compute_ccr(predict(model.decision(exp.test.samples)), exp.test.labels)
    except (ClassMissing, SingularCovariance, SingleClass, GaitprintError) as exc:
        res.status = f"{type(exc).__name__}: {exc}"
        logger.warning("pair %s/%s %s set%d %s failed: %s", exp.genuine_subject, exp.impostor_subject,
                       exp.axis_id, exp.feature_set.value, exp.classifier_kind, exc)
        return res, None
    return res, (scores, exp.test_balanced.labels)


@dataclass
class TableRow:
    axis: str
    set: int
    classifier: str
    mean_ccr: float
    mean_eer: float
    n_pairs: int
    n_failed: int
    sd_ccr: float
    sd_eer: float
    mean_ccr_unbalanced: float
    pooled_eer: float | None = None


@dataclass
class EvalTable:
    rows: list[TableRow]
    meta: dict = field(default_factory=dict)

    def get(self, axis: str, set_id: int, classifier: str) -> TableRow:
        for r in self.rows:
            if (r.axis, r.set, r.classifier) == (axis, int(set_id), classifier):
                return r
        raise KeyError((axis, set_id, classifier))

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows], "meta": self.meta},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalTable":
        obj = json.loads(text)
        return cls([TableRow(**r) for r in obj["rows"]], obj.get("meta", {}))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in self.rows:
            w.writerow([r.axis, r.set, r.classifier, _fmt(r.mean_ccr), _fmt(r.mean_eer), r.n_pairs,
                        r.n_failed, _fmt(r.sd_ccr), _fmt(r.sd_eer), _fmt(r.mean_ccr_unbalanced),
                        "" if r.pooled_eer is None else _fmt(r.pooled_eer)])

    def format_text(self) -> str:
        """Table laid out as axis rows by (set, classifier) columns: ``CCR (EER)``."""
        sets = sorted({r.set for r in self.rows})
        kinds = [k for k in CLASSIFIERS if any(r.classifier == k for r in self.rows)]
        axes = [a for a in AXES if any(r.axis == a for r in self.rows)]
        cols = [(s, k) for s in sets for k in kinds]
        lines = ["axis   " + " | ".join(f"Set{s} {k.upper():<3}".ljust(15) for s, k in cols)]
        for a in axes:
            cells = []
            for s, k in cols:
                try:
                    r = self.get(a, s, k)
                    cells.append(f"{r.mean_ccr:6.2f} ({r.mean_eer:5.2f})".ljust(15))
                except KeyError:
                    cells.append("-".ljust(15))
            lines.append(f"Acc_{a}  " + " | ".join(cells))
        return "\n".join(lines)


def _fmt(x: float) -> str:
    return repr(float(x))


def aggregate(details: list[PairResult], pooled: dict | None = None) -> list[TableRow]:
    """Mean and standard deviation of per-pair metrics for each (axis, set, classifier)."""
    groups: dict[tuple, list[PairResult]] = defaultdict(list)
    for d in details:
        groups[(d.axis, d.set, d.classifier)].append(d)
    rows = []
    axis_order = {a: i for i, a in enumerate(AXES)}
    kind_order = {k: i for i, k in enumerate(CLASSIFIERS)}
    for key in sorted(groups, key=lambda k: (axis_order[k[0]], k[1], kind_order.get(k[2], 9))):
        ok = [d for d in groups[key] if d.status == "ok"]
        ccr = np.array([d.ccr for d in ok])
        eer = np.array([d.eer for d in ok])
        unb = np.array([d.ccr_unbalanced for d in ok])
        nan = math.nan
        rows.append(TableRow(
            *key,
            mean_ccr=float(ccr.mean()) if ok else nan,
            mean_eer=float(eer.mean()) if ok else nan,
            n_pairs=len(ok),
            n_failed=len(groups[key]) - len(ok),
            sd_ccr=float(ccr.std()) if ok else nan,
            sd_eer=float(eer.std()) if ok else nan,
            mean_ccr_unbalanced=float(unb.mean()) if ok else nan,
            pooled_eer=None if pooled is None or key not in pooled else pooled[key],
        ))
    return rows


@dataclass
class ProtocolResult:
    table: EvalTable
    details: list[PairResult]
    excluded_subjects: dict[str, dict[str, str]]


def run_protocol(vectors: list[FeatureVector], cfg: ProtocolConfig = ProtocolConfig()) -> ProtocolResult:
    """Train/test every ordered subject pair for each axis, feature set and classifier."""
    details: list[PairResult] = []
    pooled_scores: dict[tuple, list] = defaultdict(list)
    excluded = {}
    for axis_id in cfg.axes:
        by_subject = group_by_subject(vectors, axis_id)
        _, excluded[axis_id] = eligible_subjects(by_subject)
        for set_id in cfg.sets:
            for kind in cfg.classifiers:
                for exp in iter_pair_experiments(by_subject, axis_id, set_id, kind, cfg.seed):
                    res, scored = run_experiment(exp, cfg)
                    details.append(res)
                    if cfg.pooled_eer and scored is not None:
                        pooled_scores[(axis_id, int(set_id), kind)].append(scored)
    pooled = None
    if cfg.pooled_eer:
        pooled = {}
        for key, parts in pooled_scores.items():
            s = np.concatenate([p[0] for p in parts])
            y = np.concatenate([p[1] for p in parts])
            pooled[key] = compute_eer(s, y).eer
    subjects = sorted({str(v.provenance["subject"]) for v in vectors})
    meta = {"config": cfg.to_dict(), "n_subjects": len(subjects),
            "train_session": TRAIN_SESSION, "test_session": TEST_SESSION,
            "pairing": "ordered", "test_balancing": "impostor/genuine subsampled to equal counts",
            "eer": "per-pair then averaged"}
    return ProtocolResult(EvalTable(aggregate(details, pooled), meta), details, excluded)


def write_details_csv(fh, details: list[PairResult]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DETAIL_HEADER)
    for d in details:
        w.writerow([d.genuine, d.impostor, d.axis, d.set, d.classifier, _fmt(d.ccr), _fmt(d.eer),
                    _fmt(d.threshold), d.n_train, d.n_test, _fmt(d.ccr_unbalanced), d.status])


def read_details_csv(fh) -> list[PairResult]:
    reader = csv.DictReader(fh)
    out = []
    for row in reader:
        out.append(PairResult(row["genuine"], row["impostor"], row["axis"], int(row["set"]),
                              row["classifier"], float(row["ccr"]), float(row["eer"]),
                              float(row["threshold"]), int(row["n_train"]), int(row["n_test"]),
                              float(row["ccr_unbalanced"]), row["status"]))
    return out
