"""Nine amplitude/interval features per PQRST complex, and the three feature sets."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .detector import PqrstComplex
from .errors import EmptyInput

AMPLITUDE_NAMES = ("p_amp", "q_amp", "r_amp", "s_amp", "t_amp")
INTERVAL_NAMES = ("pq_inter", "qr_inter", "rs_inter", "st_inter")
FEATURE_NAMES = AMPLITUDE_NAMES + INTERVAL_NAMES
CSV_HEADER = ("subject", "session", "task", "axis") + FEATURE_NAMES


class FeatureSet(enum.Enum):
    SET1_AMPLITUDE = 1
    SET2_INTERVAL = 2
    SET3_ALL = 3

    @property
    def names(self) -> tuple[str, ...]:
        return {1: AMPLITUDE_NAMES, 2: INTERVAL_NAMES, 3: FEATURE_NAMES}[self.value]

    @property
    def columns(self) -> np.ndarray:
        return np.array([FEATURE_NAMES.index(n) for n in self.names])

    @classmethod
    def parse(cls, value) -> "FeatureSet":
        if isinstance(value, cls):
            return value
        return cls(int(str(value).lower().removeprefix("set")))


@dataclass(frozen=True)
class FeatureVector:
    p_amp: float
    q_amp: float
    r_amp: float
    s_amp: float
    t_amp: float
    pq_inter: float
    qr_inter: float
    rs_inter: float
    st_inter: float
    axis_id: str
    provenance: dict = field(default_factory=dict, compare=False)

    def values(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=float)


def extract_features(c: PqrstComplex, fs: float, provenance: dict | None = None) -> FeatureVector:
    idx = c.indices
    # integer index differences before division keep the interval sum exact
    inter = [(b - a) * 1000.0 / fs for a, b in zip(idx, idx[1:])]
    amps = [pt.amplitude for pt in c.points]
    return FeatureVector(*amps, *inter, axis_id=c.axis_id, provenance=dict(provenance or {}))


def select_features(fv: FeatureVector, set_id) -> np.ndarray:
    return fv.values()[FeatureSet.parse(set_id).columns]


def feature_matrix(vectors, set_id) -> np.ndarray:
    cols = FeatureSet.parse(set_id).columns
    if not vectors:
        return np.empty((0, cols.size))
    return np.vstack([v.values() for v in vectors])[:, cols]


@dataclass
class Histogram:
    feature: str
    edges: np.ndarray
    counts: np.ndarray


def feature_histograms(vectors, bins: int = 20) -> dict[str, Histogram]:
    """Per-feature histograms over all supplied vectors.

    Callers choose the grouping (pooled across subjects, or one subject) by
    what they pass in.
    """
    if not vectors:
        raise EmptyInput("no feature vectors to histogram")
    data = np.vstack([v.values() for v in vectors])
    out = {}
    for j, name in enumerate(FEATURE_NAMES):
        col = data[:, j]
        lo, hi = col.min(), col.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(col, bins=bins, range=(lo, hi))
        out[name] = Histogram(name, edges, counts)
    return out


def write_histograms_csv(fh, groups: dict[str, dict[str, Histogram]]) -> None:
    """``groups`` maps a group label (e.g. ``"axis=Y"``) to its histograms."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["group", "feature", "bin", "left", "right", "count"])
    for label, hists in groups.items():
        for name in FEATURE_NAMES:
            h = hists[name]
            for b, count in enumerate(h.counts):
                w.writerow([label, name, b, repr(float(h.edges[b])), repr(float(h.edges[b + 1])), int(count)])


def write_features_csv(fh, vectors) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for v in vectors:
        pv = v.provenance
        w.writerow([pv.get("subject", ""), pv.get("session", ""), pv.get("task", ""), v.axis_id]
                   + [repr(float(x)) for x in v.values()])


def read_features_csv(fh) -> list[FeatureVector]:
    reader = csv.reader(fh)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected features header {header}")
    out = []
    for row in reader:
        if not row:
            continue
        subject, session, task, axis = row[:4]
        nums = [float(x) for x in row[4:]]
        out.append(FeatureVector(*nums, axis_id=axis, provenance={
            "subject": subject, "session": int(session), "task": int(task), "complex": len(out)}))
    return out
