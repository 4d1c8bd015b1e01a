"""PQRST complex detection on preprocessed triaxial gait recordings.

The P point of every gait cycle is the minimum of the Z axis inside a
sliding window; X and Y take their own P as the minimum shortly before the
Z anchor. Q, R, S and T are then traced forward as alternating maxima and
minima.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import IncompleteComplex, InvalidParams, SeriesTooShort
from .signals import AXES, AxisSeries, TriaxialSeries

VALLEY = "valley"
PEAK = "peak"
POINT_NAMES = ("p", "q", "r", "s", "t")


@dataclass(frozen=True)
class ExtremumPoint:
    index: int
    time_ms: float
    amplitude: float
    kind: str

    @classmethod
    def at(cls, series: AxisSeries, index: int, kind: str) -> "ExtremumPoint":
        index = int(index)
        return cls(index, index * 1000.0 / series.sample_rate_hz, float(series.values[index]), kind)


@dataclass(frozen=True)
class PqrstComplex:
    axis_id: str
    p: ExtremumPoint
    q: ExtremumPoint
    r: ExtremumPoint
    s: ExtremumPoint
    t: ExtremumPoint

    def __post_init__(self):
        pts = self.points
        if not all(a.index < b.index for a, b in zip(pts, pts[1:])):
            raise ValueError(f"complex points out of order: {[p.index for p in pts]}")
        kinds = tuple(p.kind for p in pts)
        if kinds != (VALLEY, PEAK, VALLEY, PEAK, VALLEY):
            raise ValueError(f"bad point kinds {kinds}")
        p, q, r, s, t = (pt.amplitude for pt in pts)
        if not (q > p and q > r and s > r and s > t):
            raise ValueError("complex violates the valley/peak amplitude pattern")

    @property
    def points(self) -> tuple[ExtremumPoint, ...]:
        return (self.p, self.q, self.r, self.s, self.t)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(pt.index for pt in self.points)

    def to_json(self, **extra) -> dict:
        out = dict(extra)
        out["axis"] = self.axis_id
        for name, pt in zip(POINT_NAMES, self.points):
            out[name] = {"index": pt.index, "amp": pt.amplitude}
        return out

    @classmethod
    def from_json(cls, obj: dict, sample_rate_hz: float) -> "PqrstComplex":
        pts = []
        for name, kind in zip(POINT_NAMES, (VALLEY, PEAK, VALLEY, PEAK, VALLEY)):
            idx = int(obj[name]["index"])
            pts.append(ExtremumPoint(idx, idx * 1000.0 / sample_rate_hz, float(obj[name]["amp"]), kind))
        return cls(obj["axis"], *pts)


@dataclass(frozen=True)
class DetectorConfig:
    """Detector parameters, all times in milliseconds.

    ``min_swing`` is the hysteresis used while tracing Q..T: an extremum is
    confirmed only after the signal has moved away from it by more than this
    amount. Zero gives plain alternating local extrema.

    ``anchor_quantile`` rejects Z minima that are not below that quantile of
    the whole series; ``None`` disables the check.
    """

    cycle_min_ms: float = 800.0
    cycle_max_ms: float = 1400.0
    backtrack_ms: float = 10.0
    qrst_search_ms: float | None = None
    min_swing: float = 0.1
    anchor_quantile: float | None = 0.25
    extremum_plateau_policy: str = "leftmost"

    def __post_init__(self):
        if not (0 < self.cycle_min_ms < self.cycle_max_ms):
            raise InvalidParams("need 0 < cycle_min_ms < cycle_max_ms")
        if self.backtrack_ms < 0:
            raise InvalidParams("backtrack_ms must be >= 0")
        if self.qrst_search_ms is not None and self.qrst_search_ms <= 0:
            raise InvalidParams("qrst_search_ms must be > 0")
        if self.min_swing < 0:
            raise InvalidParams("min_swing must be >= 0")
        if self.anchor_quantile is not None and not (0 < self.anchor_quantile <= 1):
            raise InvalidParams("anchor_quantile must lie in (0, 1]")
        if self.extremum_plateau_policy != "leftmost":
            raise InvalidParams(f"unknown plateau policy {self.extremum_plateau_policy!r}")

    @property
    def search_ms(self) -> float:
        return self.qrst_search_ms if self.qrst_search_ms is not None else 0.4 * self.cycle_max_ms

    def to_dict(self) -> dict:
        return asdict(self)


def ms_to_samples(ms: float, fs: float) -> int:
    # round first so 10 ms * 100 Hz / 1000 is exactly one sample, not 1.0000000000000002
    return int(math.ceil(round(ms * fs / 1000.0, 9)))


def detect_p_anchors(acc_z: AxisSeries, cfg: DetectorConfig = DetectorConfig()) -> list[ExtremumPoint]:
    """Z-axis P anchors, one per gait cycle, in time order.

    Sample ``i`` is an anchor when no earlier sample within ``cycle_min_ms``
    is lower or equal and no later sample within ``cycle_min_ms`` is lower.
    Two anchors are therefore never closer than ``cycle_min_ms``; on a flat
    minimum the leftmost sample wins.
    """
    fs = acc_z.sample_rate_hz
    v = acc_z.values
    n = v.size
    if n < ms_to_samples(cfg.cycle_max_ms, fs):
        raise SeriesTooShort(f"{n} samples is shorter than one maximum cycle ({cfg.cycle_max_ms} ms)")
    half = ms_to_samples(cfg.cycle_min_ms, fs) - 1
    if half < 1:
        raise InvalidParams("cycle_min_ms is shorter than two samples")

    before = _trailing_min(v, half)
    after = _leading_min(v, half + 1)
    is_anchor = (v < before) & (v <= after)
    if cfg.anchor_quantile is not None:
        is_anchor &= v < np.quantile(v, cfg.anchor_quantile)
    return [ExtremumPoint.at(acc_z, i, VALLEY) for i in np.flatnonzero(is_anchor)]


def _trailing_min(v: np.ndarray, width: int) -> np.ndarray:
    """min(v[i - width : i]) for each i; +inf where that slice is empty."""
    padded = np.concatenate((np.full(width, np.inf), v[:-1]))
    return sliding_window_view(padded, width).min(axis=1)


def _leading_min(v: np.ndarray, width: int) -> np.ndarray:
    """min(v[i : i + width]) for each i, window clipped at the end."""
    padded = np.concatenate((v, np.full(width - 1, np.inf)))
    return sliding_window_view(padded, width).min(axis=1)


def backtrack_p(axis: AxisSeries, p_z: ExtremumPoint, cfg: DetectorConfig = DetectorConfig()) -> ExtremumPoint:
    """Minimum of ``axis`` over the closed window ending at the Z anchor."""
    if not 0 <= p_z.index < len(axis):
        raise IndexError(f"anchor index {p_z.index} outside series of length {len(axis)}")
    lookback = ms_to_samples(cfg.backtrack_ms, axis.sample_rate_hz)
    lo = max(0, p_z.index - lookback)
    window = axis.values[lo:p_z.index + 1]
    return ExtremumPoint.at(axis, lo + int(np.argmin(window)), VALLEY)


def trace_qrst(axis: AxisSeries, p: ExtremumPoint, cfg: DetectorConfig = DetectorConfig()) -> PqrstComplex:
    """Trace Q (max), R (min), S (max), T (min) forward from ``p``.

    Raises IncompleteComplex when the four extrema cannot be confirmed
    within the search bound: reason ``"truncated"`` when the series ended
    first, ``"incomplete"`` otherwise.
    """
    v = axis.values
    bound = p.index + ms_to_samples(cfg.search_ms, axis.sample_rate_hz)

    found = []
    seeking_max = True
    ext_idx = p.index
    ext_val = v[p.index]
    delta = cfg.min_swing
    # extrema must lie within the bound; confirming the last one may look past it
    for i in range(p.index + 1, v.size):
        x = v[i]
        if i > bound and (x > ext_val if seeking_max else x < ext_val):
            break
        if seeking_max:
            if x > ext_val:
                ext_idx, ext_val = i, x
            elif x < ext_val - delta and ext_idx != p.index:
                found.append(ext_idx)
                seeking_max = False
                ext_idx, ext_val = i, x
        else:
            if x < ext_val:
                ext_idx, ext_val = i, x
            elif x > ext_val + delta:
                found.append(ext_idx)
                if len(found) == 4:
                    break
                seeking_max = True
                ext_idx, ext_val = i, x
    if len(found) < 4:
        if bound >= v.size:
            raise IncompleteComplex(f"series ends at {v.size - 1} before the trace from P={p.index} "
                                    f"completed ({len(found)} of 4 extrema)", "truncated")
        raise IncompleteComplex(
            f"only {len(found)} of 4 alternating extrema within {cfg.search_ms} ms after P={p.index}")
    q, r, s, t = found
    return PqrstComplex(
        axis.axis_id,
        ExtremumPoint.at(axis, p.index, VALLEY),
        ExtremumPoint.at(axis, q, PEAK),
        ExtremumPoint.at(axis, r, VALLEY),
        ExtremumPoint.at(axis, s, PEAK),
        ExtremumPoint.at(axis, t, VALLEY),
    )


@dataclass
class DetectionDiagnostics:
    n_anchors: int = 0
    n_gaps: int = 0
    completed: dict[str, int] = field(default_factory=lambda: {a: 0 for a in AXES})
    discarded: dict[str, Counter] = field(default_factory=lambda: {a: Counter() for a in AXES})

    def completion_rate(self, axis_id: str) -> float:
        return self.completed[axis_id] / self.n_anchors if self.n_anchors else 0.0

    def merge(self, other: "DetectionDiagnostics") -> None:
        self.n_anchors += other.n_anchors
        self.n_gaps += other.n_gaps
        for a in AXES:
            self.completed[a] += other.completed[a]
            self.discarded[a].update(other.discarded[a])

    def to_dict(self) -> dict:
        return {
            "n_anchors": self.n_anchors,
            "n_gaps": self.n_gaps,
            "completed": dict(self.completed),
            "discarded": {a: dict(sorted(c.items())) for a, c in self.discarded.items()},
            "completion_rate": {a: self.completion_rate(a) for a in AXES},
        }


@dataclass
class Detection:
    complexes: dict[str, list[PqrstComplex]]
    anchors: list[ExtremumPoint]
    diagnostics: DetectionDiagnostics


def detect_complexes(rec: TriaxialSeries, cfg: DetectorConfig = DetectorConfig()) -> Detection:
    """Run the full detection on one recording.

    Z uses each anchor as its own P; X and Y backtrack from it. Complexes
    that cannot be completed are dropped and counted in the diagnostics.
    """
    z = rec.axis("Z")
    anchors = detect_p_anchors(z, cfg)
    diag = DetectionDiagnostics(n_anchors=len(anchors))
    for a, b in zip(anchors, anchors[1:]):
        if b.time_ms - a.time_ms > cfg.cycle_max_ms:
            diag.n_gaps += 1

    complexes: dict[str, list[PqrstComplex]] = {a: [] for a in AXES}
    for axis_id in AXES:
        series = rec.axis(axis_id)
        for anchor in anchors:
            p = anchor if axis_id == "Z" else backtrack_p(series, anchor, cfg)
            try:
                complexes[axis_id].append(trace_qrst(series, p, cfg))
            except IncompleteComplex as exc:
                diag.discarded[axis_id][exc.reason] += 1
        diag.completed[axis_id] = len(complexes[axis_id])
    return Detection(complexes, anchors, diag)


def write_complexes_jsonl(fh, detection: Detection, origin: dict) -> int:
    """Write one JSON object per complex; returns the number written."""
    n = 0
    for axis_id in AXES:
        for c in detection.complexes[axis_id]:
            fh.write(json.dumps(c.to_json(**origin), sort_keys=False) + "\n")
            n += 1
    return n
