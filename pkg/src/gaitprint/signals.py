"""Signal containers and the two preprocessing steps applied to every axis.

Values are stored as read-only float64 arrays so a series can be shared
between threads or processes without defensive copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DegenerateSeries, InvalidSeries, WindowTooLarge

AXES = ("X", "Y", "Z")
DEFAULT_SAMPLE_RATE_HZ = 100.0
DEFAULT_SMOOTH_WINDOW = 4

ZSCORE_STEP = "zscore(population_sd)"


def smooth_step(window_len: int) -> str:
    return f"moving_average(window={window_len},centered,shrinking_edges)"


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AxisSeries:
    """One accelerometer axis sampled at a uniform rate.

    ``provenance`` lists the preprocessing steps applied so far, oldest
    first.
    """

    sample_rate_hz: float
    values: np.ndarray
    axis_id: str = "Z"
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InvalidSeries(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.axis_id not in AXES:
            raise InvalidSeries(f"axis_id must be one of {AXES}, got {self.axis_id!r}")
        arr = _frozen_array(self.values)
        if arr.size == 0:
            raise InvalidSeries("series is empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidSeries("series contains NaN or infinite values")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return self.values.size

    def time_ms(self, index: int) -> float:
        return index * 1000.0 / self.sample_rate_hz

    def with_values(self, values, step: str) -> "AxisSeries":
        return replace(self, values=values, provenance=self.provenance + (step,))


@dataclass(frozen=True)
class TriaxialSeries:
    """A three-axis recording. ``origin`` carries subject/session/task metadata."""

    sample_rate_hz: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    origin: dict[str, Any] = field(default_factory=dict)
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InvalidSeries(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        arrays = [_frozen_array(a) for a in (self.x, self.y, self.z)]
        n = {a.size for a in arrays}
        if len(n) != 1:
            raise InvalidSeries(f"axes have different lengths: {[a.size for a in arrays]}")
        if arrays[0].size == 0:
            raise InvalidSeries("recording is empty")
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise InvalidSeries("recording contains NaN or infinite values")
        for name, a in zip("xyz", arrays):
            object.__setattr__(self, name, a)
        object.__setattr__(self, "origin", dict(self.origin))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return self.x.size

    def axis(self, axis_id: str) -> AxisSeries:
        values = {"X": self.x, "Y": self.y, "Z": self.z}[axis_id.upper()]
        return AxisSeries(self.sample_rate_hz, values, axis_id.upper(), self.provenance)

    @classmethod
    def from_axes(cls, x: AxisSeries, y: AxisSeries, z: AxisSeries, origin=None) -> "TriaxialSeries":
        if not (x.provenance == y.provenance == z.provenance):
            raise InvalidSeries("axes were preprocessed differently")
        return cls(x.sample_rate_hz, x.values, y.values, z.values, origin or {}, x.provenance)


def zscore_normalize(series: AxisSeries) -> AxisSeries:
    """Center to mean 0 and scale to population standard deviation 1."""
    v = series.values
    if v.size < 2:
        raise DegenerateSeries("need at least 2 samples to normalize")
    mean = v.mean()
    centered = v - mean
    sd = np.sqrt(np.mean(centered * centered))
    if sd == 0 or sd < 1e-12 * max(1.0, abs(mean)):
        raise DegenerateSeries("series has zero variance")
    out = centered / sd
    # second pass removes the rounding residue left in the mean
    out = out - out.mean()
    return series.with_values(out, ZSCORE_STEP)


def moving_average(values: np.ndarray, window_len: int) -> np.ndarray:
    """Centered moving mean, shrinking the window at both edges.

    For even lengths the window covers ``window_len // 2`` samples before the
    current one and ``window_len // 2 - 1`` after it.
    """
    n = values.size
    before = window_len // 2
    after = window_len - 1 - before
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(n)
    lo = np.maximum(idx - before, 0)
    hi = np.minimum(idx + after, n - 1) + 1
    out = (csum[hi] - csum[lo]) / (hi - lo)
    # cumulative sums can drift outside the input range by an ulp
    return np.clip(out, values.min(), values.max())


def smooth_moving_average(series: AxisSeries, window_len: int = DEFAULT_SMOOTH_WINDOW) -> AxisSeries:
    if window_len < 1:
        raise WindowTooLarge(f"window_len must be >= 1, got {window_len}")
    if len(series) < window_len:
        raise WindowTooLarge(f"series of {len(series)} samples is shorter than window {window_len}")
    return series.with_values(moving_average(series.values, window_len), smooth_step(window_len))


def preprocess_axis(series: AxisSeries, window_len: int = DEFAULT_SMOOTH_WINDOW) -> AxisSeries:
    """Normalize, then smooth."""
    return smooth_moving_average(zscore_normalize(series), window_len)


def preprocess_recording(rec: TriaxialSeries, window_len: int = DEFAULT_SMOOTH_WINDOW) -> TriaxialSeries:
    axes = [preprocess_axis(rec.axis(a), window_len) for a in AXES]
    return TriaxialSeries.from_axes(*axes, origin=rec.origin)


def is_preprocessed(provenance: tuple[str, ...]) -> bool:
    """True when z-scoring was applied and followed by a smoothing step."""
    if ZSCORE_STEP not in provenance:
        return False
    z = provenance.index(ZSCORE_STEP)
    return any(step.startswith("moving_average") for step in provenance[z + 1:])
