"""Synthetic gait recordings with planted PQRST complexes.

Every cycle is a flat stance segment, a short descent into P, the five
planted extrema, and a recovery ramp from T back to the stance baseline.
Consecutive knots are joined by monotone cubic (PCHIP) interpolation, so at
zero noise the planted points are the only extrema of the swing segment.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidParams
from .signals import AXES, TriaxialSeries

DEFAULT_AMPLITUDES = {
    "X": (-1.6, 1.4, -0.4, 1.0, -1.0),
    "Y": (-1.8, 1.0, -0.8, 1.5, -1.3),
    "Z": (-2.4, 1.2, -0.6, 1.6, -1.2),
}
DEFAULT_INTERVAL_FRACTIONS = {
    "X": (0.22, 0.28, 0.25, 0.25),
    "Y": (0.20, 0.30, 0.24, 0.26),
    "Z": (0.25, 0.25, 0.25, 0.25),
}
# how far each axis's P precedes the Z anchor
DEFAULT_AXIS_LEAD_MS = {"X": 10.0, "Y": 0.0, "Z": 0.0}
TASK_DURATIONS_S = {1: 20.0, 3: 60.0, 5: 20.0}


def _valid_pattern(amps) -> bool:
    p, q, r, s, t = amps
    return q > p and q > r and s > r and s > t


@dataclass(frozen=True)
class GaitParams:
    cycle_ms: float = 1000.0
    swing_fraction: float = 0.4
    stance_lead_fraction: float = 0.3
    amplitudes: dict = field(default_factory=lambda: dict(DEFAULT_AMPLITUDES))
    interval_fractions: dict = field(default_factory=lambda: dict(DEFAULT_INTERVAL_FRACTIONS))
    axis_lead_ms: dict = field(default_factory=lambda: dict(DEFAULT_AXIS_LEAD_MS))
    baseline: float = 0.0
    descent_ms: float = 60.0
    recovery_ms: float | None = 100.0
    jitter: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 800.0 <= self.cycle_ms <= 1400.0:
            raise InvalidParams(f"cycle_ms must lie in [800, 1400], got {self.cycle_ms}")
        if not 0 < self.swing_fraction < 1:
            raise InvalidParams("swing_fraction must lie in (0, 1)")
        if not 0 < self.stance_lead_fraction < 1 - self.swing_fraction:
            raise InvalidParams("stance_lead_fraction leaves no room for the swing phase")
        if self.jitter < 0 or self.noise_sigma < 0:
            raise InvalidParams("jitter and noise_sigma must be >= 0")
        if self.descent_ms <= 0 or (self.recovery_ms is not None and self.recovery_ms <= 0):
            raise InvalidParams("descent_ms and recovery_ms must be > 0")
        for axis in AXES:
            amps = self.amplitudes[axis]
            if len(amps) != 5 or not _valid_pattern(amps):
                raise InvalidParams(f"{axis} amplitudes {amps} break the valley/peak pattern")
            if min(amps[0], amps[2], amps[4]) >= self.baseline:
                raise InvalidParams(f"{axis} valleys must dip below the stance baseline")
            fr = self.interval_fractions[axis]
            if len(fr) != 4 or min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-12:
                raise InvalidParams(f"{axis} interval fractions {fr} must be 4 positives summing to 1")
        z = self.amplitudes["Z"]
        if not z[0] < min(z[1:]):
            raise InvalidParams("Z axis P must be the lowest planted point")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["amplitudes"] = {k: list(v) for k, v in self.amplitudes.items()}
        d["interval_fractions"] = {k: list(v) for k, v in self.interval_fractions.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GaitParams":
        d = dict(d)
        d["amplitudes"] = {k: tuple(v) for k, v in d["amplitudes"].items()}
        d["interval_fractions"] = {k: tuple(v) for k, v in d["interval_fractions"].items()}
        return cls(**d)


@dataclass
class PlantedCycle:
    indices: dict[str, tuple[int, ...]]
    amplitudes: dict[str, tuple[float, ...]]

    def to_json(self) -> dict:
        return {a: {"indices": list(self.indices[a]), "amplitudes": list(self.amplitudes[a])} for a in AXES}


@dataclass
class GroundTruth:
    cycles: list[PlantedCycle]

    def indices(self, axis_id: str) -> np.ndarray:
        return np.array([c.indices[axis_id] for c in self.cycles], dtype=int).reshape(-1, 5)

    def write_jsonl(self, path: Path) -> None:
        with open(path, "w") as fh:
            for c in self.cycles:
                fh.write(json.dumps(c.to_json()) + "\n")

    @classmethod
    def read_jsonl(cls, path: Path) -> "GroundTruth":
        cycles = []
        with open(path) as fh:
            for line in fh:
                obj = json.loads(line)
                cycles.append(PlantedCycle(
                    {a: tuple(obj[a]["indices"]) for a in AXES},
                    {a: tuple(obj[a]["amplitudes"]) for a in AXES},
                ))
        return cls(cycles)


def _jittered_cycle(params: GaitParams, rng: np.random.Generator):
    """Draw one cycle's duration, amplitudes and interval fractions."""
    j = params.jitter
    cycle = params.cycle_ms
    amps = dict(params.amplitudes)
    fracs = dict(params.interval_fractions)
    if j == 0:
        return cycle, amps, fracs
    cycle = float(np.clip(cycle * (1 + j * rng.standard_normal()), 800.0, 1400.0))
    for axis in AXES:
        base = np.asarray(params.amplitudes[axis])
        for _ in range(20):
            cand = base + j * np.abs(base) * rng.standard_normal(5)
            if _valid_pattern(cand) and (axis != "Z" or cand[0] < cand[1:].min()):
                amps[axis] = tuple(cand)
                break
        f = np.asarray(params.interval_fractions[axis]) * (1 + j * rng.standard_normal(4))
        f = np.clip(f, 0.05, None)
        fracs[axis] = tuple(f / f.sum())
    return cycle, amps, fracs


def generate_recording(params: GaitParams, duration_s: float, fs: float = 100.0,
                       origin: dict | None = None) -> tuple[TriaxialSeries, GroundTruth]:
    """Emit a recording holding every whole cycle that fits in ``duration_s``."""
    if duration_s * 1000.0 < params.cycle_ms:
        raise InvalidParams(f"duration {duration_s} s is shorter than one cycle")
    if fs <= 0:
        raise InvalidParams("fs must be > 0")
    rng = np.random.default_rng(params.seed)
    n = int(round(duration_s * fs))
    to_idx = lambda ms: int(round(ms * fs / 1000.0))  # noqa: E731
    total_ms = n * 1000.0 / fs

    knots = {a: [(0, params.baseline)] for a in AXES}
    cycles = []
    start = 0.0
    while True:
        cycle_ms, amps, fracs = _jittered_cycle(params, rng)
        if start + cycle_ms > total_ms + 1e-9:
            break
        p_ms = start + params.stance_lead_fraction * cycle_ms
        swing = params.swing_fraction * cycle_ms
        planted_idx, planted_amp = {}, {}
        for axis in AXES:
            p_axis = p_ms - params.axis_lead_ms[axis]
            times = p_axis + swing * np.concatenate(([0.0], np.cumsum(fracs[axis])))
            idx = [to_idx(t) for t in times]
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise InvalidParams("sample rate too low to separate planted extrema")
            pre = idx[0] - max(1, to_idx(params.descent_ms))
            if pre <= knots[axis][-1][0]:
                raise InvalidParams("cycles overlap: stance too short for descent and recovery")
            knots[axis].append((pre, params.baseline))
            knots[axis].extend(zip(idx, amps[axis]))
            if params.recovery_ms is not None:
                knots[axis].append((idx[-1] + max(1, to_idx(params.recovery_ms)), params.baseline))
            planted_idx[axis] = tuple(idx)
            planted_amp[axis] = tuple(float(a) for a in amps[axis])
        cycles.append(PlantedCycle(planted_idx, planted_amp))
        start += cycle_ms

    grid = np.arange(n)
    channels = {}
    for axis in AXES:
        pts = knots[axis]
        last_idx, last_val = pts[-1]
        if last_idx >= n:
            raise InvalidParams("final cycle's recovery runs past the recording end")
        if last_idx < n - 1:
            pts.append((n - 1, last_val if params.recovery_ms is None else params.baseline))
        xs, ys = zip(*pts)
        clean = PchipInterpolator(np.asarray(xs, float), np.asarray(ys, float))(grid)
        # pin knot samples to their exact planted values
        clean[np.asarray(xs)] = ys
        channels[axis] = clean
    if params.noise_sigma > 0:
        for axis in AXES:
            channels[axis] = channels[axis] + params.noise_sigma * rng.standard_normal(n)
    rec = TriaxialSeries(fs, channels["X"], channels["Y"], channels["Z"], origin or {})
    return rec, GroundTruth(cycles)


def perturb_amplitudes(params: GaitParams, rng: np.random.Generator, scale: float) -> GaitParams:
    """Relative Gaussian perturbation of every amplitude, retried until valid."""
    if scale == 0:
        return params
    amps = {}
    for axis in AXES:
        base = np.asarray(params.amplitudes[axis])
        for _ in range(100):
            cand = base + scale * np.abs(base) * rng.standard_normal(5)
            if _valid_pattern(cand) and cand.min() < params.baseline and (axis != "Z" or cand[0] < cand[1:].min()):
                break
        else:
            cand = base
        amps[axis] = tuple(float(a) for a in cand)
    return replace(params, amplitudes=amps)


def distinct_amplitude_sampler(spread: float = 0.35, jitter: float = 0.05,
                               noise_sigma: float = 0.05) -> Callable[[np.random.Generator, int], GaitParams]:
    """Subjects differ in amplitudes only; cycle length and intervals share one distribution."""
    def sample(rng: np.random.Generator, subject: int) -> GaitParams:
        base = GaitParams(jitter=jitter, noise_sigma=noise_sigma)
        return perturb_amplitudes(base, rng, spread)
    return sample


def identical_sampler(jitter: float = 0.05, noise_sigma: float = 0.05) -> Callable[[np.random.Generator, int], GaitParams]:
    """Every subject gets the same parameters; only the noise seed differs."""
    def sample(rng: np.random.Generator, subject: int) -> GaitParams:
        return GaitParams(jitter=jitter, noise_sigma=noise_sigma)
    return sample


def _format_rows(rec: TriaxialSeries) -> Iterable[str]:
    step = 1000.0 / rec.sample_rate_hz
    for i in range(len(rec)):
        t = i * step
        t_str = str(int(t)) if float(t).is_integer() else f"{t:.6f}"
        yield f"{t_str},{rec.x[i]:.9g},{rec.y[i]:.9g},{rec.z[i]:.9g}\n"


def write_recording_csv(path: Path, rec: TriaxialSeries) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t_ms,acc_x,acc_y,acc_z\n")
        fh.writelines(_format_rows(rec))


def generate_corpus(root, n_subjects: int, sampler=None, sessions=(1, 2), tasks=(1, 3, 5),
                    durations_s: dict | None = None, session_jitter: float = 0.02,
                    seed: int = 0, fs: float = 100.0) -> Path:
    """Write a corpus tree readable by :func:`gaitprint.ingest.load_corpus`.

    Each subject keeps one parameter set across sessions; ``session_jitter``
    perturbs its amplitudes per session to imitate day-to-day drift. Every
    recording gets a ``task_<t>.ground_truth.jsonl`` sidecar.
    """
    if n_subjects < 2:
        raise InvalidParams("need at least 2 subjects")
    sampler = sampler or distinct_amplitude_sampler()
    durations_s = dict(TASK_DURATIONS_S if durations_s is None else durations_s)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    seq = np.random.SeedSequence(seed)
    subject_seqs = seq.spawn(n_subjects)
    manifest = {"seed": seed, "fs": fs, "session_jitter": session_jitter, "subjects": {}}
    for s_idx, s_seq in enumerate(subject_seqs):
        subject = f"{s_idx + 1:03d}"
        param_seq, *session_seqs = s_seq.spawn(1 + len(sessions))
        params = sampler(np.random.default_rng(param_seq), s_idx)
        manifest["subjects"][subject] = params.to_dict()
        for session, sess_seq in zip(sessions, session_seqs):
            sess_rng_seq, *task_seqs = sess_seq.spawn(1 + len(tasks))
            sess_params = perturb_amplitudes(params, np.random.default_rng(sess_rng_seq), session_jitter)
            out_dir = root / f"subject_{subject}" / f"session_{session}"
            out_dir.mkdir(parents=True, exist_ok=True)
            for task, t_seq in zip(tasks, task_seqs):
                task_seed = int(t_seq.generate_state(1)[0])
                rec, truth = generate_recording(
                    replace(sess_params, seed=task_seed), durations_s[task], fs,
                    origin={"subject": subject, "session": session, "task": task})
                write_recording_csv(out_dir / f"task_{task}.csv", rec)
                truth.write_jsonl(out_dir / f"task_{task}.ground_truth.jsonl")
    with open(root / "synth_params.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return root
