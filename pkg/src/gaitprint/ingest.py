"""Corpus discovery, subject filtering and preprocessing.

Expected layout::

    root/subject_<id>/session_<1|2>/task_<1|3|5>.csv

with the header ``t_ms,acc_x,acc_y,acc_z``. Sample timing comes from the
row index at the configured rate; ``t_ms`` is only checked for consistency.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateSeries, EmptyRecording, MissingRoot, NoSubjectsRemain
from .signals import DEFAULT_SMOOTH_WINDOW, TriaxialSeries, preprocess_recording

logger = logging.getLogger(__name__)

HEADER = ("t_ms", "acc_x", "acc_y", "acc_z")
WALKING_TASKS = (1, 3, 5)
SESSIONS = (1, 2)

_SUBJECT_RE = re.compile(r"^subject_(.+)$")
_SESSION_RE = re.compile(r"^session_(\d+)$")
_TASK_RE = re.compile(r"^task_(\d+)\.csv$")


@dataclass(frozen=True)
class LayoutConfig:
    sample_rate_hz: float = 100.0
    sessions: tuple[int, ...] = SESSIONS
    tasks: tuple[int, ...] = WALKING_TASKS
    min_samples: int = 400
    t_ms_tolerance: float = 1.0


@dataclass(frozen=True)
class RecordingKey:
    subject: str
    session: int
    task: int

    def __post_init__(self):
        if self.task not in WALKING_TASKS:
            raise ValueError(f"task must be one of {WALKING_TASKS}, got {self.task}")
        if self.session not in SESSIONS:
            raise ValueError(f"session must be one of {SESSIONS}, got {self.session}")

    def origin(self) -> dict:
        return {"subject": self.subject, "session": self.session, "task": self.task}


@dataclass
class RecordingEntry:
    key: RecordingKey
    path: str
    n_samples: int = 0
    skipped_rows: int = 0
    timing_violations: int = 0
    error: str | None = None
    series: TriaxialSeries | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"subject": self.key.subject, "session": self.key.session, "task": self.key.task,
                "path": self.path, "n_samples": self.n_samples, "skipped_rows": self.skipped_rows,
                "timing_violations": self.timing_violations, "error": self.error}


@dataclass
class CorpusManifest:
    root: str
    entries: list[RecordingEntry]
    filter_log: list[str] = field(default_factory=list)
    ignored: list[str] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        return sorted({e.key.subject for e in self.entries})

    def entry(self, subject: str, session: int, task: int) -> RecordingEntry | None:
        for e in self.entries:
            if (e.key.subject, e.key.session, e.key.task) == (subject, session, task):
                return e
        return None

    def to_json(self) -> str:
        return json.dumps({"root": self.root, "entries": [e.to_dict() for e in self.entries],
                           "filter_log": self.filter_log, "ignored": self.ignored},
                          indent=2, sort_keys=True)


def read_recording(path: Path, key: RecordingKey, cfg: LayoutConfig = LayoutConfig()) -> RecordingEntry:
    """Parse one CSV file. Malformed rows are skipped and counted, not fatal."""
    entry = RecordingEntry(key, str(path))
    rows = []
    t_vals = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            entry.error = f"bad header {header!r}, expected {','.join(HEADER)}"
            return entry
        for lineno, row in enumerate(reader, start=2):
            try:
                if len(row) != 4:
                    raise ValueError(f"{len(row)} columns")
                t, x, y, z = (float(c) for c in row)
                if not all(math.isfinite(v) for v in (t, x, y, z)):
                    raise ValueError("non-finite value")
            except ValueError as exc:
                entry.skipped_rows += 1
                logger.warning("%s:%d skipped malformed row (%s)", path, lineno, exc)
                continue
            rows.append((x, y, z))
            t_vals.append(t)
    entry.n_samples = len(rows)
    if not rows:
        entry.error = str(EmptyRecording(f"{path} has no valid rows"))
        return entry
    step = 1000.0 / cfg.sample_rate_hz
    if len(t_vals) > 1:
        gaps = np.diff(np.asarray(t_vals))
        entry.timing_violations = int(np.count_nonzero(np.abs(gaps - step) > cfg.t_ms_tolerance))
        if entry.timing_violations:
            logger.warning("%s: %d t_ms steps deviate from %.3g ms", path, entry.timing_violations, step)
    data = np.asarray(rows)
    entry.series = TriaxialSeries(cfg.sample_rate_hz, data[:, 0], data[:, 1], data[:, 2], key.origin())
    return entry


def load_corpus(root, cfg: LayoutConfig = LayoutConfig()) -> CorpusManifest:
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"corpus root {root} does not exist")
    entries, ignored = [], []
    for subj_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        m = _SUBJECT_RE.match(subj_dir.name)
        if not m:
            ignored.append(subj_dir.name)
            continue
        subject = m.group(1)
        for sess_dir in sorted(p for p in subj_dir.iterdir() if p.is_dir()):
            ms = _SESSION_RE.match(sess_dir.name)
            if not ms or int(ms.group(1)) not in cfg.sessions:
                ignored.append(f"{subj_dir.name}/{sess_dir.name}")
                continue
            for f in sorted(sess_dir.iterdir()):
                mt = _TASK_RE.match(f.name)
                if not mt:
                    if not f.name.endswith(".ground_truth.jsonl"):
                        ignored.append(str(f.relative_to(root)))
                    continue
                task = int(mt.group(1))
                if task not in cfg.tasks:
                    ignored.append(str(f.relative_to(root)))
                    continue
                key = RecordingKey(subject, int(ms.group(1)), task)
                entry = read_recording(f, key, cfg)
                entry.path = str(f.relative_to(root))
                entries.append(entry)
    return CorpusManifest(str(root), entries, [], ignored)


def subject_exclusions(m: CorpusManifest, cfg: LayoutConfig = LayoutConfig()) -> dict[str, str]:
    reasons = {}
    for subject in m.subjects:
        for session in cfg.sessions:
            for task in cfg.tasks:
                e = m.entry(subject, session, task)
                if e is None or e.error is not None:
                    what = "missing" if e is None else e.error
                    reasons.setdefault(subject, f"incomplete: session {session} task {task} {what}")
                elif e.n_samples < cfg.min_samples:
                    reasons.setdefault(subject, f"short: session {session} task {task} has "
                                                f"{e.n_samples} < {cfg.min_samples} samples")
    return reasons


def filter_incomplete_subjects(m: CorpusManifest, cfg: LayoutConfig = LayoutConfig()) -> CorpusManifest:
    """Drop subjects lacking any session/task recording or with one under ``min_samples``."""
    reasons = subject_exclusions(m, cfg)
    kept = [e for e in m.entries if e.key.subject not in reasons]
    log = list(m.filter_log) + [f"removed subject {s}: {r}" for s, r in sorted(reasons.items())]
    if not kept:
        raise NoSubjectsRemain("every subject was removed by the filters")
    return replace(m, entries=kept, filter_log=log)


@dataclass
class PreprocessedCorpus:
    recordings: list[TriaxialSeries]
    excluded: list[str]


def preprocess_corpus(m: CorpusManifest, window_len: int = DEFAULT_SMOOTH_WINDOW) -> PreprocessedCorpus:
    """Z-score then smooth every axis of every retained recording."""
    out, excluded = [], []
    for e in m.entries:
        if e.series is None:
            continue
        try:
            out.append(preprocess_recording(e.series, window_len))
        except DegenerateSeries as exc:
            msg = f"{e.path}: {exc}"
            excluded.append(msg)
            logger.warning("excluded %s", msg)
    return PreprocessedCorpus(out, excluded)
