"""Recording-to-features glue shared by the CLI and the tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .detector import Detection, DetectionDiagnostics, DetectorConfig, detect_complexes
from .errors import SeriesTooShort
from .features import FeatureVector, extract_features
from .signals import AXES, TriaxialSeries

logger = logging.getLogger(__name__)


@dataclass
class CorpusDetection:
    # (origin, sample rate, detection) per recording
    detections: list[tuple[dict, float, Detection]] = field(default_factory=list)
    diagnostics: DetectionDiagnostics = field(default_factory=DetectionDiagnostics)
    too_short: list[dict] = field(default_factory=list)


def detect_corpus(recordings: list[TriaxialSeries], cfg: DetectorConfig = DetectorConfig()) -> CorpusDetection:
    out = CorpusDetection()
    for rec in recordings:
        try:
            det = detect_complexes(rec, cfg)
        except SeriesTooShort as exc:
            logger.warning("%s skipped: %s", rec.origin, exc)
            out.too_short.append(dict(rec.origin))
            continue
        out.detections.append((dict(rec.origin), rec.sample_rate_hz, det))
        out.diagnostics.merge(det.diagnostics)
    return out


def detection_features(origin: dict, det: Detection, fs: float) -> list[FeatureVector]:
    vectors = []
    for axis_id in AXES:
        for k, c in enumerate(det.complexes[axis_id]):
            vectors.append(extract_features(c, fs, {**origin, "complex": k}))
    return vectors


def corpus_features(recordings: list[TriaxialSeries], cfg: DetectorConfig = DetectorConfig()):
    """Detect and featurize every recording; returns ``(vectors, CorpusDetection)``."""
    cd = detect_corpus(recordings, cfg)
    vectors = []
    for origin, fs, det in cd.detections:
        vectors.extend(detection_features(origin, det, fs))
    return vectors, cd
