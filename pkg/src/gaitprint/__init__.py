"""PQRST complex detection and pairwise gait authentication for triaxial accelerometer data."""

__version__ = "0.1.0"

from .classifiers import LabeledSet, LdaModel, SvmConfig, SvmModel, lda_train, predict, svm_train
from .detector import (DetectorConfig, ExtremumPoint, PqrstComplex, backtrack_p, detect_complexes,
                       detect_p_anchors, trace_qrst)
from .evaluation import EvalTable, ProtocolConfig, compute_ccr, compute_eer, run_protocol
from .features import FeatureSet, FeatureVector, extract_features, feature_histograms, select_features
from .signals import AxisSeries, TriaxialSeries, smooth_moving_average, zscore_normalize

__all__ = [
    "AxisSeries", "TriaxialSeries", "zscore_normalize", "smooth_moving_average",
    "DetectorConfig", "ExtremumPoint", "PqrstComplex", "detect_p_anchors", "backtrack_p",
    "trace_qrst", "detect_complexes",
    "FeatureSet", "FeatureVector", "extract_features", "select_features", "feature_histograms",
    "LabeledSet", "LdaModel", "SvmModel", "SvmConfig", "lda_train", "svm_train", "predict",
    "EvalTable", "ProtocolConfig", "compute_ccr", "compute_eer", "run_protocol",
]
