"""Two-class linear verifiers: LDA and a primal linear SVM.

Label 0 is the genuine subject, label 1 the impostor. Both models score a
sample as ``weight @ x + bias`` (after optional standardization), so a
positive score leans impostor.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit

from .errors import ClassMissing, DimMismatch, NonFinite, SingularCovariance

logger = logging.getLogger(__name__)

MODEL_FORMAT = "gaitprint-model/1"


@dataclass(frozen=True)
class LabeledSet:
    samples: np.ndarray
    labels: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.labels).astype(int).reshape(-1)
        if X.shape[0] != y.size:
            raise DimMismatch(f"{X.shape[0]} samples but {y.size} labels")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 (genuine) or 1 (impostor)")
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.labels.size

    def require_both_classes(self, min_per_class: int = 1) -> None:
        counts = np.bincount(self.labels, minlength=2)
        if counts.min() < min_per_class:
            raise ClassMissing(f"need >= {min_per_class} samples per class, got {counts.tolist()}")

    def subset(self, idx) -> "LabeledSet":
        idx = np.asarray(idx, dtype=int)
        prov = tuple(self.provenance[i] for i in idx) if self.provenance else ()
        return LabeledSet(self.samples[idx], self.labels[idx], prov)


def balance(data: LabeledSet, rng: np.random.Generator) -> LabeledSet:
    """Subsample the larger class down to the size of the smaller one.

    Selected indices keep their original order.
    """
    idx0 = np.flatnonzero(data.labels == 0)
    idx1 = np.flatnonzero(data.labels == 1)
    k = min(idx0.size, idx1.size)
    if idx0.size > k:
        idx0 = np.sort(rng.choice(idx0, k, replace=False))
    if idx1.size > k:
        idx1 = np.sort(rng.choice(idx1, k, replace=False))
    return data.subset(np.concatenate((idx0, idx1)))


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        sd = X.std(axis=0)
        # constant columns are centered but left unscaled
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}


class _LinearModel:
    weight: np.ndarray
    bias: float
    scaler: Scaler | None

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X.reshape(1, -1) if single else X
        if X.shape[1] != self.weight.size:
            raise DimMismatch(f"model expects {self.weight.size} features, got {X.shape[1]}")
        if self.scaler is not None:
            X = self.scaler.transform(X)
        out = X @ self.weight + self.bias
        return out[0] if single else out


@dataclass(frozen=True)
class LdaModel(_LinearModel):
    weight: np.ndarray
    bias: float
    class_means: tuple[np.ndarray, np.ndarray]
    pooled_covariance: np.ndarray
    regularization: float
    scaler: Scaler | None = None
    priors: tuple[float, float] = (0.5, 0.5)

    kind = "lda"


@dataclass(frozen=True)
class SvmModel(_LinearModel):
    weight: np.ndarray
    bias: float
    c_param: float
    scaler: Scaler | None = None
    training_meta: dict = field(default_factory=dict)

    kind = "svm"


def pooled_covariance(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Within-class scatter of both classes divided by ``n - 2``."""
    d = X.shape[1]
    scatter = np.zeros((d, d))
    for label in (0, 1):
        Xc = X[y == label]
        centered = Xc - Xc.mean(axis=0)
        scatter += centered.T @ centered
    return scatter / (X.shape[0] - 2)


def lda_train(data: LabeledSet, reg: float | None = None, priors="equal",
              standardize: bool = False) -> LdaModel:
    """Fit a two-class LDA with a pooled covariance.

    ``reg=None`` uses ``1e-6 * trace(cov) / d``; ``priors`` is ``"equal"``,
    ``"empirical"`` or an explicit ``(p0, p1)`` pair.
    """
    data.require_both_classes(2)
    X, y = data.samples, data.labels
    n, d = X.shape
    if d > n:
        logger.warning("LDA trained with more features (%d) than samples (%d)", d, n)
    scaler = Scaler.fit(X) if standardize else None
    if scaler is not None:
        X = scaler.transform(X)
    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    cov = pooled_covariance(X, y)
    if reg is None:
        reg = 1e-6 * np.trace(cov) / d
    try:
        factor = scipy.linalg.cho_factor(cov + reg * np.eye(d), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"regularized pooled covariance is not positive definite (reg={reg})") from exc
    w = scipy.linalg.cho_solve(factor, mu1 - mu0)

    if isinstance(priors, str):
        if priors == "equal":
            priors = (0.5, 0.5)
        elif priors == "empirical":
            priors = (float(np.mean(y == 0)), float(np.mean(y == 1)))
        else:
            raise ValueError(f"unknown priors {priors!r}")
    bias = -float(w @ (mu0 + mu1)) / 2 + math.log(priors[1] / priors[0])
    return LdaModel(w, bias, (mu0, mu1), cov, float(reg), scaler, tuple(priors))


@dataclass(frozen=True)
class SvmConfig:
    seed: int
    c_param: float = 1.0
    epochs: int = 200
    standardize: bool = True

    def __post_init__(self):
        if self.c_param <= 0:
            raise ValueError("c_param must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@njit(cache=True)
def _pegasos(X, y, lam, order, w_bound, b_bound):
    n, d = X.shape
    total = order.size
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    n_avg = 0
    avg_start = total // 2
    for t in range(total):
        i = order[t]
        eta = 1.0 / (lam * (t + 1))
        margin = b
        for k in range(d):
            margin += w[k] * X[i, k]
        margin *= y[i]
        shrink = 1.0 - eta * lam
        for k in range(d):
            w[k] *= shrink
        if margin < 1.0:
            for k in range(d):
                w[k] += eta * y[i] * X[i, k]
            b += eta * y[i]
        norm = 0.0
        for k in range(d):
            norm += w[k] * w[k]
        norm = math.sqrt(norm)
        if norm > w_bound:
            for k in range(d):
                w[k] *= w_bound / norm
        if b > b_bound:
            b = b_bound
        elif b < -b_bound:
            b = -b_bound
        if t >= avg_start:
            for k in range(d):
                w_sum[k] += w[k]
            b_sum += b
            n_avg += 1
    return w_sum / n_avg, b_sum / n_avg


def svm_objective(weight, bias, X, labels, c_param) -> tuple[float, float]:
    """Return ``(0.5*|w|^2 + C*sum(hinge), mean hinge)`` with labels in {0, 1}."""
    y = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - y * (X @ weight + bias))
    return 0.5 * float(weight @ weight) + c_param * float(hinge.sum()), float(hinge.mean())


def svm_train(data: LabeledSet, cfg: SvmConfig) -> SvmModel:
    """Minimize the soft-margin hinge objective by stochastic subgradient steps.

    Steps follow ``1 / (lambda * t)`` with ``lambda = 1 / (C * n)``; the
    returned model is the average of the second half of the iterates. The
    bias is not regularized.
    """
    data.require_both_classes(1)
    X = data.samples
    scaler = Scaler.fit(X) if cfg.standardize else None
    if scaler is not None:
        X = scaler.transform(X)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.where(data.labels == 1, 1.0, -1.0)
    n = X.shape[0]
    lam = 1.0 / (cfg.c_param * n)
    rng = np.random.default_rng(cfg.seed)
    order = np.concatenate([rng.permutation(n) for _ in range(cfg.epochs)]).astype(np.int64)
    w_bound = 1.0 / math.sqrt(lam)
    b_bound = 1.0 + w_bound * float(np.sqrt((X * X).sum(axis=1)).max())
    w, b = _pegasos(X, y, lam, order, w_bound, b_bound)
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise NonFinite("SVM training diverged")
    objective, mean_hinge = svm_objective(w, b, X, data.labels, cfg.c_param)
    meta = {"epochs": cfg.epochs, "seed": cfg.seed, "objective": objective,
            "mean_hinge": mean_hinge, "n_train": n}
    return SvmModel(w, float(b), cfg.c_param, scaler, meta)


def lda_score(m: LdaModel, x) -> float | np.ndarray:
    return m.decision(x)


def svm_score(m: SvmModel, x) -> float | np.ndarray:
    return m.decision(x)


def predict(score, threshold: float = 0.0):
    """1 (impostor) where score exceeds the threshold, else 0."""
    out = (np.asarray(score) > threshold).astype(int)
    return int(out) if out.ndim == 0 else out


def model_to_dict(m) -> dict:
    d = {"format": MODEL_FORMAT, "type": m.kind, "weight": m.weight.tolist(), "bias": m.bias,
         "scaler": m.scaler.to_dict() if m.scaler is not None else None}
    if isinstance(m, LdaModel):
        d["meta"] = {"class_means": [mu.tolist() for mu in m.class_means],
                     "pooled_covariance": m.pooled_covariance.tolist(),
                     "regularization": m.regularization, "priors": list(m.priors)}
    else:
        d["meta"] = {"c_param": m.c_param, **m.training_meta}
    return d


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    scaler = None
    if d.get("scaler"):
        scaler = Scaler(np.asarray(d["scaler"]["mean"]), np.asarray(d["scaler"]["scale"]))
    w = np.asarray(d["weight"], dtype=float)
    meta = d["meta"]
    if d["type"] == "lda":
        means = tuple(np.asarray(mu) for mu in meta["class_means"])
        return LdaModel(w, float(d["bias"]), means, np.asarray(meta["pooled_covariance"]),
                        float(meta["regularization"]), scaler, tuple(meta["priors"]))
    if d["type"] == "svm":
        meta = dict(meta)
        c = meta.pop("c_param")
        return SvmModel(w, float(d["bias"]), c, scaler, meta)
    raise ValueError(f"unknown model type {d['type']!r}")


def dumps_model(m) -> str:
    return json.dumps(model_to_dict(m), sort_keys=True)


def loads_model(s: str):
    return model_from_dict(json.loads(s))
