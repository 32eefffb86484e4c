"""Regression and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "mae",
    "r2",
    "rankdata",
    "spearman",
    "CalibrationReport",
    "ece",
    "nll",
    "brier",
    "auroc",
]

NLL_FLOOR = 1e-12


def _pair(a, b, min_len=1):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ValueError(f"need at least {min_len} samples, got {a.size}")
    return a, b


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def r2(pred, truth) -> float:
    pred, truth = _pair(pred, truth, 2)
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for constant targets")
    return float(1 - np.sum((truth - pred) ** 2) / ss_tot)


def rankdata(a) -> np.ndarray:
    """1-based ranks; ties share the mean of the ranks they span."""
    a = np.asarray(a, dtype=float).ravel()
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_a[1:] != sorted_a[:-1]])
    ends = np.r_[starts[1:], a.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(a.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties."""
    a, b = _pair(a, b, 2)
    ra, rb = rankdata(a), rankdata(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt(np.sum(ra**2) * np.sum(rb**2))
    if denom == 0:
        raise ValueError("Spearman correlation is undefined for a constant vector")
    return float(np.clip(np.sum(ra * rb) / denom, -1.0, 1.0))


@dataclass
class CalibrationReport:
    ece: float
    nll: float
    brier: float
    accuracy: float
    bins: int
    bin_confidence: np.ndarray = field(repr=False)
    bin_accuracy: np.ndarray = field(repr=False)
    bin_weight: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "ece": self.ece,
            "nll": self.nll,
            "brier": self.brier,
            "accuracy": self.accuracy,
            "bins": self.bins,
            "nll_floor": NLL_FLOOR,
            "per_bin": [
                {"confidence": float(c), "accuracy": float(a), "weight": float(w)}
                for c, a, w in zip(self.bin_confidence, self.bin_accuracy, self.bin_weight)
            ],
        }


def _check_probs(probs, labels):
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    labels = np.asarray(labels).ravel().astype(int)
    if probs.shape[0] != labels.size:
        raise DimensionError(f"{probs.shape[0]} probability rows but {labels.size} labels")
    if labels.size == 0:
        raise ValueError("no samples")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError(f"labels must lie in 0..{probs.shape[1] - 1}")
    return probs, labels


def nll(probs, labels) -> float:
    probs, labels = _check_probs(probs, labels)
    p = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(p, NLL_FLOOR))))


def brier(probs, labels) -> float:
    probs, labels = _check_probs(probs, labels)
    onehot = np.zeros_like(probs)
    onehot[np.arange(labels.size), labels] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


def ece(probs, labels, bins: int = 15) -> CalibrationReport:
    """Expected calibration error over equal-width confidence bins.

    Also fills in NLL, Brier score and accuracy. Bin ``b`` covers
    ``(b/B, (b+1)/B]``; a confidence of exactly 0 goes to the first bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    probs, labels = _check_probs(probs, labels)
    n = labels.size
    conf = probs.max(axis=1)
    correct = (probs.argmax(axis=1) == labels).astype(float)
    idx = np.clip(np.ceil(conf * bins).astype(int) - 1, 0, bins - 1)
    weight = np.bincount(idx, minlength=bins) / n
    with np.errstate(invalid="ignore"):
        counts = np.bincount(idx, minlength=bins)
        bin_conf = np.bincount(idx, weights=conf, minlength=bins) / counts
        bin_acc = np.bincount(idx, weights=correct, minlength=bins) / counts
    filled = counts > 0
    value = float(np.sum(weight[filled] * np.abs(bin_acc[filled] - bin_conf[filled])))
    return CalibrationReport(
        ece=value,
        nll=nll(probs, labels),
        brier=brier(probs, labels),
        accuracy=float(correct.mean()),
        bins=bins,
        bin_confidence=np.where(filled, bin_conf, np.nan),
        bin_accuracy=np.where(filled, bin_acc, np.nan),
        bin_weight=weight,
    )


def auroc(scores_negative, scores_positive) -> float:
    """Mann-Whitney AUROC: P(pos > neg) + 0.5 P(pos == neg)."""
    neg = np.asarray(scores_negative, dtype=float).ravel()
    pos = np.asarray(scores_positive, dtype=float).ravel()
    if neg.size == 0 or pos.size == 0:
        raise ValueError("both score sets must be nonempty")
    ranks = rankdata(np.concatenate([neg, pos]))
    u = ranks[neg.size:].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (neg.size * pos.size))
