"""Anchors, pretext encodings and anchor-marginalized inference.

A Delta-model never sees a raw input ``x``. It sees the tuple
``[anchor || encode(x, anchor)]`` and is trained to predict the target of
``x`` from it regardless of which anchor was drawn. At inference the same
``x`` is paired with ``K`` anchors and the spread of the ``K`` predictions is
the uncertainty estimate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import DimensionError, NotFittedError

__all__ = [
    "EncodingScheme",
    "AnchorPrior",
    "AnchoredInput",
    "PredictionSummary",
    "encode",
    "decode",
    "encode_rows",
    "sample_anchors",
    "marginalize",
    "marginalized_predict",
    "summarize",
    "scale_logits",
    "softmax",
    "predictive_entropy",
]


class EncodingScheme(str, Enum):
    """Pretext encodings.

    ``IDENTITY`` keeps ``x`` as is and appends the anchor as a distractor,
    ``SINGLE`` stores ``x - r`` and ``DOUBLE`` stores ``x - r1 - r2``.
    """

    IDENTITY = "identity"
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def anchors_per_row(self) -> int:
        return 2 if self is EncodingScheme.DOUBLE else 1

    def width(self, dim: int) -> int:
        """Length of an anchored row built from a ``dim``-dimensional input."""
        return (self.anchors_per_row + 1) * dim

    @classmethod
    def parse(cls, value) -> "EncodingScheme":
        if isinstance(value, cls):
            return value
        aliases = {"x": "identity", "x-r": "single", "x-r1-r2": "double"}
        key = str(value).strip().lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class AnchoredInput:
    """One tuple fed to a Delta-model."""

    anchors: tuple
    encoded: np.ndarray

    @property
    def anchor(self) -> np.ndarray:
        return self.anchors[0]

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([*self.anchors, self.encoded])


@dataclass(frozen=True)
class PredictionSummary:
    mean: np.ndarray
    variance: np.ndarray
    per_anchor: np.ndarray

    @property
    def total_variance(self) -> float:
        return float(self.variance.sum())

    @property
    def k(self) -> int:
        return self.per_anchor.shape[0]


def _as_vector(x, name="x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def encode(x, anchors, scheme=EncodingScheme.SINGLE) -> list[AnchoredInput]:
    """Pair ``x`` with every anchor (every anchor pair for ``DOUBLE``)."""
    scheme = EncodingScheme.parse(scheme)
    x = _as_vector(x)
    anchors = [np.asarray(a, dtype=float).reshape(-1) for a in anchors]
    if not anchors:
        raise ValueError("anchor list is empty")
    for i, a in enumerate(anchors):
        if a.shape != x.shape:
            raise DimensionError(
                f"anchor {i} has dimension {a.shape[0]}, expected {x.shape[0]}"
            )
    if scheme is EncodingScheme.DOUBLE:
        if len(anchors) % 2:
            raise ValueError(
                f"DOUBLE encoding consumes anchors pairwise; got {len(anchors)}"
            )
        return [
            AnchoredInput((r1, r2), x - r1 - r2)
            for r1, r2 in zip(anchors[::2], anchors[1::2])
        ]
    if scheme is EncodingScheme.SINGLE:
        return [AnchoredInput((r,), x - r) for r in anchors]
    return [AnchoredInput((r,), x.copy()) for r in anchors]


def decode(a: AnchoredInput, scheme=EncodingScheme.SINGLE) -> np.ndarray:
    scheme = EncodingScheme.parse(scheme)
    if len(a.anchors) != scheme.anchors_per_row:
        raise DimensionError(
            f"{scheme.value} expects {scheme.anchors_per_row} anchor(s), "
            f"got {len(a.anchors)}"
        )
    for r in a.anchors:
        if r.shape != a.encoded.shape:
            raise DimensionError("anchor and encoded parts differ in dimension")
    if scheme is EncodingScheme.IDENTITY:
        return a.encoded.copy()
    out = a.encoded
    for r in a.anchors:
        out = r + out
    return out


def encode_rows(X, anchors, scheme=EncodingScheme.SINGLE) -> np.ndarray:
    """Vectorized :func:`encode`: one anchored row per (x, anchor) pair.

    Parameters
    ----------
    X : array of shape (n, d)
    anchors : array of shape (n, d), or (n, 2, d) for ``DOUBLE``
    """
    scheme = EncodingScheme.parse(scheme)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.asarray(anchors, dtype=float)
    if scheme is EncodingScheme.DOUBLE:
        if R.ndim != 3 or R.shape[1] != 2 or R.shape[0] != X.shape[0] or R.shape[2] != X.shape[1]:
            raise DimensionError(
                f"DOUBLE anchors must have shape {(X.shape[0], 2, X.shape[1])}, got {R.shape}"
            )
        r1, r2 = R[:, 0], R[:, 1]
        return np.hstack([r1, r2, X - r1 - r2])
    R = np.atleast_2d(R)
    if R.shape != X.shape:
        raise DimensionError(f"anchors must have shape {X.shape}, got {R.shape}")
    if scheme is EncodingScheme.SINGLE:
        return np.hstack([R, X - R])
    return np.hstack([R, X])


@dataclass(frozen=True)
class AnchorPrior:
    """Sampling source for anchors.

    ``kind`` is ``"train"`` (resample stored training inputs with
    replacement), ``"normal"`` (standard normal of dimension ``dim``) or
    ``"external"`` (resample an arbitrary dataset with replacement).
    """

    kind: str
    data: np.ndarray | None = field(default=None, repr=False)
    dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("train", "normal", "external"):
            raise ValueError(f"unknown anchor prior kind {self.kind!r}")
        if self.kind == "normal":
            if self.dim is None or self.dim < 1:
                raise ValueError("standard normal prior needs dim >= 1")
        else:
            if self.data is None:
                raise ValueError(f"{self.kind} prior needs a backing dataset")
            data = np.array(self.data, dtype=float, ndmin=2)
            if data.shape[0] == 0 or data.size == 0:
                raise ValueError(f"{self.kind} prior has an empty backing dataset")
            data.setflags(write=False)
            object.__setattr__(self, "data", data)
            object.__setattr__(self, "dim", data.shape[1])

    @classmethod
    def train_distribution(cls, X, seed=0):
        return cls("train", data=X, seed=seed)

    @classmethod
    def standard_normal(cls, dim, seed=0):
        return cls("normal", dim=int(dim), seed=seed)

    @classmethod
    def external(cls, X, seed=0):
        return cls("external", data=X, seed=seed)

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        h.update(str(self.dim).encode())
        if self.data is not None:
            h.update(np.ascontiguousarray(self.data).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self, include_data=True) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "seed": self.seed}
        if include_data and self.data is not None:
            out["data"] = self.data.tolist()
        out["fingerprint"] = self.fingerprint()
        return out

    @classmethod
    def from_dict(cls, d):
        data = d.get("data")
        return cls(d["kind"], data=None if data is None else np.asarray(data),
                   dim=d.get("dim"), seed=d.get("seed", 0))


def sample_anchors(prior: AnchorPrior, k: int, rng=None) -> np.ndarray:
    """Draw ``k`` anchors; returns an array of shape (k, d).

    With ``rng=None`` a generator seeded from ``prior.seed`` is used, so
    repeated calls return the same anchors.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if rng is None:
        rng = np.random.default_rng(prior.seed)
    if prior.kind == "normal":
        return rng.standard_normal((k, prior.dim))
    idx = rng.integers(0, prior.data.shape[0], size=k)
    return prior.data[idx].copy()


def _check_model(model, dim):
    if not getattr(model, "is_fitted", True):
        raise NotFittedError("model has not been trained")
    expected = getattr(model, "input_dim", None)
    if expected is not None and expected != dim:
        raise DimensionError(f"model expects inputs of dimension {expected}, got {dim}")


def marginalize(model, X, anchors, output=None) -> np.ndarray:
    """Evaluate ``model`` on every (x, anchor) pair.

    ``anchors`` has shape (K, d) (or (K, 2, d) for ``DOUBLE``) and is shared
    by every row of ``X``. Returns per-anchor predictions of shape (n, K, k).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    _check_model(model, d)
    scheme = EncodingScheme.parse(model.scheme)
    R = np.asarray(anchors, dtype=float)
    K = R.shape[0]
    if K < 1:
        raise ValueError("need at least one anchor")
    Xr = np.repeat(X, K, axis=0)
    Rr = np.tile(R, (n,) + (1,) * (R.ndim - 1))
    rows = encode_rows(Xr, Rr, scheme)
    if output is None:
        pred = model.predict_anchored(rows)
    else:
        pred = model.predict_anchored(rows, output=output)
    pred = np.asarray(pred, dtype=float)
    return pred.reshape(n, K, -1)


def summarize(per_anchor) -> tuple[np.ndarray, np.ndarray]:
    """Anchor mean and population variance over axis -2."""
    per_anchor = np.asarray(per_anchor, dtype=float)
    mean = per_anchor.mean(axis=-2)
    var = ((per_anchor - np.expand_dims(mean, -2)) ** 2).mean(axis=-2)
    # the summed mean can be an ulp off for identical entries; make those exact
    same = per_anchor.max(axis=-2) == per_anchor.min(axis=-2)
    var[same] = 0.0
    return mean, var


def draw_anchor_set(prior: AnchorPrior, k: int, scheme, rng=None) -> np.ndarray:
    """``k`` anchors shaped for ``scheme`` ((k, d) or (k, 2, d))."""
    scheme = EncodingScheme.parse(scheme)
    if scheme is EncodingScheme.DOUBLE:
        return sample_anchors(prior, 2 * k, rng).reshape(k, 2, -1)
    return sample_anchors(prior, k, rng)


def marginalized_predict(model, x, prior: AnchorPrior, k: int, rng=None,
                         output=None) -> PredictionSummary:
    """Anchor-marginalized mean and variance for a single input ``x``."""
    x = _as_vector(x)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_model(model, x.shape[0])
    anchors = draw_anchor_set(prior, k, model.scheme, rng)
    per_anchor = marginalize(model, x[None, :], anchors, output=output)[0]
    mean, var = summarize(per_anchor)
    return PredictionSummary(mean=mean, variance=var, per_anchor=per_anchor)


def scale_logits(mean_logits, variance, t_min=0.05, scalar=False) -> np.ndarray:
    """Shrink logits by ``t = clip(0.5 - variance, t_min, 0.5)``.

    Works on a single logit vector or a batch (n, C). With ``scalar=True`` one
    ``t`` per row is computed from the mean per-logit variance.
    """
    mean_logits = np.asarray(mean_logits, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if mean_logits.shape != variance.shape:
        raise DimensionError(
            f"logits {mean_logits.shape} and variance {variance.shape} differ in shape"
        )
    if np.any(variance < 0) or not np.all(np.isfinite(variance)):
        raise ValueError("variance must be finite and non-negative")
    if scalar:
        v = variance.mean(axis=-1, keepdims=True)
    else:
        v = variance
    t = np.clip(0.5 - v, t_min, 0.5)
    return mean_logits * t


def softmax(logits, axis=-1) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def predictive_entropy(probs, atol=1e-6):
    """Shannon entropy in nats; accepts one distribution or a batch (n, C)."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > atol):
        raise ValueError("probabilities must be non-negative and sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = -terms.sum(axis=-1)
    return float(h) if h.ndim == 0 else h
