"""Model-based inversion: search an inverse model's latent space against a
forward Delta-model, optionally weighting the target error by uncertainty.

The objective treats the forward model's anchor mean and spread as the
location ``mu`` and scale ``b`` of a Laplace distribution:

    |mu - y*| / b + log b

and the latent vector is confined to the uniform prior's box [-1, 1]^L.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoding import AnchorPrior, EncodingScheme, encode_rows
from .functions import Dataset
from .learners.mlp import Adam, MlpConfig, MLPEstimator, fit_mlp
from .learners.models import DeltaModel, train_anchored_mlp

__all__ = [
    "MboTask",
    "InverseModel",
    "LatentResult",
    "MboEntry",
    "MboResult",
    "thickness",
    "shape_basis",
    "sample_mbo_inputs",
    "make_mbo_dataset",
    "train_forward",
    "train_inverse",
    "laplace_objective",
    "mbo_objective",
    "optimize_latent",
    "run_mbo",
]

B_FLOOR = 1e-6


def thickness(X, sharpness=4.0):
    """Synthetic thickness: sum of sigmoid(sharpness * x_i) over coordinates."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.sum(1.0 / (1.0 + np.exp(-sharpness * X)), axis=1)


@dataclass
class MboTask:
    input_dim: int = 16
    latent_dim: int = 8
    n_train: int = 2000
    cap_fraction: float = 0.6
    target_fractions: tuple = (0.4, 0.7, 0.8)
    shape_dim: int = 4
    shape_scale: float = 0.3
    basis_seed: int = 0

    @property
    def cap(self) -> float:
        return self.cap_fraction * self.input_dim

    @property
    def targets(self) -> list:
        return [f * self.input_dim for f in self.target_fractions]

    def to_dict(self):
        d = asdict(self)
        d["target_fractions"] = list(self.target_fractions)
        return d


def shape_basis(task: MboTask) -> np.ndarray:
    """Fixed orthonormal directions orthogonal to the all-ones vector, shape (d, m)."""
    d = task.input_dim
    m = min(task.shape_dim, d - 1)
    rng = np.random.default_rng(task.basis_seed)
    A = np.column_stack([np.ones(d), rng.normal(size=(d, m))])
    Q, _ = np.linalg.qr(A)
    return Q[:, 1:m + 1]


def sample_mbo_inputs(task: MboTask, n, rng) -> np.ndarray:
    """Inputs near a low-dimensional manifold: ``x = s 1 + B u``.

    ``s ~ U[-1, 1]`` sets the overall level (and so mostly the thickness),
    ``u ~ U[-1, 1]^m`` adds shape variation along the fixed basis ``B``,
    scaled so each coordinate's shape term has standard deviation
    ``shape_scale``.
    """
    B = shape_basis(task)
    d, m = B.shape
    s = rng.uniform(-1, 1, (n, 1))
    X = np.repeat(s, d, axis=1)
    if m:
        u = rng.uniform(-1, 1, (n, m))
        X += task.shape_scale * np.sqrt(3.0 * d / m) * (u @ B.T)
    return X


def make_mbo_dataset(task: MboTask, seed=0) -> Dataset:
    """Manifold inputs, keeping only rows with thickness <= cap."""
    rng = np.random.default_rng(seed)
    kept_x, kept_y, total = [], [], 0
    while total < task.n_train:
        X = sample_mbo_inputs(task, 2 * task.n_train, rng)
        y = thickness(X)
        keep = y <= task.cap
        kept_x.append(X[keep])
        kept_y.append(y[keep])
        total += int(keep.sum())
    X = np.vstack(kept_x)[: task.n_train]
    y = np.concatenate(kept_y)[: task.n_train]
    return Dataset(X, y)


class InverseModel:
    """Generator ``g(y, z) -> x`` with ``z`` restricted to [-1, 1]^L."""

    def __init__(self, estimator: MLPEstimator, latent_dim, y_mean, y_std):
        self.estimator = estimator
        self.latent_dim = int(latent_dim)
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)

    def _inputs(self, y, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.latent_dim:
            raise ValueError(f"latent vectors must have {self.latent_dim} entries")
        if np.any(np.abs(Z) > 1.0):
            raise ValueError("latent vector lies outside the prior box [-1, 1]")
        yv = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1, 1), (Z.shape[0], 1))
        return np.hstack([(yv - self.y_mean) / self.y_std, Z])

    def generate(self, y, Z):
        return self.estimator.predict(self._inputs(y, Z))

    def latent_gradient(self, y, Z, grad_x):
        """Pull a gradient on generated inputs back to the latent vectors."""
        rows = self._inputs(y, Z)
        g = self.estimator.net.input_gradient(rows, grad_x * self.estimator.y_std)
        return g[:, 1:]


def train_inverse(ds: Dataset, cfg: MlpConfig | None = None, latent_dim=8) -> InverseModel:
    """Fit ``g(y, z)`` to reconstruct ``x`` with ``z`` redrawn every step."""
    if ds is None or len(ds) == 0:
        raise ValueError("cannot train an inverse model on an empty dataset")
    cfg = cfg or MlpConfig(hidden_layers=(128, 128), activation="leaky_relu", epochs=100,
                           learning_rate=1e-4)
    y = ds.targets[:, 0]
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    y_in = ((y - y_mean) / y_std)[:, None]

    def build_rows(idx, rng):
        return np.hstack([y_in[idx], rng.uniform(-1, 1, (idx.size, latent_dim))])

    est = fit_mlp(y_in, ds.inputs, cfg, ds.dim, "regression", build_rows)
    return InverseModel(est, latent_dim, y_mean, y_std)


def train_forward(ds: Dataset, cfg: MlpConfig | None = None, scheme="single") -> DeltaModel:
    cfg = cfg or MlpConfig(hidden_layers=(128, 128), epochs=100, learning_rate=1e-4)
    return train_anchored_mlp(ds, cfg, scheme, AnchorPrior.train_distribution(ds.inputs))


def laplace_objective(mu, b, y_star):
    """``|mu - y*| exp(-v) + v`` with ``v = log b``; b floored at 1e-6."""
    b = np.maximum(np.asarray(b, dtype=float), B_FLOOR)
    return np.abs(np.asarray(mu, dtype=float) - y_star) / b + np.log(b)


def _forward_stats(fwd: DeltaModel, X, anchors, keep=False):
    """Anchor predictions of ``fwd`` for every row of X: shape (n, K)."""
    n, K = X.shape[0], anchors.shape[0]
    Xr = np.repeat(X, K, axis=0)
    Rr = np.tile(anchors, (n,) + (1,) * (anchors.ndim - 1))
    rows = encode_rows(Xr, Rr, fwd.scheme)
    est = fwd.estimator
    out, cache = est.net.forward(rows, keep=True)
    f = (out * est.y_std + est.y_mean)[:, 0].reshape(n, K)
    return (f, cache) if keep else f


def mbo_objective(fwd: DeltaModel, g: InverseModel, y_star, z, anchors, weighted=True):
    """Objective value at a single latent vector ``z``."""
    X = g.generate(y_star, np.asarray(z, dtype=float)[None, :])
    f = _forward_stats(fwd, X, np.asarray(anchors, dtype=float))[0]
    mu = f.mean()
    b = np.sqrt(np.mean((f - mu) ** 2))
    if not weighted:
        return float(abs(mu - y_star))
    return float(laplace_objective(mu, b, y_star))


def _value_and_grad(fwd, g, y_star, Z, anchors, weighted):
    K = anchors.shape[0]
    n = Z.shape[0]
    d = fwd.input_dim
    X = g.generate(y_star, Z)
    f, cache = _forward_stats(fwd, X, anchors, keep=True)
    mu = f.mean(axis=1)
    var = np.mean((f - mu[:, None]) ** 2, axis=1)
    raw_b = np.sqrt(var)
    b = np.maximum(raw_b, B_FLOOR)
    err = mu - y_star
    sign = np.sign(err)
    if weighted:
        value = np.abs(err) / b + np.log(b)
        d_mu = sign / b
        d_b = np.where(raw_b > B_FLOOR, -np.abs(err) / b**2 + 1.0 / b, 0.0)
        d_var = d_b / (2 * b)
        d_f = d_mu[:, None] / K + d_var[:, None] * 2 * (f - mu[:, None]) / K
    else:
        value = np.abs(err)
        d_f = np.repeat(sign[:, None] / K, K, axis=1)
    est = fwd.estimator
    grad_out = (d_f.reshape(-1, 1) * est.y_std)
    g_rows = est.net.input_gradient(cache[0], grad_out, cache)
    enc_start = fwd.scheme.anchors_per_row * d
    dX = g_rows[:, enc_start:].reshape(n, K, d).sum(axis=1)
    dZ = g.latent_gradient(y_star, Z, dX)
    return value, dZ, mu, b


@dataclass
class LatentResult:
    z: np.ndarray
    x: np.ndarray
    mu: float
    b: float
    objective: float
    achieved: float
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "z": self.z.tolist(),
            "x": self.x.tolist(),
            "mu": self.mu,
            "b": self.b,
            "objective": self.objective,
            "achieved": self.achieved,
            "trace": self.trace,
        }


@dataclass
class MboEntry:
    target: float
    weighted: LatentResult
    vanilla: LatentResult

    def to_dict(self):
        return {"target": self.target, "weighted": self.weighted.to_dict(),
                "vanilla": self.vanilla.to_dict()}


def _search(fwd, g, y_star, Z0, anchors, iters, step, weighted, truth, trace_every):
    Z = Z0.copy()
    opt = Adam(Z.size, lr=step)
    alive = np.ones(Z.shape[0], dtype=bool)
    trace = []
    flat = Z.reshape(-1)
    for it in range(iters):
        value, dZ, _, _ = _value_and_grad(fwd, g, y_star, Z, anchors, weighted)
        bad = ~np.isfinite(value) | ~np.all(np.isfinite(dZ), axis=1)
        alive &= ~bad
        if not alive.any():
            raise RuntimeError("every restart produced a non-finite objective")
        dZ[~alive] = 0.0
        if trace_every and it % trace_every == 0:
            trace.append(float(np.min(value[alive])))
        opt.step(flat, dZ.reshape(-1))
        np.clip(Z, -1.0, 1.0, out=Z)
    value, _, mu, b = _value_and_grad(fwd, g, y_star, Z, anchors, weighted)
    value = np.where(alive & np.isfinite(value), value, np.inf)
    if not np.isfinite(value).any():
        raise RuntimeError("every restart produced a non-finite objective")
    i = int(np.argmin(value))
    x = g.generate(y_star, Z[i:i + 1])[0]
    trace.append(float(value[i]))
    return LatentResult(Z[i].copy(), x, float(mu[i]), float(b[i]), float(value[i]),
                        float(truth(x[None, :])[0]), trace)


def optimize_latent(fwd: DeltaModel, g: InverseModel, y_star, anchors, restarts=50,
                    iters=1000, step=0.01, seed=0, truth=thickness, trace_every=50) -> MboEntry:
    """Projected Adam search over ``z`` from ``restarts`` uniform starts.

    Runs the uncertainty-weighted objective and the plain ``|mu - y*|``
    objective from the same starting points and keeps, for each, the restart
    with the lowest final objective.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    anchors = np.asarray(anchors, dtype=float)
    rng = np.random.default_rng(seed)
    Z0 = rng.uniform(-1, 1, (restarts, g.latent_dim))
    weighted = _search(fwd, g, y_star, Z0, anchors, iters, step, True, truth, trace_every)
    vanilla = _search(fwd, g, y_star, Z0, anchors, iters, step, False, truth, trace_every)
    return MboEntry(float(y_star), weighted, vanilla)


@dataclass
class MboResult:
    task: MboTask
    seed: int
    entries: list

    def to_dict(self):
        return {"task": self.task.to_dict(), "seed": self.seed,
                "entries": [e.to_dict() for e in self.entries]}

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def run_mbo(task: MboTask | None = None, seed=0, forward_cfg=None, inverse_cfg=None,
            anchors_k=16, restarts=50, iters=1000, step=0.01) -> MboResult:
    task = task or MboTask()
    ds = make_mbo_dataset(task, seed)
    fcfg = forward_cfg or MlpConfig(hidden_layers=(128, 128), epochs=100, learning_rate=1e-4,
                                    seed=seed)
    icfg = inverse_cfg or MlpConfig(hidden_layers=(128, 128), activation="leaky_relu",
                                    epochs=100, learning_rate=1e-4, seed=seed + 1)
    fwd = train_forward(ds, fcfg)
    g = train_inverse(ds, icfg, task.latent_dim)
    anchors = fwd.anchors(anchors_k, seed=seed + 2)
    entries = [
        optimize_latent(fwd, g, t, anchors, restarts, iters, step, seed=seed + 3 + i)
        for i, t in enumerate(task.targets)
    ]
    return MboResult(task, seed, entries)
