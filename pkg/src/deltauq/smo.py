"""Sequential model optimization with an anchored MLP surrogate."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .encoding import AnchorPrior
from .exceptions import NotFittedError
from .functions import BenchmarkFn, Dataset, get_benchmark
from .learners.mlp import MlpConfig
from .learners.models import train_anchored_mlp

__all__ = ["SmoConfig", "SmoRecord", "SmoTrace", "expected_improvement", "propose", "run_smo"]

SIGMA_FLOOR = 1e-9


def expected_improvement(mu, sigma, best):
    """Closed-form EI of a Gaussian N(mu, sigma^2) over the incumbent ``best``.

    Vectorized over ``mu`` and ``sigma``; sigma is floored at 1e-9.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.isfinite(best)):
        raise ValueError("expected improvement needs finite inputs")
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    s = np.maximum(sigma, SIGMA_FLOOR)
    diff = mu - best
    z = diff / s
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    ei = np.maximum(diff * ndtr(z) + s * pdf, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def propose(model, anchors, pool, best):
    """Candidate with the largest EI; the lowest index wins ties.

    ``anchors`` is the anchor set used to marginalize every candidate.
    Returns ``(index, ei, mu, sigma)``.
    """
    if not getattr(model, "is_fitted", True):
        raise NotFittedError("surrogate has not been trained")
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if pool.shape[0] == 0:
        raise ValueError("candidate pool is empty")
    mean, var, _ = model.predict(pool, anchors)
    mu = mean[:, 0]
    sigma = np.sqrt(var.sum(axis=1))
    ei = expected_improvement(mu, sigma, best)
    i = int(np.argmax(ei))
    return i, float(ei[i]), float(mu[i]), float(sigma[i])


@dataclass
class SmoConfig:
    objective: str = "sinusoid"
    n_init: int = 6
    n_iterations: int = 50
    pool_size: int = 2048
    anchors_k: int = 10
    refit_epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 16
    hidden_layers: tuple = (128, 128, 128)
    warm_start: bool = False
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(self.hidden_layers)
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.n_iterations < 0 or self.anchors_k < 1:
            raise ValueError("n_iterations must be >= 0 and anchors_k >= 1")

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


@dataclass
class SmoRecord:
    iteration: int
    x: list
    y: float
    best: float
    ei: float
    mu: float
    sigma: float


@dataclass
class SmoTrace:
    objective: str
    init_x: np.ndarray
    init_y: np.ndarray
    records: list = field(default_factory=list)

    @property
    def best(self) -> float:
        if self.records:
            return self.records[-1].best
        return float(np.max(self.init_y))

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([r.best for r in self.records])

    def to_csv(self, path) -> None:
        dim = self.init_x.shape[1]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", *[f"x{i}" for i in range(dim)], "y", "best", "ei", "mu", "sigma"])
            best = -np.inf
            for x, y in zip(self.init_x, self.init_y):
                best = max(best, y)
                w.writerow([0, *map(repr, map(float, x)), repr(float(y)), repr(float(best)),
                            "nan", "nan", "nan"])
            for r in self.records:
                w.writerow([r.iteration, *map(repr, r.x), repr(r.y), repr(r.best),
                            repr(r.ei), repr(r.mu), repr(r.sigma)])


def _fit_surrogate(U, y, cfg: SmoConfig, seed, previous=None):
    mlp = MlpConfig(hidden_layers=cfg.hidden_layers, learning_rate=cfg.learning_rate,
                    epochs=cfg.refit_epochs, batch_size=cfg.batch_size, seed=seed)
    train = Dataset(U, y)
    return train_anchored_mlp(train, mlp, "single", AnchorPrior.train_distribution(U),
                              init=previous if cfg.warm_start else None)


def run_smo(cfg: SmoConfig, fn: BenchmarkFn | None = None) -> SmoTrace:
    """Maximize ``fn.objective`` starting from ``n_init`` uniform samples.

    The surrogate works in coordinates rescaled to [-1, 1]^d and is refit
    from scratch every iteration unless ``warm_start`` is set, in which case
    training resumes from the previous surrogate's weights. A fresh uniform candidate pool and a fresh
    anchor set (drawn from the observed points) are used each iteration.
    """
    fn = fn or get_benchmark(cfg.objective)
    rng = np.random.default_rng(cfg.seed)
    d = fn.dim
    U = rng.uniform(-1, 1, (cfg.n_init, d))
    X = fn.from_unit(U)
    y = fn.objective(X)
    trace = SmoTrace(fn.name, X.copy(), y.copy())
    best = float(y.max())
    model = None
    for it in range(1, cfg.n_iterations + 1):
        seed = int(rng.integers(2**31))
        model = _fit_surrogate(U, y, cfg, seed, model)
        anchors = model.anchors(cfg.anchors_k, seed=seed + 1)
        pool = rng.uniform(-1, 1, (cfg.pool_size, d))
        i, ei, mu, sigma = propose(model, anchors, pool, best)
        u_new = pool[i]
        x_new = fn.from_unit(u_new[None, :])
        y_new = float(fn.objective(x_new)[0])
        U = np.vstack([U, u_new])
        y = np.append(y, y_new)
        best = max(best, y_new)
        trace.records.append(SmoRecord(it, x_new[0].tolist(), y_new, best, ei, mu, sigma))
    return trace
