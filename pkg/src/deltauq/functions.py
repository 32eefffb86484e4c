"""Benchmark functions, datasets, CSV ingestion and corruptions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import CsvFormatError, DimensionError, DomainError

__all__ = [
    "Dataset",
    "BenchmarkFn",
    "BENCHMARKS",
    "get_benchmark",
    "eval_benchmark",
    "sample_benchmark",
    "load_csv",
    "save_csv",
    "split",
    "make_two_moons",
    "make_blobs",
    "CorruptionSpec",
    "corrupt",
]


@dataclass
class Dataset:
    """Inputs plus either regression targets or integer class labels.

    Regression targets are stored as an (n, k) float array, labels as an (n,)
    integer array with ``n_classes`` set.
    """

    inputs: np.ndarray
    targets: np.ndarray
    n_classes: int | None = None
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("dataset is empty: need at least one row of inputs")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("dataset inputs contain NaN or Inf")
        n = self.inputs.shape[0]
        if self.n_classes is None:
            t = np.asarray(self.targets, dtype=float)
            if t.ndim == 1:
                t = t[:, None]
            if not np.all(np.isfinite(t)):
                raise ValueError("dataset targets contain NaN or Inf")
        else:
            t = np.asarray(self.targets)
            if t.ndim != 1 or not np.all(np.equal(np.mod(t, 1), 0)):
                raise ValueError("class labels must be a vector of integers")
            t = t.astype(int)
            if t.size and (t.min() < 0 or t.max() >= self.n_classes):
                raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")
        if t.shape[0] != n:
            raise DimensionError(f"{n} inputs but {t.shape[0]} targets")
        self.targets = t

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.n_classes is not None

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx], self.n_classes,
                       self.feature_names)


# -- benchmark functions -----------------------------------------------------

def _sinusoid(X):
    x = X[:, 0]
    return -np.sin(5 * x**2) - x**4 + 0.3 * x**3 + 2 * x**2 + 4.1 * x


def _multi_optima(X):
    x = X[:, 0]
    return np.sin(x) * np.cos(5 * x) * np.cos(22 * x)


def _booth(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x1 + 2 * x2 - 7) ** 2 + (2 * x1 + x2 - 5) ** 2


def _levi13(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (
        np.sin(3 * np.pi * x1) ** 2
        + (x1 - 1) ** 2 * (1 + np.sin(3 * np.pi * x2) ** 2)
        + (x2 - 1) ** 2 * (1 + np.sin(2 * np.pi * x2) ** 2)
    )


def _ackley(X, a=20.0, b=0.2, c=2 * np.pi):
    return (
        -a * np.exp(-b * np.sqrt(np.mean(X**2, axis=1)))
        - np.exp(np.mean(np.cos(c * X), axis=1))
        + a
        + np.e
    )


def _griewank(X):
    i = np.arange(1, X.shape[1] + 1)
    return 1 + np.sum(X**2, axis=1) / 4000 - np.prod(np.cos(X / np.sqrt(i)), axis=1)


@dataclass(frozen=True)
class BenchmarkFn:
    """A closed-form test function on a box.

    ``sense`` is +1 when the optimization loop maximizes the function as
    written and -1 when it maximizes the negated function.
    """

    name: str
    dim: int
    lower: tuple
    upper: tuple
    sense: int = 1
    _impl: object = field(default=None, repr=False, compare=False)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.lower, self.upper], dtype=float)

    def check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionError(f"{self.name} takes {self.dim}-d inputs, got {X.shape[1]}")
        lo, hi = self.bounds
        bad = (X < lo) | (X > hi)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DomainError(
                f"{self.name}: coordinate {col} = {X[row, col]!r} lies outside "
                f"[{lo[col]}, {hi[col]}]"
            )
        return X

    def __call__(self, X) -> np.ndarray:
        return self._impl(self.check(X))

    def objective(self, X) -> np.ndarray:
        """Values in maximization form."""
        return self.sense * self(X)

    def to_unit(self, X) -> np.ndarray:
        lo, hi = self.bounds
        return 2 * (np.asarray(X, dtype=float) - lo) / (hi - lo) - 1

    def from_unit(self, U) -> np.ndarray:
        lo, hi = self.bounds
        return np.clip(lo + (np.asarray(U, dtype=float) + 1) * (hi - lo) / 2, lo, hi)


def _box(lo, hi, dim):
    return (lo,) * dim, (hi,) * dim


def get_benchmark(name: str, dim: int | None = None) -> BenchmarkFn:
    """Look up a benchmark by (case-insensitive) name."""
    key = name.lower().replace("_", "").replace("-", "").replace(".", "").replace(" ", "")
    if key in ("sinusoid", "sinusoid1d"):
        return BenchmarkFn("sinusoid", 1, (-2.5,), (2.5,), 1, _sinusoid)
    if key in ("multioptima", "multioptima1d"):
        return BenchmarkFn("multi_optima", 1, (0.0,), (math.pi,), 1, _multi_optima)
    if key in ("booth", "booth2d"):
        return BenchmarkFn("booth", 2, *_box(-10.0, 10.0, 2), -1, _booth)
    if key in ("levin13", "levi13", "levin132d", "levi"):
        return BenchmarkFn("levi_n13", 2, *_box(-10.0, 10.0, 2), -1, _levi13)
    if key.startswith("ackley"):
        d = dim or (int(key[6:-1]) if key.endswith("d") and key[6:-1].isdigit() else 2)
        return BenchmarkFn(f"ackley{d}d", d, *_box(-5.0, 5.0, d), -1, _ackley)
    if key.startswith("griewank"):
        d = dim or (int(key[8:-1]) if key.endswith("d") and key[8:-1].isdigit() else 2)
        return BenchmarkFn(f"griewank{d}d", d, *_box(-5.0, 5.0, d), -1, _griewank)
    raise KeyError(f"unknown benchmark {name!r}")


BENCHMARKS = ("sinusoid", "multi_optima", "booth", "levi_n13", "ackley", "griewank")


def eval_benchmark(fn: BenchmarkFn | str, x) -> float:
    """Exact value of ``fn`` at the single point ``x``."""
    if isinstance(fn, str):
        fn = get_benchmark(fn, np.size(x))
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(fn(x)[0])


def sample_benchmark(fn: BenchmarkFn, n: int, seed: int = 0) -> Dataset:
    """``n`` uniform points in the domain box with their function values."""
    rng = np.random.default_rng(seed)
    lo, hi = fn.bounds
    X = rng.uniform(lo, hi, size=(n, fn.dim))
    return Dataset(X, fn(X))


# -- CSV ---------------------------------------------------------------------

def load_csv(path, target=-1) -> Dataset:
    """Read a numeric CSV with a header row into a regression dataset.

    ``target`` is a column name or an integer index (negative counts from
    the end). Data rows are numbered from 1 in error messages.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file (header row required)")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if isinstance(target, str) and not target.lstrip("-").isdigit():
        if target not in header:
            raise CsvFormatError(f"{path}: target column {target!r} not found in header {header}")
        t_idx = header.index(target)
    else:
        t_idx = int(target)
        if not -len(header) <= t_idx < len(header):
            raise CsvFormatError(f"{path}: target column index {t_idx} out of range")
        t_idx %= len(header)
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: row {i} has {len(row)} fields, header has {len(header)}"
            )
        for j, cell in enumerate(row):
            try:
                values[i - 1, j] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {i}, column {header[j]!r}: cannot parse {cell!r} as a number"
                ) from None
    if not len(body):
        raise CsvFormatError(f"{path}: no data rows")
    feature_idx = [j for j in range(len(header)) if j != t_idx]
    return Dataset(values[:, feature_idx], values[:, t_idx],
                   feature_names=[header[j] for j in feature_idx])


def save_csv(ds: Dataset, path, target_name="y") -> None:
    names = ds.feature_names or [f"x{i}" for i in range(ds.dim)]
    t = ds.targets.reshape(len(ds), -1)
    t_names = [target_name] if t.shape[1] == 1 else [f"{target_name}{i}" for i in range(t.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + t_names)
        for x, y in zip(ds.inputs, t):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) if ds.n_classes is None else int(v) for v in y])


def split(ds: Dataset, n_train: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``n_train`` rows train."""
    n = len(ds)
    if not 1 <= n_train < n:
        raise ValueError(f"n_train must satisfy 1 <= n_train < {n}, got {n_train}")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


# -- synthetic classification data --------------------------------------------

def make_two_moons(n: int = 500, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved unit half-circles; class 0 is the upper moon."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    t0 = np.linspace(0, np.pi, n0)
    t1 = np.linspace(0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([upper, lower])
    y = np.concatenate([np.zeros(n0, int), np.ones(n1, int)])
    if noise > 0:
        X = X + rng.normal(0.0, noise, X.shape)
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm], n_classes=2)


def make_blobs(centers, n: int = 150, sd: float = 0.5, seed: int = 0) -> Dataset:
    """Isotropic Gaussian blobs, one class per center, sizes as equal as possible."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    c = centers.shape[0]
    if n < 2 or n < c:
        raise ValueError("n must be >= 2 and at least the number of centers")
    if sd < 0:
        raise ValueError("sd must be >= 0")
    rng = np.random.default_rng(seed)
    sizes = [n // c + (i < n % c) for i in range(c)]
    y = np.repeat(np.arange(c), sizes)
    X = centers[y] + rng.normal(0.0, 1.0, (n, centers.shape[1])) * sd
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm], n_classes=c)


# -- corruptions ---------------------------------------------------------------

# per-unit-intensity magnitudes
GAUSSIAN_SD = 0.1
UNIFORM_HALF_WIDTH = 0.15
SHIFT_LENGTH = 0.2


@dataclass(frozen=True)
class CorruptionSpec:
    """``kind`` is ``gaussian``, ``uniform`` or ``shift``; intensity 1..5.

    Magnitudes per intensity ``i``: Gaussian sd ``0.1 i``, uniform half-width
    ``0.15 i``, shift length ``0.2 i`` along the unit diagonal.
    """

    kind: str = "gaussian"
    intensity: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "shift"):
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if not (isinstance(self.intensity, (int, np.integer)) and 1 <= self.intensity <= 5):
            raise ValueError(f"intensity must be an integer in 1..5, got {self.intensity!r}")


def corrupt(ds: Dataset, spec: CorruptionSpec) -> Dataset:
    """Perturb inputs; targets are returned unchanged.

    The base noise draw depends only on ``spec.seed``, so the same seed at
    two intensities yields perturbations that differ only in scale.
    """
    rng = np.random.default_rng(spec.seed)
    shape = ds.inputs.shape
    i = spec.intensity
    if spec.kind == "gaussian":
        delta = rng.standard_normal(shape) * (GAUSSIAN_SD * i)
    elif spec.kind == "uniform":
        delta = rng.uniform(-1.0, 1.0, shape) * (UNIFORM_HALF_WIDTH * i)
    else:
        direction = np.ones(shape[1]) / np.sqrt(shape[1])
        delta = np.broadcast_to(direction * (SHIFT_LENGTH * i), shape)
    return Dataset(ds.inputs + delta, ds.targets.copy(), ds.n_classes, ds.feature_names)
