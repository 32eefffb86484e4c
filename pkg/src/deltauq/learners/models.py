"""Anchored trainers, Delta-models and plain/ensemble baselines."""

from __future__ import annotations

import numpy as np

from ..encoding import AnchorPrior, EncodingScheme, encode_rows, marginalize, summarize
from ..encoding import draw_anchor_set
from ..exceptions import DimensionError, NotFittedError
from ..functions import Dataset
from .forest import ForestConfig, RandomForest
from .ksvm import KernelSVM, KsvmConfig
from .mlp import MlpConfig, fit_mlp

__all__ = [
    "DeltaModel",
    "PlainModel",
    "EnsembleModel",
    "train_anchored_mlp",
    "train_anchored_forest",
    "train_anchored_ksvm",
    "train_baseline",
    "learner_name",
]


def learner_name(cfg) -> str:
    if isinstance(cfg, MlpConfig):
        return "mlp"
    if isinstance(cfg, ForestConfig):
        return "forest"
    if isinstance(cfg, KsvmConfig):
        return "ksvm"
    raise TypeError(f"unknown learner config {type(cfg).__name__}")


class DeltaModel:
    """A predictor over anchored rows ``[anchor(s) || encoded]``.

    ``predict_anchored`` refuses raw ``d``-dimensional inputs: rows must have
    the width implied by the encoding scheme.
    """

    def __init__(self, learner, estimator, scheme, input_dim, n_outputs, task,
                 config, prior: AnchorPrior, default_output="raw"):
        self.learner = learner
        self.estimator = estimator
        self.scheme = EncodingScheme.parse(scheme)
        self.input_dim = int(input_dim)
        self.n_outputs = int(n_outputs)
        self.task = task
        self.config = config
        self.prior = prior
        self.default_output = default_output

    @property
    def is_fitted(self) -> bool:
        return self.estimator is not None

    @property
    def width(self) -> int:
        return self.scheme.width(self.input_dim)

    def predict_anchored(self, rows, output=None):
        if not self.is_fitted:
            raise NotFittedError("model has not been trained")
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.width:
            raise DimensionError(
                f"{self.scheme.value} model takes anchored rows of width {self.width}, "
                f"got {rows.shape[1]}"
            )
        return self.estimator.predict(rows, output or self.default_output)

    def anchors(self, k, seed=0, prior=None):
        """A reusable anchor set of size ``k`` drawn from ``prior``."""
        prior = prior or self.prior
        return draw_anchor_set(prior, k, self.scheme, np.random.default_rng(seed))

    def predict(self, X, anchors, output=None):
        """Anchor mean and variance for every row of ``X``.

        Returns ``(mean, variance, per_anchor)`` with shapes (n, k), (n, k)
        and (n, K, k).
        """
        per_anchor = marginalize(self, X, anchors, output=output)
        mean, var = summarize(per_anchor)
        return mean, var, per_anchor


class PlainModel:
    """A learner trained on raw inputs."""

    def __init__(self, learner, estimator, input_dim, n_outputs, task, config,
                 default_output="raw"):
        self.learner = learner
        self.estimator = estimator
        self.input_dim = int(input_dim)
        self.n_outputs = int(n_outputs)
        self.task = task
        self.config = config
        self.default_output = default_output

    @property
    def is_fitted(self) -> bool:
        return self.estimator is not None

    def predict(self, X, output=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"expected {self.input_dim} features, got {X.shape[1]}")
        return self.estimator.predict(X, output or self.default_output)


class EnsembleModel:
    """Members trained with different seeds; spread is the uncertainty."""

    def __init__(self, members):
        self.members = list(members)

    @property
    def input_dim(self):
        return self.members[0].input_dim

    @property
    def task(self):
        return self.members[0].task

    def predict(self, X, output=None):
        per_member = np.stack([m.predict(X, output) for m in self.members], axis=1)
        mean, var = summarize(per_member)
        return mean, var, per_member


def _default_prior(train: Dataset, prior):
    return prior if prior is not None else AnchorPrior.train_distribution(train.inputs)


def _check_train(train: Dataset):
    if train is None or len(train) == 0:
        raise ValueError("training dataset is empty")


def _task(train: Dataset):
    if train.is_classification:
        return "classification", train.n_classes
    return "regression", train.targets.shape[1]


def _replicated_rows(X, scheme, prior, A, rng):
    """Pair each sample with ``A`` anchors; rows ordered replica-major.

    Dataset-backed priors give ``A`` distinct anchors per sample when the
    dataset has at least ``A`` rows.
    """
    n = X.shape[0]
    per_row = scheme.anchors_per_row
    if prior.kind == "normal":
        R = rng.standard_normal((A, n, per_row, prior.dim))
    else:
        m = prior.data.shape[0]
        draws = A * per_row
        if draws <= m:
            idx = np.stack([rng.choice(m, draws, replace=False) for _ in range(n)])
        else:
            idx = rng.integers(0, m, size=(n, draws))
        R = prior.data[idx].reshape(n, A, per_row, -1).transpose(1, 0, 2, 3)
    rows = []
    for a in range(A):
        anchors = R[a, :, 0] if per_row == 1 else R[a]
        rows.append(encode_rows(X, anchors, scheme))
    return np.vstack(rows)


def train_anchored_mlp(train: Dataset, cfg: MlpConfig = None, scheme="single",
                       prior: AnchorPrior | None = None, init: DeltaModel | None = None) -> DeltaModel:
    """Train an MLP on anchored rows, one fresh anchor per sample per step.

    Within a mini-batch the anchor of the ``i``-th sample is the sample at
    the mirrored position of the batch. Rows left without a partner (the
    middle of an odd batch, singleton batches) and batches covering the whole
    dataset draw their anchors from ``prior`` instead. Passing a trained
    ``init`` model starts from its weights.
    """
    _check_train(train)
    cfg = cfg or MlpConfig()
    scheme = EncodingScheme.parse(scheme)
    prior = _default_prior(train, prior)
    if prior.dim != train.dim:
        raise DimensionError(f"prior dimension {prior.dim} != data dimension {train.dim}")
    task, n_out = _task(train)
    X = train.inputs
    n = X.shape[0]
    full_batch = cfg.batch_size >= n

    def build_rows(idx, rng):
        b = idx.size
        if full_batch or b == 1:
            first = draw_anchor_set(prior, b, EncodingScheme.SINGLE, rng)
        else:
            first = X[idx[::-1]].copy()
            if b % 2:
                first[b // 2] = draw_anchor_set(prior, 1, EncodingScheme.SINGLE, rng)[0]
        if scheme is EncodingScheme.DOUBLE:
            second = draw_anchor_set(prior, b, EncodingScheme.SINGLE, rng)
            anchors = np.stack([first, second], axis=1)
        else:
            anchors = first
        return encode_rows(X[idx], anchors, scheme)

    start = None if init is None else init.estimator.net.params
    est = fit_mlp(X, train.targets, cfg, n_out, task, build_rows, init_params=start)
    return DeltaModel("mlp", est, scheme, train.dim, n_out, task, cfg, prior)


def train_anchored_forest(train: Dataset, cfg: ForestConfig = None, scheme="single",
                          prior: AnchorPrior | None = None) -> DeltaModel:
    """Bagged CART forest on ``A`` anchored replicas of every training row."""
    _check_train(train)
    cfg = cfg or ForestConfig()
    if train.is_classification:
        raise ValueError("anchored forests are regression-only")
    if len(train) < 2:
        raise ValueError("a forest needs at least 2 training samples")
    scheme = EncodingScheme.parse(scheme)
    prior = _default_prior(train, prior)
    rng = np.random.default_rng(cfg.seed)
    A = cfg.anchor_replication
    rows = _replicated_rows(train.inputs, scheme, prior, A, rng)
    Y = np.tile(train.targets, (A, 1))
    forest = RandomForest(cfg.n_trees, cfg.max_depth, cfg.min_samples_split,
                          seed=int(rng.integers(2**31)))
    forest.fit(rows, Y)
    return DeltaModel("forest", forest, scheme, train.dim, train.targets.shape[1],
                      "regression", cfg, prior)


def _check_classes(train: Dataset):
    if not train.is_classification:
        raise ValueError("kernel SVM needs class labels")
    if train.n_classes < 2:
        raise ValueError("kernel SVM needs at least 2 classes")
    counts = np.bincount(train.targets, minlength=train.n_classes)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"class {int(empty[0])} has no training samples")


def train_anchored_ksvm(train: Dataset, cfg: KsvmConfig = None, scheme="single",
                        prior: AnchorPrior | None = None) -> DeltaModel:
    """One-vs-rest RBF SVM on ``A`` anchored replicas of every training row.

    Class probabilities are the softmax of the ``C`` decision values.
    """
    _check_train(train)
    cfg = cfg or KsvmConfig()
    _check_classes(train)
    scheme = EncodingScheme.parse(scheme)
    prior = _default_prior(train, prior)
    rng = np.random.default_rng(cfg.seed)
    A = cfg.anchor_replication
    rows = _replicated_rows(train.inputs, scheme, prior, A, rng)
    labels = np.tile(train.targets, A)
    svm = KernelSVM(cfg.gamma, cfg.C, cfg.max_iter, cfg.tol, seed=int(rng.integers(2**31)))
    svm.fit(rows, labels, train.n_classes)
    return DeltaModel("ksvm", svm, scheme, train.dim, train.n_classes,
                      "classification", cfg, prior, default_output="proba")


def _train_plain(train: Dataset, cfg):
    X = train.inputs
    name = learner_name(cfg)
    if name == "mlp":
        task, n_out = _task(train)
        est = fit_mlp(X, train.targets, cfg, n_out, task, lambda idx, rng: X[idx])
        return PlainModel("mlp", est, train.dim, n_out, task, cfg)
    if name == "forest":
        if train.is_classification:
            raise ValueError("forests are regression-only")
        if len(train) < 2:
            raise ValueError("a forest needs at least 2 training samples")
        forest = RandomForest(cfg.n_trees, cfg.max_depth, cfg.min_samples_split, cfg.seed)
        forest.fit(X, train.targets)
        return PlainModel("forest", forest, train.dim, train.targets.shape[1],
                          "regression", cfg)
    _check_classes(train)
    svm = KernelSVM(cfg.gamma, cfg.C, cfg.max_iter, cfg.tol, cfg.seed)
    svm.fit(X, train.targets, train.n_classes)
    return PlainModel("ksvm", svm, train.dim, train.n_classes, "classification", cfg,
                      default_output="proba")


def train_baseline(train: Dataset, cfg, kind="plain", m=3, reseed=True):
    """Plain model on raw inputs, or an ensemble of ``m`` of them.

    Ensemble member ``i`` uses ``cfg.seed + i`` unless ``reseed`` is False.
    """
    _check_train(train)
    if kind == "plain":
        return _train_plain(train, cfg)
    if kind != "ensemble":
        raise ValueError(f"unknown baseline kind {kind!r}")
    if m < 2:
        raise ValueError(f"an ensemble needs m >= 2 members, got {m}")
    members = []
    for i in range(m):
        member_cfg = type(cfg)(**{**cfg.to_dict(), "seed": cfg.seed + i if reseed else cfg.seed})
        members.append(_train_plain(train, member_cfg))
    return EnsembleModel(members)
