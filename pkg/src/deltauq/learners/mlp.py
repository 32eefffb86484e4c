"""Fully connected networks trained with Adam, in plain numpy."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import TrainingError

__all__ = ["MlpConfig", "MLPNetwork", "Adam", "MLPEstimator", "fit_mlp"]


@dataclass
class MlpConfig:
    hidden_layers: tuple = (128, 128, 128)
    activation: str = "relu"
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    standardize_targets: bool = True
    negative_slope: float = 0.2

    def __post_init__(self):
        self.hidden_layers = tuple(int(w) for w in self.hidden_layers)
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.activation not in ("relu", "leaky_relu"):
            raise ValueError(f"unsupported activation {self.activation!r}")

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


class MLPNetwork:
    """Dense network with a linear output layer.

    All weights and biases live in one flat vector so the optimizer can
    update them with a handful of vectorized operations.
    """

    def __init__(self, sizes, activation="relu", negative_slope=0.2, rng=None):
        self.sizes = [int(s) for s in sizes]
        self.activation = activation
        self.negative_slope = negative_slope
        n_params = sum((a + 1) * b for a, b in zip(self.sizes[:-1], self.sizes[1:]))
        self.params = np.zeros(n_params)
        self._bind()
        if rng is not None:
            for W in self.weights:
                limit = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
                W[...] = rng.uniform(-limit, limit, W.shape)

    def _bind(self):
        self.weights, self.biases = [], []
        offset = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(self.params[offset:offset + a * b].reshape(a, b))
            offset += a * b
            self.biases.append(self.params[offset:offset + b])
            offset += b

    def _act(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.where(z > 0, z, self.negative_slope * z)

    def _act_grad(self, z):
        if self.activation == "relu":
            return (z > 0).astype(float)
        return np.where(z > 0, 1.0, self.negative_slope)

    def forward(self, X, keep=False):
        h = np.asarray(X, dtype=float)
        cache = [h]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if i < last:
                cache.append(z)
                h = self._act(z)
                cache.append(h)
            else:
                h = z
        return (h, cache) if keep else h

    def backward(self, cache, grad_out):
        """Gradient of a scalar loss w.r.t. the flat parameters.

        The returned array is reused by the next call.
        """
        if getattr(self, "_grad", None) is None or self._grad.size != self.params.size:
            self._grad = np.zeros_like(self.params)
            self._gw, self._gb = [], []
            offset = 0
            for a, b in zip(self.sizes[:-1], self.sizes[1:]):
                self._gw.append(self._grad[offset:offset + a * b].reshape(a, b))
                offset += a * b
                self._gb.append(self._grad[offset:offset + b])
                offset += b
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            np.matmul(cache[2 * i].T, g, out=self._gw[i])
            np.sum(g, axis=0, out=self._gb[i])
            if i > 0:
                g = g @ self.weights[i].T
                g *= cache[2 * i - 1] > 0 if self.activation == "relu" else self._act_grad(cache[2 * i - 1])
        return self._grad

    def input_gradient(self, X, grad_out, cache=None):
        """Vector-Jacobian product of the network output w.r.t. its input.

        ``cache`` may be passed from an earlier ``forward(X, keep=True)``.
        """
        if cache is None:
            _, cache = self.forward(X, keep=True)
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            g = g @ self.weights[i].T
            if i > 0:
                g = g * self._act_grad(cache[2 * i - 1])
        return g

    def to_dict(self):
        return {
            "sizes": self.sizes,
            "activation": self.activation,
            "negative_slope": self.negative_slope,
            "params": self.params.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        net = cls(d["sizes"], d["activation"], d.get("negative_slope", 0.2))
        net.params[...] = np.asarray(d["params"], dtype=float)
        return net


class Adam:
    def __init__(self, n, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self._tmp = np.empty(n)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        m, v, tmp = self.m, self.v, self._tmp
        m *= self.beta1
        np.multiply(grad, 1 - self.beta1, out=tmp)
        m += tmp
        v *= self.beta2
        np.multiply(grad, grad, out=tmp)
        tmp *= 1 - self.beta2
        v += tmp
        step = self.lr * np.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        np.sqrt(v, out=tmp)
        tmp += self.eps
        np.divide(m, tmp, out=tmp)
        tmp *= step
        params -= tmp


@dataclass
class MLPEstimator:
    """A trained network plus the target scaling used during training."""

    net: MLPNetwork
    task: str
    y_mean: np.ndarray = field(default_factory=lambda: np.zeros(1))
    y_std: np.ndarray = field(default_factory=lambda: np.ones(1))

    def predict(self, rows, output="raw"):
        out = self.net.forward(rows)
        if self.task == "regression":
            return out * self.y_std + self.y_mean
        if output == "proba":
            z = out - out.max(axis=1, keepdims=True)
            e = np.exp(z)
            return e / e.sum(axis=1, keepdims=True)
        return out

    def to_dict(self):
        return {
            "net": self.net.to_dict(),
            "task": self.task,
            "y_mean": np.atleast_1d(self.y_mean).tolist(),
            "y_std": np.atleast_1d(self.y_std).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(MLPNetwork.from_dict(d["net"]), d["task"],
                   np.asarray(d["y_mean"]), np.asarray(d["y_std"]))


def fit_mlp(X, targets, cfg: MlpConfig, n_outputs, task, build_rows, rng=None,
            init_params=None):
    """Mini-batch Adam training.

    ``build_rows(batch_index, rng)`` turns a batch of sample indices into the
    network's input rows; this is where anchoring happens. Regression uses
    mean squared error on (optionally standardized) targets, classification
    softmax cross-entropy. ``init_params`` (a flat parameter vector of the
    same architecture) replaces the random initialization.
    """
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    probe = build_rows(np.arange(min(n, 2)), np.random.default_rng(0))
    sizes = [probe.shape[1], *cfg.hidden_layers, n_outputs]
    net = MLPNetwork(sizes, cfg.activation, cfg.negative_slope, rng)
    if init_params is not None:
        if np.shape(init_params) != net.params.shape:
            raise ValueError("init_params does not match the network architecture")
        net.params[:] = init_params
    est = MLPEstimator(net, task)

    if task == "regression":
        Y = np.asarray(targets, dtype=float).reshape(n, -1)
        if cfg.standardize_targets:
            est.y_mean = Y.mean(axis=0)
            sd = Y.std(axis=0)
            est.y_std = np.where(sd > 0, sd, 1.0)
        else:
            est.y_mean = np.zeros(Y.shape[1])
            est.y_std = np.ones(Y.shape[1])
        Y = (Y - est.y_mean) / est.y_std
    else:
        labels = np.asarray(targets, dtype=int)
        Y = np.zeros((n, n_outputs))
        Y[np.arange(n), labels] = 1.0

    opt = Adam(net.params.size, cfg.learning_rate)
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            rows = build_rows(idx, rng)
            out, cache = net.forward(rows, keep=True)
            target = Y[idx]
            if task == "regression":
                diff = out - target
                loss = float(np.mean(diff**2))
                g = diff * (2.0 / diff.size)
            else:
                z = out - out.max(axis=1, keepdims=True)
                logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
                loss = float(-np.mean(np.sum(target * logp, axis=1)))
                g = (np.exp(logp) - target) / idx.size
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            opt.step(net.params, net.backward(cache, g))
        if not np.all(np.isfinite(net.params)):
            raise TrainingError(f"non-finite parameters after epoch {epoch}", epoch=epoch)
    return est
