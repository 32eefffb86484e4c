"""One-vs-rest RBF kernel SVM solved by dual coordinate descent."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["KsvmConfig", "KernelSVM", "rbf_kernel"]


@dataclass
class KsvmConfig:
    gamma: float = 1.0
    C: float = 1.0
    max_iter: int = 200
    tol: float = 1e-3
    anchor_replication: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0 or self.C <= 0:
            raise ValueError("gamma and C must be > 0")
        if self.max_iter < 1 or self.anchor_replication < 1:
            raise ValueError("max_iter and anchor_replication must be >= 1")

    def to_dict(self):
        return asdict(self)


def rbf_kernel(A, B, gamma):
    sq = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelSVM:
    """Multiclass SVM built from ``C`` binary one-vs-rest problems.

    The bias is absorbed into the kernel (``k(a, b) + 1``), which removes the
    equality constraint from the dual so each coordinate can be updated in
    closed form:

        min_a 0.5 a^T Q a - sum(a),  0 <= a_i <= C,  Q_ij = y_i y_j (k_ij + 1)

    All classes are updated together, one training row at a time.
    """

    def __init__(self, gamma=1.0, C=1.0, max_iter=200, tol=1e-3, seed=0):
        self.gamma = gamma
        self.C = C
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.support_ = None
        self.coef_ = None
        self.n_iter_ = 0

    def fit(self, X, labels, n_classes):
        X = np.asarray(X, dtype=float)
        labels = np.asarray(labels, dtype=int)
        m = X.shape[0]
        Y = -np.ones((m, n_classes))
        Y[np.arange(m), labels] = 1.0
        Kp = rbf_kernel(X, X, self.gamma) + 1.0
        diag = np.diag(Kp).copy()
        alpha = np.zeros((m, n_classes))
        f = np.zeros((m, n_classes))  # f[j, c] = sum_i alpha[i, c] Y[i, c] Kp[i, j]
        rng = np.random.default_rng(self.seed)
        for it in range(self.max_iter):
            worst = 0.0
            for i in rng.permutation(m):
                a = alpha[i]
                g = Y[i] * f[i] - 1.0
                pg = np.where(a <= 0, np.minimum(g, 0.0), np.where(a >= self.C, np.maximum(g, 0.0), g))
                viol = np.abs(pg).max()
                if viol <= 1e-12:
                    continue
                worst = max(worst, viol)
                new = np.clip(a - g / diag[i], 0.0, self.C)
                delta = (new - a) * Y[i]
                alpha[i] = new
                f += np.outer(Kp[i], delta)
            self.n_iter_ = it + 1
            if worst < self.tol:
                break
        keep = np.any(alpha > 0, axis=1)
        self.support_ = X[keep]
        self.coef_ = (alpha * Y)[keep]
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if self.support_.shape[0] == 0:
            return np.zeros((X.shape[0], self.coef_.shape[1]))
        return (rbf_kernel(X, self.support_, self.gamma) + 1.0) @ self.coef_

    def predict(self, X, output="proba"):
        dv = self.decision_function(X)
        if output == "raw":
            return dv
        z = dv - dv.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "C": self.C,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
            "dim": self.support_.shape[1],
            "support": self.support_.tolist(),
            "coef": self.coef_.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        svm = cls(d["gamma"], d["C"], d["max_iter"], d["tol"], d["seed"])
        svm.coef_ = np.asarray(d["coef"], dtype=float)
        svm.support_ = np.asarray(d["support"], dtype=float).reshape(svm.coef_.shape[0], d["dim"])
        return svm
