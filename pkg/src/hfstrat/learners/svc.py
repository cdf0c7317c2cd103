"""Soft-margin support vector classifier solved by sequential minimal optimization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import StandardizationParams, as_matrix, standardize_apply, standardize_fit


@dataclass(frozen=True)
class Kernel:
    name: str = "linear"
    gamma: float | None = None  # rbf only; None resolves to 1 / n_columns at training time

    def __post_init__(self):
        if self.name not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.name!r}")

    def __call__(self, A, B) -> np.ndarray:
        if self.name == "linear":
            return A @ B.T
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def resolve(self, d: int) -> "Kernel":
        if self.name == "rbf" and self.gamma is None:
            return Kernel("rbf", 1.0 / d)
        return self

    def to_dict(self) -> dict:
        return {"name": self.name, "gamma": self.gamma}


@dataclass(frozen=True)
class SvcModel:
    kernel: Kernel
    alphas: np.ndarray  # dual coefficients of the support vectors
    support_labels: np.ndarray  # signed labels (+1/-1) of the support vectors
    support_vectors: np.ndarray  # standardized
    bias: float
    C: float
    standardization: StandardizationParams
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        """Raw margin ``sum_i alpha_i y_i K(s_i, x) + b`` (not a probability)."""
        Z = standardize_apply(X, self.standardization)
        if self.alphas.size == 0:
            return np.full(Z.shape[0], self.bias)
        return self.kernel(Z, self.support_vectors) @ (self.alphas * self.support_labels) + self.bias

    def predict_confidence(self, X) -> np.ndarray:
        return self.decision_function(X)

    def predict_label(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def primal_weights(self) -> np.ndarray:
        """``w`` in standardized coordinates (linear kernel only)."""
        if self.kernel.name != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        return (self.alphas * self.support_labels) @ self.support_vectors

    def to_dict(self) -> dict:
        return {
            "kind": "svc",
            "kernel": self.kernel.to_dict(),
            "alphas": self.alphas.tolist(),
            "support_labels": self.support_labels.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "bias": self.bias,
            "C": self.C,
            "standardization": self.standardization.to_dict(),
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvcModel":
        sv = np.array(d["support_vectors"], dtype=np.float64)
        n_feat = len(d["standardization"]["means"])
        return cls(
            Kernel(**d["kernel"]),
            np.array(d["alphas"], dtype=np.float64),
            np.array(d["support_labels"], dtype=np.float64),
            sv.reshape(-1, n_feat),
            float(d["bias"]),
            float(d["C"]),
            StandardizationParams.from_dict(d["standardization"]),
            int(d.get("n_iter", 0)),
        )


@dataclass(frozen=True)
class SmoResult:
    alpha: np.ndarray
    bias: float
    n_iter: int
    gap: float


def smo_solve(K, ys, C, tol=1e-3, max_iter=100000) -> SmoResult:
    """Solve ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a <= C``, ``y'a = 0``, ``Q = yy' * K``.

    Each iteration updates the maximally KKT-violating pair analytically;
    iteration stops when the violation gap falls below ``tol``.
    """
    n = ys.size
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - e
    Kdiag = np.diag(K).copy()
    it = 0
    gap = np.inf
    while it < max_iter:
        yg = -ys * grad
        up = ((ys > 0) & (alpha < C)) | ((ys < 0) & (alpha > 0))
        low = ((ys > 0) & (alpha > 0)) | ((ys < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        yg_up = np.where(up, yg, -np.inf)
        yg_low = np.where(low, yg, np.inf)
        i = int(np.argmax(yg_up))
        j = int(np.argmin(yg_low))
        gap = yg_up[i] - yg_low[j]
        if gap < tol:
            break
        # Pair step along the feasible direction y_i e_i - y_j e_j.
        eta = Kdiag[i] + Kdiag[j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            eta = 1e-12
        t = gap / eta
        # Box limits along the direction.
        t_i = (C - alpha[i]) if ys[i] > 0 else alpha[i]
        t_j = alpha[j] if ys[j] > 0 else (C - alpha[j])
        t = min(t, t_i, t_j)
        di = ys[i] * t
        dj = -ys[j] * t
        alpha[i] += di
        alpha[j] += dj
        # Snap to the box against round-off.
        for k in (i, j):
            if alpha[k] < 1e-14 * C:
                alpha[k] = 0.0
            elif alpha[k] > C * (1 - 1e-14):
                alpha[k] = C
        grad += ys * (K[:, i] * ys[i] * di + K[:, j] * ys[j] * dj)
        it += 1

    yg = -ys * grad
    interior = (alpha > 0) & (alpha < C)
    if interior.any():
        b = float(np.mean(yg[interior]))
    else:
        up = ((ys > 0) & (alpha < C)) | ((ys < 0) & (alpha > 0))
        low = ((ys > 0) & (alpha > 0)) | ((ys < 0) & (alpha < C))
        hi = yg[low].min() if low.any() else yg[up].max()
        lo = yg[up].max() if up.any() else hi
        b = 0.5 * (hi + lo)
    return SmoResult(alpha, b, it, float(gap))


def train_svc(X, y, C: float = 1.0, kernel: Kernel | str = "linear", tol: float = 1e-3, max_passes: int = 200):
    """Train on internally standardized ``X`` with labels mapped to ``{-1, +1}``.

    ``max_passes`` caps the number of pair updates at ``max_passes * n``.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    if isinstance(kernel, str):
        kernel = Kernel(kernel)
    A = as_matrix(X)
    y = np.asarray(y)
    if y.shape != (A.shape[0],):
        raise ValueError("X and y are misaligned")
    params = standardize_fit(A)
    Z = standardize_apply(A, params)
    kernel = kernel.resolve(Z.shape[1])
    ys = np.where(y == 1, 1.0, -1.0)
    if np.all(ys == ys[0]):
        # one class: a constant decision function
        return SvcModel(kernel, np.zeros(0), np.zeros(0), np.zeros((0, Z.shape[1])), float(ys[0]), float(C), params)
    K = kernel(Z, Z)
    res = smo_solve(K, ys, float(C), tol, max_iter=max_passes * Z.shape[0])
    sv = res.alpha > 0
    return SvcModel(
        kernel,
        res.alpha[sv].copy(),
        ys[sv].copy(),
        Z[sv].copy(),
        res.bias,
        float(C),
        params,
        res.n_iter,
    )


def kkt_report(model: SvcModel, X, y) -> dict:
    """Dual feasibility and interior-alpha margin residuals on the training set."""
    ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
    f = model.decision_function(X)
    Z = standardize_apply(X, model.standardization)
    # map support vectors back to training rows
    alpha = np.zeros(len(ys))
    for a, s in zip(model.alphas, model.support_vectors):
        hits = np.flatnonzero(np.all(Z == s, axis=1))
        alpha[hits[0]] = a
    interior = (alpha > 0) & (alpha < model.C)
    resid = np.abs(ys * f - 1.0)[interior]
    return {
        "dual_sum": float(np.dot(alpha, ys)),
        "max_interior_residual": float(resid.max()) if resid.size else 0.0,
        "n_interior": int(interior.sum()),
        "alpha": alpha,
    }
