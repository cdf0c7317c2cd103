"""L2-regularized logistic regression trained by full-batch gradient descent."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..numerics import StandardizationParams, as_matrix, sigmoid, standardize_apply, standardize_fit

log = logging.getLogger(__name__)


def _log1pexp(z):
    # log(1 + e^z) without overflow
    return np.logaddexp(0.0, z)


def logistic_objective(w, b, X, y, C):
    """Penalized negative log-likelihood ``-sum[y log p + (1-y) log(1-p)] + ||w||^2 / (2C)``."""
    z = X @ w + b
    nll = np.sum(_log1pexp(z) - y * z)
    return float(nll + 0.5 / C * np.dot(w, w))


def logistic_gradient(w, b, X, y, C):
    """Analytic gradient of :func:`logistic_objective` as ``(dw, db)``."""
    r = sigmoid(X @ w + b) - y
    return X.T @ r + w / C, float(np.sum(r))


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    C: float
    standardization: StandardizationParams
    n_iter: int = 0
    converged: bool = True

    def decision_function(self, X) -> np.ndarray:
        Z = standardize_apply(X, self.standardization)
        return Z @ self.weights + self.bias

    def predict_confidence(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def predict_label(self, X) -> np.ndarray:
        return (self.predict_confidence(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "C": self.C,
            "standardization": self.standardization.to_dict(),
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(
            np.array(d["weights"], dtype=np.float64),
            float(d["bias"]),
            float(d["C"]),
            StandardizationParams.from_dict(d["standardization"]),
            int(d.get("n_iter", 0)),
            bool(d.get("converged", True)),
        )


def train_logistic(X, y, C: float = 1.0, tol: float = 1e-6, max_iter: int = 10000) -> LogisticModel:
    """Fit on internally standardized ``X``; the bias is not penalized.

    Each step moves along the negative gradient. The trial step length is the
    Barzilai-Borwein estimate from the previous step, shortened by Armijo
    backtracking until the objective decreases sufficiently. Stops when the
    gradient max-norm drops below ``tol`` or after ``max_iter`` steps.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    A = np.asarray(X, dtype=np.float64)
    if np.isnan(A).any():
        raise ValueError("NaN in design matrix")
    A = as_matrix(A)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.shape[0],):
        raise ValueError("X and y are misaligned")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    params = standardize_fit(A)
    Z = standardize_apply(A, params)
    n, d = Z.shape

    k = y.sum()
    if k == 0 or k == n:
        log.warning("single-class training labels; returning a constant-probability model")
        p = (k + 0.5) / (n + 1.0)
        return LogisticModel(np.zeros(d), float(np.log(p / (1 - p))), float(C), params, 0, True)

    theta = np.zeros(d + 1)  # weights then bias

    def f(t):
        return logistic_objective(t[:d], t[d], Z, y, C)

    def g(t):
        gw, gb = logistic_gradient(t[:d], t[d], Z, y, C)
        return np.append(gw, gb)

    fx = f(theta)
    grad = g(theta)
    # Lipschitz bound of the gradient for the first trial step
    lip = 0.25 * (np.linalg.norm(Z, 2) ** 2 + n) + 1.0 / C
    step = 1.0 / lip
    it = 0
    converged = False
    while it < max_iter:
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        gg = float(grad @ grad)
        t = step
        while True:
            cand = theta - t * grad
            fc = f(cand)
            if fc <= fx - 1e-4 * t * gg or t < 1e-20:
                break
            t *= 0.5
        new_grad = g(cand)
        s = cand - theta
        r = new_grad - grad
        sr = float(s @ r)
        step = float(s @ s) / sr if sr > 0 else 1.0 / lip
        theta, fx, grad = cand, fc, new_grad
        it += 1
    else:
        converged = np.max(np.abs(grad)) < tol
    if not converged:
        log.debug("logistic regression stopped at max_iter=%d (grad max-norm %.3g)", max_iter, np.max(np.abs(grad)))
    return LogisticModel(theta[:d].copy(), float(theta[d]), float(C), params, it, bool(converged))
