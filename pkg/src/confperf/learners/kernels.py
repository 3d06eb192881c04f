"""Kernel ridge regression and epsilon-insensitive support vector regression.

Both work on encoded rows. Kernels: ``linear`` x.z, ``poly`` (gamma x.z + coef0)^degree,
``rbf`` exp(-gamma |x - z|^2).
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .. import backend
from .base import Encoder, LearnerError

KERNELS = ("linear", "poly", "rbf")


class ConvergenceWarning(UserWarning):
    pass


def kernel_matrix(A, B, kernel: str, degree=3, gamma=1.0, coef0=0.0) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (gamma * (A @ B.T) + coef0) ** int(degree)
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise LearnerError(f"kernel must be one of {', '.join(KERNELS)}, got {kernel!r}")


class KernelModel:
    """``f(x) = k(x, support) @ coef - bias``; a linear kernel may keep primal weights instead."""

    def __init__(self, encoder, support, coef, bias, kernel, degree, gamma, coef0, weights=None, **info):
        self.encoder = encoder
        self.support = np.asarray(support, dtype=float).reshape(-1, len(encoder.low))
        self.coef = np.asarray(coef, dtype=float)
        self.bias = float(bias)
        self.kernel = kernel
        self.degree = int(degree)
        self.gamma = float(gamma)
        self.coef0 = float(coef0)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.info = info

    def predict(self, X):
        Z = self.encoder.transform(X)
        if self.weights is not None:
            return Z @ self.weights - self.bias
        K = kernel_matrix(Z, self.support, self.kernel, self.degree, self.gamma, self.coef0)
        return K @ self.coef - self.bias

    def state(self):
        s = {"low": self.encoder.low.tolist(), "span": self.encoder.span.tolist(),
             "support": self.support.tolist(), "coef": self.coef.tolist(), "bias": self.bias,
             "kernel": self.kernel, "degree": self.degree, "gamma": self.gamma, "coef0": self.coef0,
             "info": self.info}
        if self.weights is not None:
            s["weights"] = self.weights.tolist()
        return s

    @classmethod
    def from_state(cls, s):
        enc = Encoder(np.array(s["low"]), np.array(s["span"]))
        return cls(enc, s["support"], s["coef"], s["bias"], s["kernel"], s["degree"], s["gamma"],
                   s["coef0"], s.get("weights"), **s.get("info", {}))


def fit_krr(space, X, y, hp) -> KernelModel:
    alpha = float(hp["alpha"])
    if not alpha >= 0:
        raise LearnerError("alpha must be >= 0")
    kernel = hp["kernel"]
    enc = Encoder.from_space(space)
    Z = enc.transform(X)
    y = np.asarray(y, dtype=float)
    degree, gamma, coef0 = int(hp["degree"]), float(hp["gamma"]), 1.0
    if kernel == "linear":
        # push-through identity: X^T (X X^T + aI)^-1 y = (X^T X + aI)^-1 X^T y, better conditioned
        G = Z.T @ Z + alpha * np.eye(Z.shape[1])
        w = _solve(G, Z.T @ y, alpha)
        coef = (y - Z @ w) / alpha if alpha > 0 else np.zeros(len(y))
        return KernelModel(enc, Z, coef, 0.0, kernel, degree, gamma, coef0, weights=w)
    K = kernel_matrix(Z, Z, kernel, degree, gamma, coef0)
    coef = _solve(K + alpha * np.eye(len(y)), y, alpha)
    return KernelModel(enc, Z, coef, 0.0, kernel, degree, gamma, coef0)


def _solve(M, b, alpha):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(M, b, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        hint = "; use alpha > 0" if alpha == 0 else ""
        raise LearnerError(f"kernel system is singular{hint}") from None


def svr_gamma(gamma, Z) -> float:
    if gamma == "scale":
        var = float(Z.var())
        return 1.0 / (Z.shape[1] * var) if var > 0 else 1.0
    if gamma == "auto":
        return 1.0 / Z.shape[1]
    return float(gamma)


def fit_svr(space, X, y, hp, max_iter: int | None = None) -> KernelModel:
    """Epsilon-SVR by SMO; ``max_iter`` (argument, else ``hp["max_iter"]``) caps solver iterations."""
    C, eps, tol = float(hp["C"]), float(hp["epsilon"]), float(hp["tol"])
    if max_iter is None:
        max_iter = int(hp.get("max_iter", 1_000_000))
    if max_iter < 1:
        raise LearnerError("max_iter must be >= 1")
    if not C > 0:
        raise LearnerError("C must be > 0")
    if not eps >= 0:
        raise LearnerError("epsilon must be >= 0")
    if not tol > 0:
        raise LearnerError("tol must be > 0")
    enc = Encoder.from_space(space)
    Z = enc.transform(X)
    y = np.asarray(y, dtype=float)
    kernel = hp["kernel"]
    gamma = svr_gamma(hp["gamma"], Z)
    K = kernel_matrix(Z, Z, kernel, hp["degree"], gamma, float(hp["coef0"]))
    coef, rho, n_iter, converged, _alpha = backend.smo_solve(K, y, C, eps, tol, bool(hp["shrinking"]), max_iter)
    if not converged:
        warnings.warn(f"SVR stopped after {n_iter} iterations without reaching tol={tol}", ConvergenceWarning)
    sv = np.flatnonzero(coef != 0)
    return KernelModel(enc, Z[sv], coef[sv], rho, kernel, hp["degree"], gamma, float(hp["coef0"]),
                       n_iter=int(n_iter), converged=bool(converged))
