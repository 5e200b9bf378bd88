"""Gaussian-process regression with an ARD squared-exponential kernel.

k(x, x') = sigma2 * exp(-theta1 * dlon**2 - theta2 * dlat**2), plus an
observation-noise variance ``noise2`` on the diagonal and a constant mean
equal to the training-target mean. Hyperparameters are fitted by maximising
the log marginal likelihood with a Nelder-Mead simplex in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize

JITTER_FLOOR = 1e-8
JITTER_CEIL = 1e-2
LOG_2PI = math.log(2.0 * math.pi)


class ConditioningError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GPHyperparams:
    sigma2: float
    theta1: float
    theta2: float
    noise2: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.theta1 >= 0 and self.theta2 >= 0 and self.noise2 >= 0):
            raise ValueError(f"invalid GP hyperparameters {self}")

    @property
    def floored_noise2(self) -> float:
        return max(self.noise2, JITTER_FLOOR * self.sigma2)

    def to_log(self) -> np.ndarray:
        return np.log([self.sigma2, self.theta1, self.theta2, self.floored_noise2])

    @classmethod
    def from_log(cls, v) -> "GPHyperparams":
        s, t1, t2, n = np.exp(np.clip(np.asarray(v, dtype=float), -700, 700))
        return cls(float(s), float(t1), float(t2), float(max(n, JITTER_FLOOR * s)))


def kernel_matrix(X, X2, hyper: GPHyperparams) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    X2 = np.asarray(X2, dtype=float).reshape(-1, 2)
    dlon = X[:, None, 0] - X2[None, :, 0]
    dlat = X[:, None, 1] - X2[None, :, 1]
    return hyper.sigma2 * np.exp(-hyper.theta1 * dlon * dlon - hyper.theta2 * dlat * dlat)


def factor(X, hyper: GPHyperparams) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + noise2*I.

    On failure the diagonal term is raised tenfold at a time, up to
    ``JITTER_CEIL * sigma2``. Returns ``(chol, noise_used)``.
    """
    K = kernel_matrix(X, X, hyper)
    noise = hyper.floored_noise2
    idx = np.diag_indices_from(K)
    base = K[idx].copy()
    while True:
        K[idx] = base + noise
        try:
            return cholesky(K, lower=True, check_finite=True), noise
        except (np.linalg.LinAlgError, ValueError):
            if noise >= JITTER_CEIL * hyper.sigma2:
                raise ConditioningError(f"Cholesky failed with noise {noise:.3g}") from None
            noise = min(noise * 10.0, JITTER_CEIL * hyper.sigma2)


def log_marginal_likelihood(X, y, hyper: GPHyperparams, mean: float | None = None) -> float:
    y = np.asarray(y, dtype=float)
    mu = float(np.mean(y)) if mean is None else float(mean)
    L, _ = factor(X, hyper)
    a = solve_triangular(L, y - mu, lower=True)
    return float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * len(y) * LOG_2PI)


@dataclass(frozen=True, eq=False)
class GPModel:
    hyper: GPHyperparams
    X: np.ndarray
    alpha: np.ndarray
    chol: np.ndarray
    mean_const: float
    noise_used: float
    lml: float
    # log-hyperparameter starts the optimiser used, with their LML values
    starts: tuple = field(default=())

    def predict(self, Xstar):
        """Posterior mean and variance at each row of ``Xstar``.

        Returns ``(mean, var, clamped)`` where ``clamped`` flags variances
        that came out negative from round-off and were set to 0.
        """
        Ks = kernel_matrix(self.X, Xstar, self.hyper)
        mean = self.mean_const + Ks.T @ self.alpha
        v = solve_triangular(self.chol, Ks, lower=True)
        var = self.hyper.sigma2 - np.einsum("ij,ij->j", v, v)
        clamped = var < 0
        var = np.where(clamped, 0.0, var)
        return mean, var, clamped


def build_model(X, y, hyper: GPHyperparams, lml: float | None = None, starts=()) -> GPModel:
    X = np.array(X, dtype=float).reshape(-1, 2)
    y = np.asarray(y, dtype=float)
    mu = float(np.mean(y))
    L, noise = factor(X, hyper)
    a = solve_triangular(L, y - mu, lower=True)
    alpha = solve_triangular(L.T, a, lower=False)
    if lml is None:
        lml = float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * len(y) * LOG_2PI)
    for arr in (X, alpha, L):
        arr.setflags(write=False)
    return GPModel(hyper, X, alpha, L, mu, noise, lml, tuple(starts))


def default_start(X, y) -> np.ndarray:
    """Data-scaled starting point in log space."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    var = float(np.var(y)) or 1.0
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    # length scale ~ a tenth of the extent on each axis
    theta = 1.0 / (0.1 * span) ** 2
    return np.log([var, theta[0], theta[1], 0.1 * var])


def fit(X, y, init_grid=None, restarts: int = 4, seed: int = 0,
        max_iter: int = 400) -> GPModel:
    """Maximum-likelihood fit from every start in ``init_grid`` plus ``restarts``
    seeded random starts around the data-scaled default.

    The best LML seen at any evaluated point wins, so the result is never
    worse than any start. Ties go to the earlier start.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    y = np.asarray(y, dtype=float)
    if len(X) < 2:
        raise ValueError("GP fit needs at least 2 points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    base = default_start(X, y)
    starts = [np.asarray(s, dtype=float) for s in (init_grid if init_grid is not None else [base])]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(base + rng.normal(0.0, 1.5, size=4))

    best = [-math.inf, None]

    def negative_lml(v):
        try:
            value = log_marginal_likelihood(X, y, GPHyperparams.from_log(v))
        except ConditioningError:
            return math.inf
        if not math.isfinite(value):
            return math.inf
        if value > best[0]:
            best[0], best[1] = value, np.array(v, dtype=float)
        return -value

    start_values = []
    for s in starts:
        start_values.append(-negative_lml(s))
        minimize(negative_lml, s, method="Nelder-Mead",
                 options={"maxiter": max_iter, "xatol": 1e-6, "fatol": 1e-9})
    if best[1] is None:
        raise ConditioningError("no start could be factorised")
    hyper = GPHyperparams.from_log(best[1])
    return build_model(X, y, hyper, starts=tuple(zip(map(tuple, starts), start_values)))
