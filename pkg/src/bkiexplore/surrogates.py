"""Kernel surrogate models predicting MI at unevaluated actions.

Two sklearn-style regressors over SE(2) actions:

* :class:`BKIRegressor` -- closed-form Bayesian kernel inference. The
  posterior at a query is a kernel-weighted combination of the training
  values and the prior mean, with variance sigma2 / (zeta + kernel mass).
  Prediction is a dense exact summation, linear in n_train * n_query.
* :class:`GPRegressor` -- standard zero-mean Gaussian-process regression
  with a Cholesky factorization of the noisy Gram matrix (the cubic-cost
  baseline the BKI model is compared against).

Both use a Matern 3/2 kernel over action distance. By default distance is
positional only; a heading weight can fold in the wrapped heading
difference.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .pose import Pose, poses_to_array

SQRT3 = math.sqrt(3.0)


def matern32(r, length_scale: float = 1.0):
    """Matern 3/2 kernel value(s) at distance(s) ``r``."""
    if length_scale <= 0:
        raise ValueError("length_scale must be positive")
    s = SQRT3 * np.asarray(r, dtype=np.float64) / length_scale
    return (1.0 + s) * np.exp(-s)


def action_distances(a: np.ndarray, b: np.ndarray, heading_weight: float = 0.0) -> np.ndarray:
    """Pairwise distances between (n, 3) action arrays.

    r = sqrt(dx^2 + dy^2 + w * wrap(dpsi)^2); w = 0 keeps the kernel
    positional only.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    d2 = cdist(a[:, :2], b[:, :2], "sqeuclidean")
    if heading_weight > 0.0 and a.shape[1] > 2 and b.shape[1] > 2:
        dpsi = a[:, 2:3] - b[:, 2].reshape(1, -1)
        dpsi = np.remainder(dpsi + np.pi, 2.0 * np.pi) - np.pi
        d2 = d2 + heading_weight * dpsi**2
    return np.sqrt(d2)


def kernel(a, b, length_scale: float = 1.0, heading_weight: float = 0.0) -> float:
    """Kernel between two single actions (poses or triples)."""
    ra = poses_to_array([a] if isinstance(a, Pose) else [np.asarray(a)])
    rb = poses_to_array([b] if isinstance(b, Pose) else [np.asarray(b)])
    return float(matern32(action_distances(ra, rb, heading_weight), length_scale)[0, 0])


def validate_actions(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite (n, 2|3) float array; n = 0 is allowed."""
    X = poses_to_array(X)
    if X.ndim != 2 or (X.shape[0] and X.shape[1] not in (2, 3)):
        raise ValueError(f"{name} must be an (n, 2) or (n, 3) array of actions")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return X


@dataclass
class TrainingSet:
    """Explicitly evaluated (action, MI) pairs feeding the surrogates."""

    actions: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def add_sample(self, action, mi_bits: float) -> None:
        mi_bits = float(mi_bits)
        if not math.isfinite(mi_bits) or mi_bits < 0:
            raise ValueError("MI value must be finite and >= 0")
        self.actions.append(action)
        self.values.append(mi_bits)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def X(self) -> np.ndarray:
        return poses_to_array(self.actions)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class BKIRegressor(RegressorMixin, BaseEstimator):
    """Closed-form Bayesian kernel inference of MI mean and variance.

    Parameters
    ----------
    length_scale : Matern 3/2 characteristic length.
    zeta : prior confidence; small positive (0.001 default).
    sigma2 : likelihood variance.
    mu0 : prior mean; 0 treats unobserved actions as uninformative.
    heading_weight : weight of the wrapped heading difference in distance.
    """

    def __init__(self, length_scale: float = 1.0, zeta: float = 1e-3,
                 sigma2: float = 1e-4, mu0: float = 0.0, heading_weight: float = 0.0):
        self.length_scale = length_scale
        self.zeta = zeta
        self.sigma2 = sigma2
        self.mu0 = mu0
        self.heading_weight = heading_weight

    def _check_params(self):
        if self.zeta <= 0 or self.sigma2 <= 0 or self.length_scale <= 0:
            raise ValueError("length_scale, zeta and sigma2 must be positive")

    def fit(self, X, y=None):
        """Store the training set; an empty set recovers the prior."""
        self._check_params()
        X = validate_actions(X)
        y = np.zeros(0) if y is None else np.asarray(y, dtype=np.float64).ravel()
        if len(X) != len(y):
            raise ValueError("X and y lengths differ")
        self.X_train_ = X
        self.y_train_ = y
        return self

    def add_sample(self, action, mi_bits: float) -> None:
        """Append one explicitly evaluated (action, MI) pair."""
        self._require_fit()
        row = validate_actions([action])
        if self.X_train_.shape[0] and row.shape[1] != self.X_train_.shape[1]:
            raise ValueError("action dimensionality differs from the training set")
        self.X_train_ = np.concatenate([self.X_train_, row]) if self.X_train_.size else row
        self.y_train_ = np.append(self.y_train_, float(mi_bits))

    def _require_fit(self):
        if not hasattr(self, "X_train_"):
            raise NotFittedError("fit must be called first (an empty set is fine)")

    def kernel_mass(self, X) -> np.ndarray:
        """k-bar at each query: summed kernel to all training actions."""
        self._require_fit()
        X = validate_actions(X)
        if len(self.X_train_) == 0:
            return np.zeros(len(X))
        K = matern32(action_distances(X, self.X_train_, self.heading_weight),
                     self.length_scale)
        return K.sum(axis=1)

    def predict(self, X, return_var: bool = False, return_kernel_mass: bool = False):
        """Posterior mean (and optionally variance, kernel mass) per query.

        Uses the exact forms mean = (y-bar + zeta*mu0) / (zeta + k-bar)
        and var = sigma2 / (zeta + k-bar), well defined even at zero
        kernel mass.
        """
        self._require_fit()
        X = validate_actions(X)
        n = len(X)
        if len(self.X_train_) == 0:
            kbar = np.zeros(n)
            ybar = np.zeros(n)
        else:
            K = matern32(action_distances(X, self.X_train_, self.heading_weight),
                         self.length_scale)
            kbar = K.sum(axis=1)
            ybar = K @ self.y_train_
        denom = self.zeta + kbar
        mean = (ybar + self.zeta * self.mu0) / denom
        out = [mean]
        if return_var:
            out.append(self.sigma2 / denom)
        if return_kernel_mass:
            out.append(kbar)
        return out[0] if len(out) == 1 else tuple(out)


class GPRegressor(RegressorMixin, BaseEstimator):
    """Zero-mean GP regression baseline with a Matern 3/2 kernel.

    Fitting factorizes K + sigma2*I by Cholesky, escalating diagonal
    jitter up to ``max_jitter`` if needed. Predictive variance includes
    the observation noise sigma2.
    """

    def __init__(self, length_scale: float = 1.0, sigma2: float = 1e-4,
                 heading_weight: float = 0.0, max_jitter: float = 1e-6):
        self.length_scale = length_scale
        self.sigma2 = sigma2
        self.heading_weight = heading_weight
        self.max_jitter = max_jitter

    def fit(self, X, y):
        if self.sigma2 <= 0 or self.length_scale <= 0:
            raise ValueError("length_scale and sigma2 must be positive")
        X = validate_actions(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) == 0 or len(X) != len(y):
            raise ValueError("need at least one training sample with matching y")
        t0 = time.perf_counter()
        K = matern32(action_distances(X, X, self.heading_weight), self.length_scale)
        K[np.diag_indices_from(K)] += self.sigma2
        jitter = 0.0
        while True:
            try:
                self.cho_ = cho_factor(K + jitter * np.eye(len(K)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
                if jitter > self.max_jitter:
                    raise np.linalg.LinAlgError(
                        f"Gram matrix not positive definite after jitter {self.max_jitter}")
        self.X_train_ = X
        self.y_train_ = y
        self.alpha_ = cho_solve(self.cho_, y)
        self.fit_time_s_ = time.perf_counter() - t0
        return self

    def predict(self, X, return_var: bool = False):
        if not hasattr(self, "cho_"):
            raise NotFittedError("GPRegressor.predict called before fit")
        X = validate_actions(X)
        Ks = matern32(action_distances(X, self.X_train_, self.heading_weight),
                      self.length_scale)
        mean = Ks @ self.alpha_
        if not return_var:
            return mean
        V = solve_triangular(self.cho_[0], Ks.T, lower=True)
        var = 1.0 - np.einsum("ij,ij->j", V, V) + self.sigma2
        return mean, np.maximum(var, self.sigma2 * 1e-12)
