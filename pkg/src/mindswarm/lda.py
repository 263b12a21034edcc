"""Linear discriminant with shrinkage-regularized pooled covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

RIDGE_SCALE = 1e-9


class LdaError(ValueError):
    pass


@dataclass
class LdaModel:
    weights: np.ndarray
    bias: float
    class_means: np.ndarray  # (2, d): positive mean first
    shrinkage: float
    ridge_applied: bool = False

    def score(self, features: np.ndarray) -> float:
        return float(self.weights @ np.asarray(features, dtype=np.float64) + self.bias)

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Batch scores for an (n, d) feature matrix."""
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias


def fit_lda(features: np.ndarray, positive: np.ndarray, shrinkage: float = 0.05) -> LdaModel:
    """Fit w = S^-1 (mu+ - mu-) with S the shrunk pooled covariance.

    S = (1 - gamma) * pooled + gamma * (trace/d) * I. The bias centers the
    decision boundary between the class means. A singular S at gamma=0 gets
    an automatic tiny ridge, reported via ``ridge_applied``.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise LdaError("features must be n x d")
    pos = np.asarray(positive, dtype=bool)
    if pos.shape[0] != f.shape[0]:
        raise LdaError("labels length does not match feature rows")
    if not (0.0 <= shrinkage <= 1.0):
        raise LdaError(f"shrinkage must be in [0, 1], got {shrinkage}")
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise LdaError("both classes must be present")

    d = f.shape[1]
    mu_pos = f[pos].mean(axis=0)
    mu_neg = f[~pos].mean(axis=0)
    xp = f[pos] - mu_pos
    xn = f[~pos] - mu_neg
    pooled = (xp.T @ xp + xn.T @ xn) / max(n_pos + n_neg - 2, 1)

    trace_mean = float(np.trace(pooled)) / d
    cov = (1.0 - shrinkage) * pooled + shrinkage * trace_mean * np.eye(d)

    # rank-deficient pooled covariance (tiny or negative eigenvalue) gets a
    # tiny ridge rather than trusting a lucky Cholesky pivot
    eigvals = linalg.eigvalsh(cov)
    ridge_applied = False
    if eigvals[0] <= eigvals[-1] * 1e-10:
        ridge = RIDGE_SCALE * trace_mean if trace_mean > 0 else RIDGE_SCALE
        cov = cov + ridge * np.eye(d)
        ridge_applied = True

    diff = mu_pos - mu_neg
    try:
        chol = linalg.cho_factor(cov)
        weights = linalg.cho_solve(chol, diff)
    except linalg.LinAlgError:
        if ridge_applied:
            raise LdaError("covariance singular even after ridge")
        ridge = RIDGE_SCALE * trace_mean if trace_mean > 0 else RIDGE_SCALE
        cov = cov + ridge * np.eye(d)
        try:
            chol = linalg.cho_factor(cov)
        except linalg.LinAlgError as exc:
            raise LdaError("covariance singular even after ridge") from exc
        weights = linalg.cho_solve(chol, diff)
        ridge_applied = True

    bias = -float(weights @ (mu_pos + mu_neg)) / 2.0
    return LdaModel(
        weights=weights,
        bias=bias,
        class_means=np.stack([mu_pos, mu_neg]),
        shrinkage=shrinkage,
        ridge_applied=ridge_applied,
    )
