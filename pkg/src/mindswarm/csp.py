"""Spatial filtering by common spatial patterns.

One-vs-rest usage: the generalized eigenproblem C_target w = lambda
(C_target + C_rest) w is solved on averaged trace-normalized trial
covariances; the m largest and m smallest eigenvalues give the filters.
Because eigenvectors come out composite-normalized (w' (C_t + C_r) w = 1),
the two class covariances are jointly diagonalized and eigenvalues of the
swapped problem are exactly 1 - lambda.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .epochs import EpochSet


class DegenerateTrialError(ValueError):
    pass


class CspError(ValueError):
    pass


@dataclass
class CspModel:
    target_class: str
    filters: np.ndarray      # (2m, channels), rows are spatial filters
    eigenvalues: np.ndarray  # (2m,), m largest then m smallest
    n_pairs: int


def trial_covariance(trial: np.ndarray) -> np.ndarray:
    """Sample covariance of one channels x time trial, trace-normalized."""
    x = np.asarray(trial, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("trial must be channels x time")
    x = x - x.mean(axis=1, keepdims=True)
    denom = max(x.shape[1] - 1, 1)
    cov = (x @ x.T) / denom
    trace = float(np.trace(cov))
    if not np.isfinite(trace) or trace <= 0.0:
        raise DegenerateTrialError("trial has no variance")
    return cov / trace


def stack_covariances(epochs: EpochSet) -> np.ndarray:
    """Per-trial trace-normalized covariances, (n_trials, C, C)."""
    return np.stack([trial_covariance(t) for t in epochs.data])


def fit_csp_from_covariances(
    covs: np.ndarray, labels, target_class: str, n_pairs: int
) -> CspModel:
    labels = np.asarray(labels)
    target_mask = labels == target_class
    n_target = int(target_mask.sum())
    if n_target < 2:
        raise CspError(f"target class {target_class!r} has {n_target} trials, need >= 2")
    if not (~target_mask).any():
        raise CspError("rest class is empty")
    n_channels = covs.shape[1]
    if 2 * n_pairs > n_channels:
        raise CspError(
            f"n_pairs={n_pairs} needs {2 * n_pairs} filters but only "
            f"{n_channels} channels available"
        )

    c_target = covs[target_mask].mean(axis=0)
    c_rest = covs[~target_mask].mean(axis=0)
    composite = c_target + c_rest
    composite = 0.5 * (composite + composite.T)

    eigvals, eigvecs = _solve_generalized(c_target, composite, 2 * n_pairs)

    n_kept = eigvals.shape[0]
    m = n_pairs
    top = np.arange(n_kept - 1, n_kept - m - 1, -1)  # largest, descending
    bottom = np.arange(0, m)                         # smallest, ascending
    sel = np.concatenate([top, bottom])
    filters = eigvecs[:, sel].T
    eigenvalues = np.clip(eigvals[sel], 0.0, 1.0)
    return CspModel(
        target_class=target_class,
        filters=np.ascontiguousarray(filters),
        eigenvalues=eigenvalues,
        n_pairs=n_pairs,
    )


_RANK_RTOL = 1e-10


def _solve_generalized(a: np.ndarray, b: np.ndarray, min_rank: int):
    """Eigenpairs of a w = lambda b w restricted to b's numerical range.

    Whitening with rank truncation keeps filters inside the span of the data
    (rank-deficient composites happen whenever upstream cleaning removed
    components), and returned eigenvectors satisfy w' b w = 1.
    """
    bvals, bvecs = linalg.eigh(b)
    if not np.all(np.isfinite(bvals)):
        raise CspError("composite covariance has non-finite entries")
    keep = bvals > bvals[-1] * _RANK_RTOL
    rank = int(keep.sum())
    if rank < min_rank:
        raise CspError(
            f"composite covariance rank {rank} below required {min_rank}"
        )
    white = bvecs[:, keep] / np.sqrt(bvals[keep])
    reduced = white.T @ a @ white
    reduced = 0.5 * (reduced + reduced.T)
    eigvals, eigvecs = linalg.eigh(reduced)
    return eigvals, white @ eigvecs


def fit_csp(epochs: EpochSet, target_class: str, n_pairs: int = 3) -> CspModel:
    """Fit target-vs-rest spatial filters on an epoch set."""
    if target_class not in epochs.labels:
        raise CspError(f"class {target_class!r} not present in epochs")
    return fit_csp_from_covariances(
        stack_covariances(epochs), epochs.labels, target_class, n_pairs
    )


_LOG_FLOOR = 1e-30


def features_from_covariance(model: CspModel, cov: np.ndarray) -> np.ndarray:
    """Log of normalized projected variances, length 2m."""
    v = np.einsum("fc,cd,fd->f", model.filters, cov, model.filters)
    total = float(v.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateTrialError("trial has no variance along CSP filters")
    return np.log(np.maximum(v / total, _LOG_FLOOR))


def csp_features(model: CspModel, trial: np.ndarray) -> np.ndarray:
    """Feature vector f_j = log(var(w_j x) / sum_k var(w_k x)) for one trial.

    Invariant under positive scaling of the trial.
    """
    trial = np.asarray(trial, dtype=np.float64)
    if trial.shape[0] != model.filters.shape[1]:
        raise CspError(
            f"trial has {trial.shape[0]} channels, filters expect "
            f"{model.filters.shape[1]}"
        )
    return features_from_covariance(model, trial_covariance(trial))
