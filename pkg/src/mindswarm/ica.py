"""Blind source separation for ocular-artifact removal.

Fixed-point iteration with a tanh contrast and symmetric decorrelation on
whitened data. Components are ordered by back-projected variance so index 0
is always the most energetic source, which keeps flagging deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .recording import Recording

DEFAULT_TOLERANCE = 1e-5
DEFAULT_MAX_ITER = 500
DEFAULT_PROXY_CHANNELS = ("Fp1", "Fp2")
DEFAULT_CORR_THRESHOLD = 0.7
DEFAULT_KURTOSIS_THRESHOLD = 20.0

_RANK_RTOL = 1e-10


class IcaError(ValueError):
    pass


class IcaRankError(IcaError):
    pass


@dataclass
class IcaModel:
    """Whitening + rotation learned from one recording.

    ``whitener`` maps channels to the whitened subspace, ``unmixing`` is the
    orthonormal rotation within it, ``mixing`` back-projects component
    activations to channel space (pseudo-inverse of the composed transform).
    """

    whitener: np.ndarray
    unmixing: np.ndarray
    mixing: np.ndarray
    n_components: int
    convergence_iterations: int
    converged: bool

    @property
    def transform_matrix(self) -> np.ndarray:
        """components x channels: full unmixing including whitening."""
        return self.unmixing @ self.whitener

    def activations(self, data: np.ndarray) -> np.ndarray:
        """Component time courses of ``data`` (centered per channel)."""
        centered = data - data.mean(axis=1, keepdims=True)
        return self.transform_matrix @ centered


def _symmetric_decorrelation(w: np.ndarray) -> np.ndarray:
    s, u = linalg.eigh(w @ w.T)
    s = np.clip(s, 1e-15, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fit_ica(
    data: np.ndarray,
    n_components: int | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> IcaModel:
    """Fit the decomposition on a channels x time matrix.

    Parameters
    ----------
    data : (n_channels, n_times) array
        Continuous multichannel signal; mean is removed internally.
    n_components : int, optional
        Subspace size; defaults to the numerical rank of the data.
    tolerance : float
        Convergence threshold on the fixed-point rotation update.
    max_iter : int
        Iteration cap; hitting it returns a model with ``converged=False``.
    seed : int
        Seeds the rotation initialization; fits are deterministic given
        (data, seed).
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise IcaError("data must be channels x time")
    n_channels, n_times = x.shape
    if n_times < 20 * n_channels:
        raise IcaError(
            f"need at least 20 samples per channel ({20 * n_channels}), got {n_times}"
        )
    x = x - x.mean(axis=1, keepdims=True)

    cov = (x @ x.T) / (n_times - 1)
    eigvals, eigvecs = linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    rank = int(np.sum(eigvals > eigvals[0] * _RANK_RTOL))
    if n_components is None:
        n_components = rank
    if n_components < 1 or n_components > n_channels:
        raise IcaError(f"n_components {n_components} out of range 1..{n_channels}")
    if n_components > rank:
        raise IcaRankError(
            f"requested {n_components} components but data rank is {rank}"
        )

    whitener = (eigvecs[:, :n_components] / np.sqrt(eigvals[:n_components])).T
    z = whitener @ x

    rng = np.random.default_rng(seed)
    w = _symmetric_decorrelation(rng.standard_normal((n_components, n_components)))

    converged = False
    iterations = max_iter
    for it in range(1, max_iter + 1):
        g = np.tanh(w @ z)
        g_prime = (1.0 - g * g).mean(axis=1)
        w_new = (g @ z.T) / n_times - g_prime[:, None] * w
        w_new = _symmetric_decorrelation(w_new)
        delta = float(np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0)))
        w = w_new
        if delta < tolerance:
            converged = True
            iterations = it
            break

    # pseudo-inverse of (w @ whitener) via the whitening eigenstructure
    dewhitener = eigvecs[:, :n_components] * np.sqrt(eigvals[:n_components])
    mixing = dewhitener @ w.T

    # activations have unit variance, so back-projected power per component
    # is the squared norm of its mixing column
    power = np.sum(mixing * mixing, axis=0)
    idx = np.argsort(-power, kind="stable")
    w = w[idx]
    mixing = mixing[:, idx]

    return IcaModel(
        whitener=whitener,
        unmixing=w,
        mixing=mixing,
        n_components=n_components,
        convergence_iterations=iterations,
        converged=converged,
    )


def flag_artifact_components(
    model: IcaModel,
    rec: Recording,
    proxy_channels=DEFAULT_PROXY_CHANNELS,
    corr_threshold: float = DEFAULT_CORR_THRESHOLD,
    kurtosis_threshold: float | None = DEFAULT_KURTOSIS_THRESHOLD,
) -> list:
    """Indices of components that track ocular proxy channels or spike.

    A component is flagged when the absolute Pearson correlation between its
    activation and any proxy channel exceeds ``corr_threshold``, or when its
    excess kurtosis exceeds ``kurtosis_threshold`` (pass None to disable the
    kurtosis guard).
    """
    missing = [ch for ch in proxy_channels if ch not in rec.layout]
    if missing:
        raise IcaError(
            f"proxy channels {missing} not in layout; available: "
            f"{', '.join(rec.layout.names)}"
        )
    acts = model.activations(rec.samples)
    proxies = np.stack([rec.channel(ch) for ch in proxy_channels])
    proxies = proxies - proxies.mean(axis=1, keepdims=True)
    proxy_std = proxies.std(axis=1)

    flagged = []
    for i in range(model.n_components):
        a = acts[i]
        a_std = a.std()
        hit = False
        if a_std > 0:
            for p, p_std in zip(proxies, proxy_std):
                if p_std == 0:
                    continue
                r = float(np.dot(a - a.mean(), p) / (a.size * a_std * p_std))
                if abs(r) > corr_threshold:
                    hit = True
                    break
        if not hit and kurtosis_threshold is not None and a_std > 0:
            centered = a - a.mean()
            m2 = np.mean(centered**2)
            kurt = float(np.mean(centered**4) / (m2 * m2) - 3.0)
            if kurt > kurtosis_threshold:
                hit = True
        if hit:
            flagged.append(i)
    return flagged


def remove_components(model: IcaModel, rec: Recording, indices) -> Recording:
    """Back-project with the given component activations zeroed.

    With no indices this is the retained-subspace reconstruction (identity
    when the model kept full rank); removing everything leaves each channel
    at its mean.
    """
    indices = list(indices)
    for i in indices:
        if not (0 <= i < model.n_components):
            raise IcaError(
                f"component index {i} out of range 0..{model.n_components - 1}"
            )
    mean = rec.samples.mean(axis=1, keepdims=True)
    acts = model.transform_matrix @ (rec.samples - mean)
    if indices:
        acts[indices] = 0.0
    cleaned = model.mixing @ acts + mean
    return rec.with_samples(cleaned)
