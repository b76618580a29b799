"""Reference methods: standard multiplicative-update NMF and contrastive PCA."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    BcnmfError,
    Likelihood,
    LikelihoodSpec,
    Termination,
    TrainConfig,
    TrainReport,
    UnsupportedLikelihood,
    as_nonneg,
    init_factors,
    _check_counts,
)
from .objective import evaluate_loss, gaussian_loss_gram
from .trainer import relative_change
from .updates import update_coefficients


class InvalidRank(BcnmfError, ValueError):
    code = "InvalidRank"


def _lee_seung_basis(X, W, H, lik, eps):
    if lik.kind is Likelihood.GAUSSIAN:
        num = X @ H.T
        den = W @ (H @ H.T)
    else:
        num = (X / (W @ H + eps)) @ H.T
        den = np.broadcast_to(H.sum(axis=1)[None, :], num.shape)
    return W * num / (den + eps)


def nmf_fit(X, K: int, lik: LikelihoodSpec, config: TrainConfig):
    """Classical Lee-Seung NMF of ``X`` with ``K`` topics.

    Gaussian minimizes the squared Frobenius error, Poisson the generalized
    KL divergence.  Initialization draws ``W`` and ``H`` exactly as the
    contrastive trainer draws ``W`` and ``HX`` for the same seed, so the two
    trajectories coincide at ``alpha = 0``.

    Returns
    -------
    W : ndarray (M x K)
    H : ndarray (K x N)
    report : TrainReport
    """
    if lik.kind not in (Likelihood.GAUSSIAN, Likelihood.POISSON):
        raise UnsupportedLikelihood(f"nmf_fit supports gaussian and poisson, got {lik.kind.value}")
    X = as_nonneg(X, "X")
    if lik.is_count:
        _check_counts(X, "X")
    eps = config.eps
    init = init_factors(X.shape[0], K, X.shape[1], 1, config.seed, eps)
    W, H = init.W, init.HX

    if lik.kind is Likelihood.GAUSSIAN:
        xx = float(np.vdot(X, X))
        loss = lambda W, H: gaussian_loss_gram(X, W, H, xx)  # noqa: E731
    else:
        loss = lambda W, H: evaluate_loss(X, W @ H, lik, eps)  # noqa: E731

    start = time.perf_counter()
    report = TrainReport()
    previous = loss(W, H)
    for _ in range(config.max_iter):
        H = update_coefficients(X, W, H, lik, eps)
        W = _lee_seung_basis(X, W, H, lik, eps)
        current = loss(W, H)
        report.objective_trace.append(current)
        if not np.isfinite(current):
            report.termination = Termination.DEGENERATE
            break
        if relative_change(current, previous, eps) <= config.tol:
            report.termination = Termination.CONVERGED
            break
        previous = current
    else:
        report.termination = Termination.MAX_ITER
    report.wall_time = time.perf_counter() - start
    return W, H, report


@dataclass(frozen=True)
class CPCAResult:
    projection: np.ndarray  # M x K, orthonormal columns
    coordinates: np.ndarray  # K x N_X, projected centred target
    eigenvalues: np.ndarray  # K, descending


def contrastive_covariance(X, Y, alpha: float) -> np.ndarray:
    """``C_X - alpha * C_Y`` with columns as samples and 1/(N-1) normalization."""
    X = np.asarray(X, dtype=np.float64)
    C = np.cov(X, rowvar=True)
    if alpha:
        C = C - alpha * np.cov(np.asarray(Y, dtype=np.float64), rowvar=True)
    C = np.atleast_2d(C)
    return 0.5 * (C + C.T)


def cpca_fit(X, Y, K: int, alpha: float) -> CPCAResult:
    """Top-``K`` eigenvectors of the contrastive covariance; ``alpha = 0`` is PCA."""
    X = np.asarray(X, dtype=np.float64)
    M = X.shape[0]
    if not 1 <= K <= M:
        raise InvalidRank(f"K must lie in [1, {M}], got {K}")
    if X.shape[1] < 2 or (alpha and np.asarray(Y).shape[1] < 2):
        raise InvalidRank("covariance needs at least two samples per dataset")
    C = contrastive_covariance(X, Y, alpha)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1][:K]
    P = vecs[:, order]
    # Fix the sign so the largest-magnitude loading of each direction is positive.
    flip = np.sign(P[np.abs(P).argmax(axis=0), np.arange(K)])
    P = P * np.where(flip == 0, 1.0, flip)
    Xc = X - X.mean(axis=1, keepdims=True)
    return CPCAResult(projection=P, coordinates=P.T @ Xc, eigenvalues=vals[order])
