"""Per-likelihood losses, the contrastive objective and its signed gradient split.

All losses are unnormalized negative log-likelihoods with data-only constants
dropped, so values are comparable across iterations of one fit but not
across datasets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .core import EPS, FactorModel, InvalidParameter, Likelihood, LikelihoodSpec, ShapeMismatch

BLOCKS = ("W", "HX", "HY")


@dataclass(frozen=True)
class GradientSplit:
    """Non-negative parts of a gradient: ``gradient = positive - negative``."""

    positive: np.ndarray
    negative: np.ndarray

    @property
    def gradient(self) -> np.ndarray:
        return self.positive - self.negative


def _check_same_shape(D: np.ndarray, R: np.ndarray) -> None:
    if D.shape != R.shape:
        raise ShapeMismatch(f"data {D.shape} and reconstruction {R.shape} differ in shape")


def zinb_log_zero_prob(R: np.ndarray, theta: float, pi: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(log_nb0, log_p0)`` for the ZINB zero cell.

    ``log_nb0 = theta * log(theta / (theta + R))`` is the log NB zero mass and
    ``log_p0 = log(pi + (1 - pi) * exp(log_nb0))`` the log ZINB zero mass.
    Both are evaluated in log space so large ``theta`` cannot overflow.
    """
    log_nb0 = -theta * np.log1p(R / theta)
    log_pi = np.log(pi) if pi > 0 else -np.inf
    log_keep = np.log1p(-pi)
    log_p0 = np.logaddexp(log_pi, log_keep + log_nb0)
    return log_nb0, log_p0


def zinb_zero_weight(R: np.ndarray, theta: float, pi: float) -> np.ndarray:
    """Posterior weight of the NB component at a zero cell, in [0, 1].

    Equals ``(1 - pi) q**theta / (pi + (1 - pi) q**theta)`` with
    ``q = theta / (theta + R)``; exactly 1 when ``pi == 0``.
    """
    log_nb0, log_p0 = zinb_log_zero_prob(R, theta, pi)
    return np.exp(np.log1p(-pi) + log_nb0 - log_p0)


def evaluate_loss(D: np.ndarray, R: np.ndarray, lik: LikelihoodSpec, eps: float = EPS) -> float:
    """Unnormalized loss of data ``D`` under reconstruction ``R``.

    Gaussian is the squared Frobenius norm.  Poisson, NB and ZINB are negative
    log-likelihoods without the factorial/gamma terms.  The ZINB zero cell
    carries the constant ``theta * log(theta)`` so that ``pi = 0`` reproduces
    the NB loss exactly.
    """
    D = np.asarray(D, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    _check_same_shape(D, R)
    kind = lik.kind
    if kind is Likelihood.GAUSSIAN:
        diff = D - R
        return float(np.sum(diff * diff))

    Rf = np.maximum(R, eps)
    if kind is Likelihood.POISSON:
        return float(np.sum(Rf - xlogy(D, Rf)))
    theta = lik.theta
    nb_cell = (D + theta) * np.log(theta + Rf) - xlogy(D, Rf)
    if kind is Likelihood.NB:
        return float(np.sum(nb_cell))
    if kind is Likelihood.ZINB:
        pos = D > 0
        _, log_p0 = zinb_log_zero_prob(Rf, theta, lik.pi)
        zero_cell = theta * np.log(theta) - log_p0
        pos_cell = nb_cell - np.log1p(-lik.pi)
        return float(np.sum(np.where(pos, pos_cell, zero_cell)))
    raise InvalidParameter(f"unknown likelihood {kind!r}")


def gaussian_loss_gram(D: np.ndarray, W: np.ndarray, H: np.ndarray, sq_norm: float | None = None) -> float:
    """``||D - W H||_F^2`` via the trace expansion, without forming ``W H``.

    Loses absolute accuracy of order ``1e-16 * ||D||^2``; used for objective
    traces on large problems where forming ``W H`` dominates runtime.
    """
    if sq_norm is None:
        sq_norm = float(np.vdot(D, D))
    cross = float(np.vdot(W, D @ H.T))
    quad = float(np.vdot(W.T @ W, H @ H.T))
    return sq_norm - 2.0 * cross + quad


def contrastive_objective(X, Y, model: FactorModel, lik: LikelihoodSpec, alpha: float, eps: float = EPS) -> float:
    """``L(X, W HX) - alpha * L(Y, W HY)``."""
    target = evaluate_loss(X, model.W @ model.HX, lik, eps)
    if alpha == 0:
        return target
    return target - alpha * evaluate_loss(Y, model.W @ model.HY, lik, eps)


def loss_derivative_parts(D: np.ndarray, R: np.ndarray, lik: LikelihoodSpec, eps: float = EPS):
    """Split ``dL/dR`` element-wise as ``P - N`` with ``P, N >= 0``."""
    _check_same_shape(D, R)
    kind = lik.kind
    if kind is Likelihood.GAUSSIAN:
        return 2.0 * R, 2.0 * D
    Rf = np.maximum(R, eps)
    ratio = D / Rf
    if kind is Likelihood.POISSON:
        return np.ones_like(R), ratio
    theta = lik.theta
    nb_pos = (theta + D) / (theta + Rf)
    if kind is Likelihood.NB:
        return nb_pos, ratio
    if kind is Likelihood.ZINB:
        pos = D > 0
        zero_part = theta * zinb_zero_weight(Rf, theta, lik.pi) / (theta + Rf)
        return np.where(pos, nb_pos, zero_part), np.where(pos, ratio, 0.0)
    raise InvalidParameter(f"unknown likelihood {kind!r}")


def gradient_split(X, Y, model: FactorModel, lik: LikelihoodSpec, alpha: float, wrt: str, eps: float = EPS) -> GradientSplit:
    """Signed split of the gradient for one parameter block.

    For ``wrt="W"`` and ``wrt="HX"`` the split is of the contrastive objective
    ``J``.  For ``wrt="HY"`` it is of the background loss ``L(Y, W HY)``, the
    quantity the background coefficient step descends; the gradient of ``J``
    itself is ``-alpha`` times that.  In every case ``negative / positive``
    is the multiplicative update ratio for the block.
    """
    if wrt not in BLOCKS:
        raise InvalidParameter(f"wrt must be one of {BLOCKS}, got {wrt!r}")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    W, HX, HY = model.W, model.HX, model.HY
    if wrt == "HX":
        P, N = loss_derivative_parts(X, W @ HX, lik, eps)
        return GradientSplit(W.T @ P, W.T @ N)
    if wrt == "HY":
        P, N = loss_derivative_parts(Y, W @ HY, lik, eps)
        return GradientSplit(W.T @ P, W.T @ N)
    PX, NX = loss_derivative_parts(X, W @ HX, lik, eps)
    pos = PX @ HX.T
    neg = NX @ HX.T
    if alpha:
        PY, NY = loss_derivative_parts(Y, W @ HY, lik, eps)
        pos = pos + alpha * (NY @ HY.T)
        neg = neg + alpha * (PY @ HY.T)
    return GradientSplit(pos, neg)
