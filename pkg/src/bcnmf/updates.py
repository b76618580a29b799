"""Multiplicative update steps for the coefficient blocks and the shared basis.

Each rule has the form ``param * numerator / (denominator + eps)``.  ``eps``
enters denominators only, so exact zeros in a factor stay zero.
"""
from __future__ import annotations

import numpy as np

from .core import EPS, FactorModel, InvalidParameter, Likelihood, LikelihoodSpec, ShapeMismatch
from .objective import zinb_zero_weight


def _check_coefficient_shapes(D, W, H):
    if D.ndim != 2 or W.ndim != 2 or H.ndim != 2:
        raise ShapeMismatch("data and factors must be 2-D")
    if W.shape[0] != D.shape[0] or H.shape[1] != D.shape[1] or W.shape[1] != H.shape[0]:
        raise ShapeMismatch(f"incompatible shapes: D {D.shape}, W {W.shape}, H {H.shape}")


def _count_terms(D, R, lik, eps):
    """Return ``(num_cell, den_cell)``: the cell-wise pull toward larger and smaller ``R``."""
    ratio = D / (R + eps)
    if lik.kind is Likelihood.POISSON:
        return ratio, None
    theta = lik.theta
    den_cell = (theta + D) / (theta + R)
    if lik.kind is Likelihood.NB:
        return ratio, den_cell
    pos = D > 0
    zero_cell = theta * zinb_zero_weight(R, theta, lik.pi) / (theta + R)
    return np.where(pos, ratio, 0.0), np.where(pos, den_cell, zero_cell)


def coefficient_terms(D, W, H, lik: LikelihoodSpec, eps: float = EPS):
    """Numerator and denominator of the coefficient update (before ``+ eps``)."""
    if lik.kind is Likelihood.GAUSSIAN:
        return W.T @ D, (W.T @ W) @ H
    num_cell, den_cell = _count_terms(D, W @ H, lik, eps)
    num = W.T @ num_cell
    if den_cell is None:
        den = np.broadcast_to(W.sum(axis=0)[:, None], num.shape)
    else:
        den = W.T @ den_cell
    return num, den


def update_coefficients(D, W, H, lik: LikelihoodSpec, eps: float = EPS) -> np.ndarray:
    """One multiplicative step on a coefficient block ``H`` with ``W`` fixed.

    Gaussian: ``H * W'D / W'WH``.  Poisson: ``H * W'(D/WH) / W'1``.
    NB: ``H * W'(D/WH) / W'((theta+D)/(theta+WH))``.  ZINB: as NB on the
    positive cells, with the zero cells contributing only to the
    denominator through the dropout-weighted NB zero mass.

    The step never involves ``alpha``; the same rule serves target and
    background blocks.
    """
    D = np.asarray(D, dtype=np.float64)
    _check_coefficient_shapes(D, W, H)
    num, den = coefficient_terms(D, W, H, lik, eps)
    return H * num / (den + eps)


def basis_terms(X, Y, model: FactorModel, lik: LikelihoodSpec, alpha: float, eps: float = EPS):
    """Numerator and denominator of the basis update (before ``+ eps``)."""
    W, HX, HY = model.W, model.HX, model.HY
    if lik.kind is Likelihood.GAUSSIAN:
        num = X @ HX.T
        den = W @ (HX @ HX.T)
        if alpha:
            # W-dependent background term sits in the numerator as published.
            num = num + alpha * (W @ (HY @ HY.T))
            den = den + alpha * (Y @ HY.T)
        return num, den

    num_x, den_x = _count_terms(X, W @ HX, lik, eps)
    num = num_x @ HX.T
    if den_x is None:
        den = np.broadcast_to(HX.sum(axis=1)[None, :], num.shape)
    else:
        den = den_x @ HX.T
    if alpha:
        num_y, den_y = _count_terms(Y, W @ HY, lik, eps)
        # The background enters with its pulls swapped.
        if den_y is None:
            num = num + alpha * HY.sum(axis=1)[None, :]
        else:
            num = num + alpha * (den_y @ HY.T)
        den = den + alpha * (num_y @ HY.T)
    return num, den


def update_basis(X, Y, model: FactorModel, lik: LikelihoodSpec, alpha: float, eps: float = EPS) -> np.ndarray:
    """One multiplicative step on the shared basis ``W``.

    At ``alpha = 0`` this is the classical Lee-Seung basis step on the target
    alone.  For ``alpha > 0`` there is no descent guarantee.
    """
    if alpha < 0:
        raise InvalidParameter(f"alpha must be >= 0, got {alpha}")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _check_coefficient_shapes(X, model.W, model.HX)
    _check_coefficient_shapes(Y, model.W, model.HY)
    num, den = basis_terms(X, Y, model, lik, alpha, eps)
    return model.W * num / (den + eps)
