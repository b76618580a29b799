"""Epoch-based Poisson training with accumulated basis statistics.

Coefficient columns are updated batch by batch under a fixed basis; the
basis numerator and denominator are summed over every batch and ``W`` is
updated once at the end of the epoch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import EPS, FactorModel, InvalidParameter, Likelihood, LikelihoodSpec, ShapeMismatch, UnsupportedLikelihood
from .updates import update_coefficients


@dataclass
class WGradAccumulator:
    num: np.ndarray
    den: np.ndarray

    @classmethod
    def zeros(cls, M: int, K: int) -> "WGradAccumulator":
        return cls(np.zeros((M, K)), np.zeros((M, K)))

    def merge(self, other: "WGradAccumulator") -> "WGradAccumulator":
        return WGradAccumulator(self.num + other.num, self.den + other.den)


def batch_slices(n: int, batch_size: int, order: Optional[np.ndarray] = None):
    """Contiguous column batches of ``range(n)`` (or of ``order``); the last may be short."""
    if batch_size < 1:
        raise InvalidParameter(f"batch_size must be >= 1, got {batch_size}")
    idx = np.arange(n) if order is None else order
    return [idx[start:start + batch_size] for start in range(0, n, batch_size)]


def _target_batch(Xb, W, Hb, lik, eps, acc):
    Hb = update_coefficients(Xb, W, Hb, lik, eps)
    ratio = Xb / (W @ Hb + eps)
    acc.num += ratio @ Hb.T
    acc.den += Hb.sum(axis=1)[None, :]
    return Hb


def _background_batch(Yb, W, Hb, lik, alpha, eps, acc):
    Hb = update_coefficients(Yb, W, Hb, lik, eps)
    if alpha:
        ratio = Yb / (W @ Hb + eps)
        acc.num += alpha * Hb.sum(axis=1)[None, :]
        acc.den += alpha * (ratio @ Hb.T)
    return Hb


def epoch(
    X,
    Y,
    model: FactorModel,
    lik: LikelihoodSpec,
    alpha: float,
    batch_size: int,
    eps: float = EPS,
    shuffle_seed: Optional[int] = None,
    return_accumulator: bool = False,
):
    """Run one pass over all target then all background batches.

    Parameters
    ----------
    X, Y : ndarray
        Target (M x N_X) and background (M x N_Y) counts.
    model : FactorModel
        Current factors.  Coefficient columns persist across epochs.
    batch_size : int
        Columns per batch.  Batches are contiguous slices unless
        ``shuffle_seed`` is given, in which case the column order is
        permuted first (batch composition changes, nothing else).
    return_accumulator : bool
        Also return the end-of-epoch :class:`WGradAccumulator`.

    Returns
    -------
    FactorModel, or (FactorModel, WGradAccumulator)
    """
    if lik.kind is not Likelihood.POISSON:
        raise UnsupportedLikelihood(f"mini-batch training supports poisson only, got {lik.kind.value}")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    W = model.W
    if X.shape != (W.shape[0], model.HX.shape[1]) or Y.shape != (W.shape[0], model.HY.shape[1]):
        raise ShapeMismatch(f"data shapes X {X.shape}, Y {Y.shape} do not match model")

    order_x = order_y = None
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        order_x = rng.permutation(X.shape[1])
        order_y = rng.permutation(Y.shape[1])

    acc = WGradAccumulator.zeros(*W.shape)
    HX = model.HX.copy()
    for cols in batch_slices(X.shape[1], batch_size, order_x):
        HX[:, cols] = _target_batch(X[:, cols], W, HX[:, cols], lik, eps, acc)
    HY = model.HY.copy()
    for cols in batch_slices(Y.shape[1], batch_size, order_y):
        HY[:, cols] = _background_batch(Y[:, cols], W, HY[:, cols], lik, alpha, eps, acc)

    W_new = W * acc.num / (acc.den + eps)
    out = FactorModel(W_new, HX, HY)
    if return_accumulator:
        return out, acc
    return out
