"""Domain types, validation and factor initialization shared by all solvers.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, features in
rows and samples in columns.  :func:`as_nonneg` is the single gate through
which data enters the package.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EPS = 1e-12
COUNT_ROUNDING_TOL = 1e-9


class BcnmfError(Exception):
    """Base class for all package errors.  ``code`` is a short stable tag."""

    code = "Error"


class InvalidDimension(BcnmfError, ValueError):
    code = "InvalidDimension"


class DimensionMismatch(BcnmfError, ValueError):
    code = "DimensionMismatch"


class ShapeMismatch(BcnmfError, ValueError):
    code = "ShapeMismatch"


class NegativeEntry(BcnmfError, ValueError):
    code = "NegativeEntry"


class NonFiniteEntry(BcnmfError, ValueError):
    code = "NonFiniteEntry"


class NonIntegerCounts(BcnmfError, ValueError):
    code = "NonIntegerCounts"


class InvalidParameter(BcnmfError, ValueError):
    code = "InvalidParameter"


class UnsupportedLikelihood(BcnmfError, ValueError):
    code = "UnsupportedLikelihood"


def as_nonneg(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a C-contiguous float64 2-D array after validation.

    Raises
    ------
    InvalidDimension
        If ``a`` is not 2-D or has an empty axis.
    NonFiniteEntry, NegativeEntry
        If any entry is NaN/Inf or below zero.  The message carries the
        (row, col) of the first offending entry.
    """
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidDimension(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidDimension(f"{name} has an empty axis: shape {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonFiniteEntry(f"{name} has non-finite entry at ({i}, {j})")
    neg = arr < 0
    if neg.any():
        i, j = np.argwhere(neg)[0]
        raise NegativeEntry(f"{name} has negative entry {arr[i, j]!r} at ({i}, {j})")
    return arr


class Likelihood(str, enum.Enum):
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    NB = "nb"
    ZINB = "zinb"


@dataclass(frozen=True)
class LikelihoodSpec:
    """Observation model.  ``theta`` is the NB dispersion, ``pi`` the ZINB dropout."""

    kind: Likelihood = Likelihood.GAUSSIAN
    theta: Optional[float] = None
    pi: Optional[float] = None

    def __post_init__(self):
        kind = Likelihood(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (Likelihood.NB, Likelihood.ZINB):
            if self.theta is None or not np.isfinite(self.theta) or self.theta <= 0:
                raise InvalidParameter(f"theta must be > 0 for {kind.value}, got {self.theta}")
            object.__setattr__(self, "theta", float(self.theta))
        if kind is Likelihood.ZINB:
            if self.pi is None or not (0.0 <= self.pi < 1.0):
                raise InvalidParameter(f"pi must lie in [0, 1) for zinb, got {self.pi}")
            object.__setattr__(self, "pi", float(self.pi))

    @classmethod
    def gaussian(cls) -> "LikelihoodSpec":
        return cls(Likelihood.GAUSSIAN)

    @classmethod
    def poisson(cls) -> "LikelihoodSpec":
        return cls(Likelihood.POISSON)

    @classmethod
    def nb(cls, theta: float) -> "LikelihoodSpec":
        return cls(Likelihood.NB, theta=theta)

    @classmethod
    def zinb(cls, theta: float, pi: float) -> "LikelihoodSpec":
        return cls(Likelihood.ZINB, theta=theta, pi=pi)

    @property
    def is_count(self) -> bool:
        return self.kind is not Likelihood.GAUSSIAN


@dataclass(frozen=True)
class FactorModel:
    """Shared basis ``W`` (M x K) with coefficient blocks ``HX`` (K x N_X) and ``HY`` (K x N_Y)."""

    W: np.ndarray
    HX: np.ndarray
    HY: np.ndarray

    def __post_init__(self):
        for name in ("W", "HX", "HY"):
            object.__setattr__(self, name, as_nonneg(getattr(self, name), name))
        k = self.W.shape[1]
        if self.HX.shape[0] != k or self.HY.shape[0] != k:
            raise DimensionMismatch(
                f"inner dimensions disagree: W {self.W.shape}, HX {self.HX.shape}, HY {self.HY.shape}"
            )

    @property
    def K(self) -> int:
        return self.W.shape[1]

    @property
    def M(self) -> int:
        return self.W.shape[0]

    def replace(self, **changes) -> "FactorModel":
        fields = {"W": self.W, "HX": self.HX, "HY": self.HY}
        fields.update(changes)
        return FactorModel(**fields)


@dataclass(frozen=True)
class TrainConfig:
    """Fitting controls.  ``rank`` is K; ``batch_size=0`` selects full-batch updates."""

    rank: int = 2
    alpha: float = 0.0
    tol: float = 1e-4
    max_iter: int = 500
    batch_size: int = 0
    seed: int = 0
    eps: float = EPS

    def __post_init__(self):
        if int(self.rank) != self.rank or self.rank < 1:
            raise InvalidDimension(f"rank must be a positive integer, got {self.rank}")
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise InvalidParameter(f"alpha must be >= 0, got {self.alpha}")
        if not self.tol > 0:
            raise InvalidParameter(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) < 1:
            raise InvalidParameter(f"max_iter must be >= 1, got {self.max_iter}")
        if int(self.batch_size) < 0:
            raise InvalidParameter(f"batch_size must be >= 0, got {self.batch_size}")
        if not self.eps > 0:
            raise InvalidParameter(f"eps must be > 0, got {self.eps}")

    def check_batch_size(self, n_x: int, n_y: int) -> None:
        if self.batch_size > max(n_x, n_y):
            raise InvalidParameter(
                f"batch_size {self.batch_size} exceeds max(N_X, N_Y) = {max(n_x, n_y)}"
            )


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    DEGENERATE = "Degenerate"


@dataclass
class TrainReport:
    objective_trace: list = field(default_factory=list)
    termination: Termination = Termination.MAX_ITER
    wall_time: float = 0.0

    @property
    def iterations_run(self) -> int:
        return len(self.objective_trace)


@dataclass(frozen=True)
class SparsityMask:
    positive: np.ndarray
    zero: np.ndarray


def sparsity_mask(D: np.ndarray) -> SparsityMask:
    """Split the cells of ``D`` into strictly positive and exactly-zero indicators."""
    positive = D > 0
    return SparsityMask(positive=positive, zero=~positive)


def init_factors(M: int, K: int, N_X: int, N_Y: int, seed: int, eps: float = EPS) -> FactorModel:
    """Draw ``W``, ``HX``, ``HY`` i.i.d. uniform on (eps, 1].

    The three blocks are drawn in that order from one generator, so the
    ``W``/``HX`` draws do not depend on ``N_Y``.
    """
    dims = {"M": M, "K": K, "N_X": N_X, "N_Y": N_Y}
    for name, value in dims.items():
        if int(value) != value or value < 1:
            raise InvalidDimension(f"{name} must be a positive integer, got {value}")
    rng = np.random.default_rng(seed)

    def draw(shape):
        # 1 - U[0, 1) lies in (0, 1]; the floor keeps it above eps.
        return np.maximum(1.0 - rng.random(shape), eps)

    W = draw((M, K))
    HX = draw((K, N_X))
    HY = draw((K, N_Y))
    return FactorModel(W, HX, HY)


def _check_counts(D: np.ndarray, name: str) -> None:
    off = np.abs(D - np.round(D)) > COUNT_ROUNDING_TOL
    if off.any():
        i, j = np.argwhere(off)[0]
        raise NonIntegerCounts(f"{name} has non-integer count {D[i, j]!r} at ({i}, {j})")


def validate_problem(X, Y, model: FactorModel, lik: LikelihoodSpec) -> None:
    """Raise if data, factors and likelihood are not mutually consistent."""
    X = as_nonneg(X, "X")
    Y = as_nonneg(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if model.W.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"W has {model.W.shape[0]} rows, data has {X.shape[0]}")
    if model.HX.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"HX has {model.HX.shape[1]} columns, X has {X.shape[1]}")
    if model.HY.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"HY has {model.HY.shape[1]} columns, Y has {Y.shape[1]}")
    if lik.is_count:
        _check_counts(X, "X")
        _check_counts(Y, "Y")
