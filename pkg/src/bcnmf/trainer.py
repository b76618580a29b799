"""Full-batch and mini-batch fitting loops and contrast-parameter selection."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import minibatch
from .core import (
    BcnmfError,
    EPS,
    FactorModel,
    InvalidParameter,
    Likelihood,
    LikelihoodSpec,
    Termination,
    TrainConfig,
    TrainReport,
    UnsupportedLikelihood,
    as_nonneg,
    init_factors,
    validate_problem,
)
from .objective import evaluate_loss, gaussian_loss_gram
from .updates import update_basis, update_coefficients

COLLAPSE_RATIO = 1e-8
BLOWUP_FACTOR = 10.0
STABILITY_WINDOW = 10
N_COARSE = 8
N_FINE = 5


class NoViableAlpha(BcnmfError, ValueError):
    code = "NoViableAlpha"


class Health(str, enum.Enum):
    HEALTHY = "Healthy"
    BACKGROUND_COLLAPSE = "BackgroundCollapse"
    TARGET_BLOWUP = "TargetBlowup"


class _Losses:
    """Target/background loss evaluation, with the Gram shortcut for Gaussian data."""

    def __init__(self, X, Y, lik, eps):
        self.X, self.Y, self.lik, self.eps = X, Y, lik, eps
        if lik.kind is Likelihood.GAUSSIAN:
            self.xx = float(np.vdot(X, X))
            self.yy = float(np.vdot(Y, Y))

    def target(self, W, HX):
        if self.lik.kind is Likelihood.GAUSSIAN:
            return gaussian_loss_gram(self.X, W, HX, self.xx)
        return evaluate_loss(self.X, W @ HX, self.lik, self.eps)

    def background(self, W, HY):
        if self.lik.kind is Likelihood.GAUSSIAN:
            return gaussian_loss_gram(self.Y, W, HY, self.yy)
        return evaluate_loss(self.Y, W @ HY, self.lik, self.eps)

    def contrastive(self, W, HX, HY, alpha):
        value = self.target(W, HX)
        if alpha:
            value -= alpha * self.background(W, HY)
        return value


def relative_change(current: float, previous: float, eps: float = EPS) -> float:
    return abs(current - previous) / max(abs(previous), eps)


def full_batch_step(X, Y, model: FactorModel, lik: LikelihoodSpec, alpha: float, eps: float = EPS) -> FactorModel:
    """One iteration: ``HX``, then ``HY``, then ``W`` with the fresh coefficients."""
    HX = update_coefficients(X, model.W, model.HX, lik, eps)
    HY = update_coefficients(Y, model.W, model.HY, lik, eps)
    fresh = FactorModel(model.W, HX, HY)
    return fresh.replace(W=update_basis(X, Y, fresh, lik, alpha, eps))


def _step(X, Y, model, lik, config):
    if config.batch_size:
        return minibatch.epoch(X, Y, model, lik, config.alpha, config.batch_size, config.eps)
    return full_batch_step(X, Y, model, lik, config.alpha, config.eps)


def fit(
    X,
    Y,
    lik: LikelihoodSpec,
    config: TrainConfig,
    init: Optional[FactorModel] = None,
) -> tuple[FactorModel, TrainReport]:
    """Fit a contrastive factorization of target ``X`` against background ``Y``.

    Iterates until the relative change of the contrastive objective drops to
    ``config.tol``, ``config.max_iter`` iterations pass, or the run turns
    degenerate (non-finite values or collapsed background coefficients).
    ``config.batch_size > 0`` switches to mini-batch epochs (Poisson only).
    """
    X = as_nonneg(X, "X")
    Y = as_nonneg(Y, "Y")
    if init is None:
        init = init_factors(X.shape[0], config.rank, X.shape[1], Y.shape[1], config.seed, config.eps)
    validate_problem(X, Y, init, lik)
    config.check_batch_size(X.shape[1], Y.shape[1])
    if config.batch_size and lik.kind is not Likelihood.POISSON:
        raise UnsupportedLikelihood(
            f"mini-batch training supports poisson only, got {lik.kind.value}"
        )

    start = time.perf_counter()
    losses = _Losses(X, Y, lik, config.eps)
    alpha, eps = config.alpha, config.eps
    model = init
    hy_init_mean = float(init.HY.mean())
    previous = losses.contrastive(model.W, model.HX, model.HY, alpha)
    report = TrainReport()

    for _ in range(config.max_iter):
        model = _step(X, Y, model, lik, config)
        current = losses.contrastive(model.W, model.HX, model.HY, alpha)
        report.objective_trace.append(current)
        if not np.isfinite(current) or model.HY.mean() < COLLAPSE_RATIO * hy_init_mean:
            report.termination = Termination.DEGENERATE
            break
        if relative_change(current, previous, eps) <= config.tol:
            report.termination = Termination.CONVERGED
            break
        previous = current
    else:
        report.termination = Termination.MAX_ITER

    report.wall_time = time.perf_counter() - start
    return model, report


def check_degeneracy(
    model: FactorModel,
    X,
    Y,
    lik: LikelihoodSpec,
    baseline_target_loss: float,
    hy_init_mean: float = 0.5,
    eps: float = EPS,
) -> Health:
    """Classify a fitted model against the two failure modes of large ``alpha``.

    ``hy_init_mean`` defaults to the mean of the uniform (0, 1] initializer.
    The target-loss comparison is meaningful only for non-negative losses
    (Gaussian, Poisson); a non-positive baseline never trips it.
    """
    if not np.all(np.isfinite(model.HY)) or model.HY.mean() < COLLAPSE_RATIO * hy_init_mean:
        return Health.BACKGROUND_COLLAPSE
    target = evaluate_loss(X, model.W @ model.HX, lik, eps)
    if not np.isfinite(target):
        return Health.TARGET_BLOWUP
    if baseline_target_loss > 0 and target > BLOWUP_FACTOR * baseline_target_loss:
        return Health.TARGET_BLOWUP
    return Health.HEALTHY


@dataclass
class Candidate:
    alpha: float
    stage: str
    health: Health
    termination: Termination
    iterations: int
    objective: float
    target_loss: float
    background_loss: float
    window_change: float
    stable: bool

    @property
    def viable(self) -> bool:
        return self.health is Health.HEALTHY and self.stable


@dataclass
class AlphaSelection:
    alpha: float
    candidates: list = field(default_factory=list)
    baseline_target_loss: float = float("nan")


def window_change(trace, window: int = STABILITY_WINDOW, eps: float = EPS) -> float:
    """Largest per-iteration relative change of the objective over the final ``window`` steps."""
    tail = list(trace[-(window + 1):])
    if len(tail) < 2:
        return 0.0
    return max(relative_change(b, a, eps) for a, b in zip(tail[:-1], tail[1:]))


def extend_fit(X, Y, model: FactorModel, lik: LikelihoodSpec, config: TrainConfig, report: TrainReport, steps: int = STABILITY_WINDOW):
    """Run ``steps`` further iterations past termination, appending to a copy of the trace.

    Used to check that a converged objective stays put rather than merely
    pausing.  Degenerate runs are returned unchanged.
    """
    trace = list(report.objective_trace)
    if report.termination is not Termination.CONVERGED:
        return model, trace
    losses = _Losses(X, Y, lik, config.eps)
    for _ in range(steps):
        model = _step(X, Y, model, lik, config)
        trace.append(losses.contrastive(model.W, model.HX, model.HY, config.alpha))
    return model, trace


def coarse_grid(lo: float, hi: float, n: int = N_COARSE) -> np.ndarray:
    """``n`` log-spaced values in ``[lo, hi]``; a zero lower end is kept as an explicit point."""
    if lo > 0:
        return np.geomspace(lo, hi, n)
    return np.concatenate([[0.0], np.geomspace(hi * 1e-2, hi, n - 1)])


def select_alpha(
    X,
    Y,
    lik: LikelihoodSpec,
    config: TrainConfig,
    grid_lo: float = 0.5,
    grid_hi: float = 5.0,
) -> AlphaSelection:
    """Coarse-to-fine search for the contrast weight.

    Every candidate is fitted from the same initialization.  Candidates that
    degenerate or whose objective has not stabilized are discarded; among
    the rest the one with the smallest target reconstruction loss wins.  The
    fine pass spans the coarse neighbours of the best coarse survivor.
    """
    if not (grid_lo >= 0 and grid_hi > grid_lo):
        raise InvalidParameter(f"need 0 <= grid_lo < grid_hi, got [{grid_lo}, {grid_hi}]")
    X = as_nonneg(X, "X")
    Y = as_nonneg(Y, "Y")
    init = init_factors(X.shape[0], config.rank, X.shape[1], Y.shape[1], config.seed, config.eps)
    hy_init_mean = float(init.HY.mean())

    base_model, _ = fit(X, Y, lik, replace(config, alpha=0.0), init=init)
    baseline = evaluate_loss(X, base_model.W @ base_model.HX, lik, config.eps)
    selection = AlphaSelection(alpha=float("nan"), baseline_target_loss=baseline)
    seen = {}

    def run(alpha, stage):
        key = round(float(alpha), 12)
        if key in seen:
            return seen[key]
        cfg = replace(config, alpha=float(alpha))
        model, report = fit(X, Y, lik, cfg, init=init)
        model, trace = extend_fit(X, Y, model, lik, cfg, report)
        health = check_degeneracy(model, X, Y, lik, baseline, hy_init_mean, config.eps)
        change = window_change(trace, eps=config.eps)
        degenerate = report.termination is Termination.DEGENERATE
        cand = Candidate(
            alpha=float(alpha),
            stage=stage,
            health=Health.BACKGROUND_COLLAPSE if degenerate and health is Health.HEALTHY else health,
            termination=report.termination,
            iterations=report.iterations_run,
            objective=trace[-1],
            target_loss=evaluate_loss(X, model.W @ model.HX, lik, config.eps),
            background_loss=evaluate_loss(Y, model.W @ model.HY, lik, config.eps),
            window_change=change,
            stable=bool(np.isfinite(change) and change <= config.tol),
        )
        seen[key] = cand
        selection.candidates.append(cand)
        return cand

    coarse = coarse_grid(grid_lo, grid_hi)
    coarse_results = [run(a, "coarse") for a in coarse]
    survivors = [i for i, c in enumerate(coarse_results) if c.viable]
    if not survivors:
        raise NoViableAlpha(f"no viable alpha among coarse candidates in [{grid_lo}, {grid_hi}]")
    best = min(survivors, key=lambda i: coarse_results[i].target_loss)
    left = coarse[max(best - 1, 0)]
    right = coarse[min(best + 1, len(coarse) - 1)]
    for a in np.linspace(left, right, N_FINE):
        run(a, "fine")

    viable = [c for c in selection.candidates if c.viable]
    selection.alpha = min(viable, key=lambda c: (c.target_loss, c.alpha)).alpha
    return selection
