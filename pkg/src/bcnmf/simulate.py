"""Synthetic target/background generators.

``make_composite`` builds image-like data in which class-specific stroke
patterns are overlaid on smooth random backgrounds that dominate the total
variance.  ``make_planted`` draws data from known non-negative factors where
the background shares only the leading ``k_shared`` topics.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.ndimage import shift as nd_shift

from .core import InvalidParameter, Likelihood, LikelihoodSpec

MAX_TEMPLATE_CORR = 0.5


class Composite(NamedTuple):
    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray


class Planted(NamedTuple):
    X: np.ndarray
    Y: np.ndarray
    true_W: np.ndarray
    true_HX: np.ndarray
    true_HY: np.ndarray
    labels: np.ndarray  # dominant target-specific topic per target sample


def _segment_distance(yy, xx, p, q):
    d = q - p
    denom = float(d @ d) or 1.0
    t = np.clip(((yy - p[0]) * d[0] + (xx - p[1]) * d[1]) / denom, 0.0, 1.0)
    return np.hypot(yy - (p[0] + t * d[0]), xx - (p[1] + t * d[1]))


def _stroke_template(side, rng, width):
    """A connected polyline of 2-3 strokes, rendered with a soft edge."""
    yy, xx = np.mgrid[0:side, 0:side].astype(float)
    lo, hi = 0.15 * (side - 1), 0.85 * (side - 1)
    points = rng.uniform(lo, hi, size=(rng.integers(3, 5), 2))
    dist = np.full((side, side), np.inf)
    for p, q in zip(points[:-1], points[1:]):
        dist = np.minimum(dist, _segment_distance(yy, xx, p, q))
    return np.clip(1.25 - dist / width, 0.0, 1.0)


def _glyph_templates(side: int) -> np.ndarray:
    """An open ring and a vertical bar, the two fixed leading class shapes."""
    yy, xx = np.mgrid[0:side, 0:side].astype(float)
    c = (side - 1) / 2
    ring = np.abs(np.hypot((yy - c) / (0.36 * side), (xx - c) / (0.26 * side)) - 1) * 0.3 * side
    bar = np.where(np.abs(yy - c) <= 0.38 * side, np.abs(xx - c), np.inf)
    return np.stack([np.clip(2.0 - ring, 0.0, 1.0), np.clip(2.0 - bar, 0.0, 1.0)])


def make_templates(side: int, n_classes: int, rng, width: float | None = None, max_tries: int = 1000):
    """Class templates with pairwise correlation below ``MAX_TEMPLATE_CORR``.

    The first two classes are a ring and a bar; further classes are random
    polylines accepted only if they stay distinct from every earlier template.
    """
    width = max(0.6, side / 20) if width is None else width
    templates = list(_glyph_templates(side)[:n_classes])
    for _ in range(max_tries):
        if len(templates) >= n_classes:
            return np.stack(templates)
        cand = _stroke_template(side, rng, width)
        v = cand.ravel()
        if all(np.corrcoef(v, t.ravel())[0, 1] < MAX_TEMPLATE_CORR for t in templates):
            templates.append(cand)
    if len(templates) >= n_classes:
        return np.stack(templates)
    raise InvalidParameter(f"could not draw {n_classes} distinct templates on a {side}x{side} grid")


def smooth_fields(n, side, rng, amplitude: float = 0.71, level_range=(0.0, 0.26)):
    """Smooth low-frequency random fields in [0, 1] sharing one covariance.

    Each field is a uniform brightness level plus a Gaussian combination of
    three global modes (horizontal and vertical ramps and their product),
    each scaled to unit spatial variance, then clipped to [0, 1].
    """
    yy, xx = np.mgrid[0:side, 0:side].astype(float) / (side - 1) * 2.0 - 1.0
    modes = np.stack([xx, yy, xx * yy])
    modes /= modes.std(axis=(1, 2), keepdims=True)
    coef = rng.standard_normal((n, modes.shape[0])) / np.sqrt(modes.shape[0])
    z = np.tensordot(coef, modes, axes=1)
    level = rng.uniform(*level_range, size=(n, 1, 1))
    return np.clip(level + amplitude * z, 0.0, 1.0)


def make_composite(
    n_target: int,
    n_background: int,
    side: int = 16,
    n_classes: int = 2,
    bg_scale: float = 0.8,
    seed: int = 0,
) -> Composite:
    """Composite images ``max(foreground, bg_scale * background)``.

    Returns ``(X, Y, labels)`` with ``side**2`` rows and one column per
    sample; ``labels`` index the foreground class of each target column.
    Foregrounds get an integer jitter of up to one pixel and a per-sample
    intensity in [0.7, 1].  ``bg_scale = 0`` yields pure foregrounds.
    """
    if side < 4:
        raise InvalidParameter(f"side must be >= 4, got {side}")
    if n_classes < 2:
        raise InvalidParameter(f"n_classes must be >= 2, got {n_classes}")
    if not 0.0 <= bg_scale <= 1.0:
        raise InvalidParameter(f"bg_scale must lie in [0, 1], got {bg_scale}")
    if n_target < 1 or n_background < 1:
        raise InvalidParameter("n_target and n_background must be >= 1")
    rng = np.random.default_rng(seed)
    templates = make_templates(side, n_classes, rng)

    labels = rng.integers(0, n_classes, size=n_target)
    shifts = rng.integers(-1, 2, size=(n_target, 2))
    intensity = rng.uniform(0.7, 1.0, size=n_target)
    fg = np.empty((n_target, side, side))
    for i in range(n_target):
        moved = nd_shift(templates[labels[i]], shifts[i], order=0, mode="constant", cval=0.0)
        fg[i] = moved * intensity[i]
    fg *= rng.uniform(0.9, 1.0, size=fg.shape)

    bg_target = bg_scale * smooth_fields(n_target, side, rng)
    bg_only = bg_scale * smooth_fields(n_background, side, rng)
    target = np.clip(np.maximum(fg, bg_target), 0.0, 1.0)
    background = np.clip(bg_only, 0.0, 1.0)
    X = target.reshape(n_target, -1).T.copy()
    Y = background.reshape(n_background, -1).T.copy()
    return Composite(X, Y, labels)


def _sample(R, lik: LikelihoodSpec, noise, rng):
    kind = lik.kind
    if kind is Likelihood.GAUSSIAN:
        if noise == 0:
            return R.copy()
        return np.maximum(R + noise * rng.standard_normal(R.shape), 0.0)
    if kind is Likelihood.POISSON:
        return rng.poisson(R).astype(float)
    theta = lik.theta
    # NB as a gamma-Poisson mixture with mean R and dispersion theta.
    counts = rng.poisson(rng.gamma(theta, R / theta)).astype(float)
    if kind is Likelihood.ZINB:
        counts[rng.random(R.shape) < lik.pi] = 0.0
    return counts


def make_planted(
    M: int,
    K: int,
    N_X: int,
    N_Y: int,
    k_shared: int,
    noise: float = 0.0,
    lik: LikelihoodSpec | None = None,
    seed: int = 0,
    scale: float = 1.0,
    shared_strength: float = 3.0,
) -> Planted:
    """Observations generated around known factors.

    Target columns mix the ``k_shared`` shared topics (gamma activations of
    mean ``shared_strength``) with exactly one target-specific topic of unit
    strength, whose index is returned as ``labels``.  Background columns use
    the shared topics only.  ``scale`` multiplies every mean; ``noise`` is
    the Gaussian noise standard deviation and is ignored for count models.
    """
    lik = LikelihoodSpec.gaussian() if lik is None else lik
    for name, v in (("M", M), ("K", K), ("N_X", N_X), ("N_Y", N_Y)):
        if v < 1:
            raise InvalidParameter(f"{name} must be >= 1, got {v}")
    if not 0 <= k_shared <= K:
        raise InvalidParameter(f"k_shared must lie in [0, K], got {k_shared}")
    if noise < 0 or scale <= 0:
        raise InvalidParameter("noise must be >= 0 and scale > 0")
    rng = np.random.default_rng(seed)

    W = rng.gamma(0.5, 1.0, size=(M, K))
    W /= W.sum(axis=0, keepdims=True)
    W *= scale * M / K

    n_specific = K - k_shared
    HX = np.zeros((K, N_X))
    HX[:k_shared] = rng.gamma(2.0, shared_strength / 2.0, size=(k_shared, N_X))
    if n_specific:
        labels = rng.integers(0, n_specific, size=N_X)
        HX[k_shared + labels, np.arange(N_X)] = rng.uniform(0.8, 1.2, size=N_X)
    else:
        labels = np.zeros(N_X, dtype=int)
    HY = np.zeros((K, N_Y))
    HY[:k_shared] = rng.gamma(2.0, shared_strength / 2.0, size=(k_shared, N_Y))

    X = _sample(W @ HX, lik, noise, rng)
    Y = _sample(W @ HY, lik, noise, rng)
    return Planted(X, Y, W, HX, HY, labels)
