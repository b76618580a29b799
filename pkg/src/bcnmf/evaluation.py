"""Clustering and statistical evaluation of learned coefficients.

k-means on sample coordinates, the Hubert-Arabie adjusted Rand index, and
Welch two-sample t-tests summarized as signed -log10 p values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betainc

from .core import BcnmfError, InvalidParameter


class InsufficientPoints(BcnmfError, ValueError):
    code = "InsufficientPoints"


class LengthMismatch(BcnmfError, ValueError):
    code = "LengthMismatch"


class DegenerateGroup(BcnmfError, ValueError):
    code = "DegenerateGroup"


class SingleClass(BcnmfError, ValueError):
    code = "SingleClass"


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    wcss: float
    trace: list = field(default_factory=list)  # WCSS per Lloyd iteration of the winning run


def _sq_dists(points, centers):
    d = (points * points).sum(1)[:, None] - 2.0 * points @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1]).ravel()
    for j in range(1, k):
        # closest.sum() > 0 because k never exceeds the number of distinct points.
        idx = int(rng.choice(n, p=closest / closest.sum()))
        centers[j] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[j:j + 1]).ravel())
    return centers


def _wcss(points, labels, centers):
    diff = points - centers[labels]
    return float(np.sum(diff * diff))


def _lloyd(points, centers, max_iter, tol):
    k = centers.shape[0]
    labels = _sq_dists(points, centers).argmin(1)
    trace = [_wcss(points, labels, centers)]
    for _ in range(max_iter):
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = points[members].mean(0)
            else:
                # Re-seed an empty cluster at the point worst served by its centre.
                cost = ((points - new_centers[labels]) ** 2).sum(1)
                far = int(cost.argmax())
                new_centers[j] = points[far]
                labels[far] = j
        new_labels = _sq_dists(points, new_centers).argmin(1)
        centers = new_centers
        trace.append(_wcss(points, new_labels, centers))
        if np.array_equal(new_labels, labels) or trace[-2] - trace[-1] <= tol * trace[-2]:
            labels = new_labels
            break
        labels = new_labels
    return labels, centers, trace


def kmeans(points, n_clusters: int, seed: int = 0, restarts: int = 10, max_iter: int = 300, tol: float = 0.0) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` by WCSS.

    ``points`` is samples x dims (pass ``H.T`` for a K x N coefficient matrix).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidParameter(f"points must be 2-D, got shape {points.shape}")
    if n_clusters < 1 or restarts < 1:
        raise InvalidParameter("n_clusters and restarts must be >= 1")
    distinct = np.unique(points, axis=0).shape[0]
    if n_clusters > distinct:
        raise InsufficientPoints(f"{n_clusters} clusters requested but only {distinct} distinct points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = _kmeanspp(points, n_clusters, rng)
        labels, centers, trace = _lloyd(points, centers, max_iter, tol)
        if best is None or trace[-1] < best.wcss:
            best = KMeansResult(labels=labels, centers=centers, wcss=trace[-1], trace=trace)
    return best


# --------------------------------------------------------------------------
# adjusted Rand index


def _as_labels(a, name):
    a = np.asarray(a)
    if a.ndim != 1:
        raise InvalidParameter(f"{name} must be 1-D")
    return a


def ari(pred, truth) -> float:
    """Adjusted Rand index (Hubert-Arabie) from the pair-counting contingency table.

    Evaluated in exact integer arithmetic up to one final division.
    """
    pred = _as_labels(pred, "pred")
    truth = _as_labels(truth, "truth")
    if pred.shape != truth.shape:
        raise LengthMismatch(f"pred has {pred.size} labels, truth has {truth.size}")
    n = pred.size
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)

    def pairs(counts):
        return sum(int(c) * (int(c) - 1) // 2 for c in np.ravel(counts))

    index = pairs(table)
    a = pairs(table.sum(1))
    b = pairs(table.sum(0))
    total = n * (n - 1) // 2
    # (index - a*b/total) / ((a+b)/2 - a*b/total), scaled by 2*total.
    num = 2 * (total * index - a * b)
    den = total * (a + b) - 2 * a * b
    if den == 0:
        return 1.0
    return num / den


# --------------------------------------------------------------------------
# Welch t-test


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    signed_logp: float


def welch_t(group_a, group_b) -> WelchResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.

    ``signed_logp`` is ``sign(mean_a - mean_b) * -log10(p)``.  The p value
    comes from the regularized incomplete beta function,
    ``p = I_{df/(df+t^2)}(df/2, 1/2)``.
    """
    a = np.asarray(group_a, dtype=np.float64).ravel()
    b = np.asarray(group_b, dtype=np.float64).ravel()
    for name, g in (("group_a", a), ("group_b", b)):
        if g.size < 2:
            raise DegenerateGroup(f"{name} has {g.size} samples; need at least 2")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 or vb == 0:
        raise DegenerateGroup("a group has zero variance")
    sa, sb = va / a.size, vb / b.size
    diff = a.mean() - b.mean()
    t = diff / np.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa * sa / (a.size - 1) + sb * sb / (b.size - 1))
    p = float(betainc(0.5 * df, 0.5, df / (df + t * t)))
    p = min(max(p, np.finfo(float).tiny), 1.0)
    logp = -np.log10(p)
    return WelchResult(t=float(t), df=float(df), p=p, signed_logp=float(np.sign(diff) * logp) + 0.0)


@dataclass(frozen=True)
class TopicAssociation:
    topic: int
    t: float
    p: float
    signed_logp: float


@dataclass
class AssociationTable:
    ranked: list  # TopicAssociation, by |signed_logp| descending
    excluded: dict  # topic -> reason


def topic_associations(H, labels) -> AssociationTable:
    """Welch test of each topic's usage between the two label classes.

    The class with the larger label value is group ``a``, so a positive
    score means higher usage there.  Topics whose usage is degenerate in
    either class are reported in ``excluded`` rather than ranked.
    """
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if labels.size != H.shape[1]:
        raise LengthMismatch(f"{labels.size} labels for {H.shape[1]} samples")
    classes = np.unique(labels)
    if classes.size != 2:
        raise SingleClass(f"need exactly two label classes, found {classes.size}")
    in_a = labels == classes[1]
    ranked, excluded = [], {}
    for k in range(H.shape[0]):
        try:
            res = welch_t(H[k, in_a], H[k, ~in_a])
        except DegenerateGroup as exc:
            excluded[k] = f"DegenerateGroup: {exc}"
            continue
        ranked.append(TopicAssociation(k, res.t, res.p, res.signed_logp))
    ranked.sort(key=lambda r: (-abs(r.signed_logp), r.topic))
    return AssociationTable(ranked=ranked, excluded=excluded)


def bootstrap_ari(points, truth, n_clusters: int, resamples: int, resample_size: Optional[int] = None, seed: int = 0, restarts: int = 10):
    """ARI of k-means over with-replacement resamples; returns ``(mean, standard_error, values)``."""
    points = np.asarray(points, dtype=np.float64)
    truth = np.asarray(truth)
    n = points.shape[0]
    size = n if resample_size is None else int(resample_size)
    rng = np.random.default_rng(seed)
    values = []
    for r in range(resamples):
        idx = rng.integers(0, n, size=size)
        res = kmeans(points[idx], n_clusters, seed=seed + r + 1, restarts=restarts)
        values.append(ari(res.labels, truth[idx]))
    values = np.asarray(values)
    se = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0
    return float(values.mean()), float(se), values
