"""Partition-quality kernels shared by the engine, validation and baselines."""

from __future__ import annotations

import numpy as np

SUBSAMPLE_CAP = 20_000


def fpc(u: np.ndarray) -> float:
    """Fuzzy partition coefficient, ``mean_i sum_j u_ij^2``."""
    u = np.asarray(u, dtype=np.float64)
    return float(np.sum(u * u) / u.shape[0])


def partition_entropy(u: np.ndarray) -> float:
    """Mean membership entropy in nats (``0 ln 0 = 0``)."""
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(u > 0, u * np.log(u), 0.0)
    return float(-terms.sum() / u.shape[0])


def subsample_indices(n: int, cap: int | None, seed: int) -> np.ndarray:
    """All indices when ``n <= cap``, otherwise a sorted seeded sample of size ``cap``."""
    if cap is None or n <= cap:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=cap, replace=False))


def silhouette(x: np.ndarray, labels: np.ndarray, chunk: int = 512) -> float | None:
    """Mean silhouette coefficient with Euclidean distance.

    Returns ``None`` when fewer than two distinct labels are present. Points in
    singleton clusters score 0. Labels of -1 are treated like any other label;
    callers filter noise beforehand if that is wanted.
    """
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean(axis=0) if len(x) else x
    labels = np.asarray(labels)
    uniq, inv = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2 or len(x) < 2:
        return None
    counts = np.bincount(inv, minlength=k).astype(np.float64)
    onehot = np.zeros((len(x), k))
    onehot[np.arange(len(x)), inv] = 1.0
    sq = np.einsum("ij,ij->i", x, x)
    s = np.empty(len(x))
    for start in range(0, len(x), chunk):
        stop = min(start + chunk, len(x))
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * x[start:stop] @ x.T
        d = np.sqrt(np.maximum(d2, 0.0))
        rows = np.arange(stop - start)
        d[rows, rows + start] = 0.0
        sums = d @ onehot
        own = inv[start:stop]
        own_n = counts[own]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = sums[rows, own] / (own_n - 1)
            means = sums / counts
        means[rows, own] = np.inf
        b = means.min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            si = (b - a) / np.maximum(a, b)
        si[own_n == 1] = 0.0
        si[~np.isfinite(si)] = 0.0
        s[start:stop] = si
    return float(s.mean())


def within_dispersion(x: np.ndarray, labels: np.ndarray) -> float:
    """Total within-cluster sum of squared distances to each cluster mean."""
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for lab in np.unique(labels):
        pts = x[labels == lab]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def entropy_certainty(u: np.ndarray) -> np.ndarray:
    """Row-wise ``1 - H_2(u) / log2(k)``, clamped to ``[0, 1]``."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    k = u.shape[1]
    if k < 2:
        return np.ones(u.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(u > 0, u * np.log2(u), 0.0)
    h = -terms.sum(axis=1)
    return np.clip(1.0 - h / np.log2(k), 0.0, 1.0)
