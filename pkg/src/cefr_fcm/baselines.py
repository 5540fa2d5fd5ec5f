"""Hard-clustering baselines (mini-batch k-means, DBSCAN) and APN stability."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from cefr_fcm.dataset import Dataset
from cefr_fcm.fcm import FcmConfig, fit
from cefr_fcm.metrics import SUBSAMPLE_CAP, silhouette, subsample_indices

log = logging.getLogger(__name__)

Clusterer = Callable[[np.ndarray, int], np.ndarray]


def _as_array(data) -> np.ndarray:
    return data.as_float() if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)


def _nearest(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = np.empty((len(x), len(centroids)))
    for j, c in enumerate(centroids):
        diff = x - c
        d2[:, j] = np.einsum("ij,ij->i", diff, diff)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(x)), labels]


# -- mini-batch k-means ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    k: int
    batch_size: int
    max_iter: int
    seed: int
    inertia: float
    inertia_history: tuple[float, ...] = field(default=(), repr=False)
    initial_inertia: float = float("nan")

    def predict(self, data) -> np.ndarray:
        return _nearest(_as_array(data), self.centroids)[0]


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(len(x))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, len(x) - 1)
        centers.append(x[idx])
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=np.float64)


def _repair_empty(x: np.ndarray, centroids: np.ndarray) -> int:
    labels, d2 = _nearest(x, centroids)
    counts = np.bincount(labels, minlength=len(centroids))
    fixed = 0
    for j in np.flatnonzero(counts == 0):
        far = int(np.argmax(d2))
        centroids[j] = x[far]
        d2[far] = -1.0
        fixed += 1
    return fixed


def minibatch_kmeans(
    data: Dataset | np.ndarray,
    k: int = 6,
    batch_size: int = 1024,
    max_iter: int = 100,
    seed: int = 0,
) -> KMeansModel:
    """Mini-batch k-means with k-means++ seeding and per-centre learning rates.

    Full-data inertia is evaluated every 10 iterations; a checkpoint that is
    worse than the best so far is rolled back, so the recorded inertia
    sequence never increases.
    """
    x = _as_array(data)
    n = len(x)
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    if batch_size < k:
        raise ValueError("batch_size must be >= k")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(x, k, rng)
    counts = np.zeros(k)
    _repair_empty(x, centroids)
    initial = float(_nearest(x, centroids)[1].sum())
    best, best_inertia = centroids.copy(), initial
    history = [initial]
    for it in range(1, max_iter + 1):
        batch = x[rng.choice(n, size=min(batch_size, n), replace=False)]
        labels, _ = _nearest(batch, centroids)
        for j in np.unique(labels):
            pts = batch[labels == j]
            counts[j] += len(pts)
            centroids[j] += (pts.sum(axis=0) - len(pts) * centroids[j]) / counts[j]
        if it % 10 == 0 or it == max_iter:
            _repair_empty(x, centroids)
            inertia = float(_nearest(x, centroids)[1].sum())
            if inertia <= best_inertia:
                improved = best_inertia - inertia
                best, best_inertia = centroids.copy(), inertia
                history.append(inertia)
                if improved <= 1e-9 * max(best_inertia, 1.0):
                    break
            else:
                centroids[:] = best
                history.append(best_inertia)
    return KMeansModel(best, k, batch_size, max_iter, seed, best_inertia, tuple(history), initial)


# -- DBSCAN ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DbscanResult:
    labels: np.ndarray
    eps: float
    min_pts: int
    n_clusters: int
    noise_fraction: float


def median_nn_distance(data: Dataset | np.ndarray) -> float:
    """Median distance from each distinct row to its nearest other distinct row."""
    x = np.unique(_as_array(data), axis=0)
    if len(x) < 2:
        return 0.0
    d, _ = cKDTree(x).query(x, k=2)
    return float(np.median(d[:, 1]))


def dbscan(data: Dataset | np.ndarray, eps: float, min_pts: int) -> DbscanResult:
    """Density-based clustering with Euclidean distance.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are grown in row order; a border point reachable
    from several clusters stays with the first (lowest id) that reaches it.
    Identical rows are processed once with multiplicity weights, which gives
    the same labels as processing them individually.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    x = _as_array(data)
    n = len(x)
    if n == 0:
        return DbscanResult(np.zeros(0, dtype=np.int64), float(eps), int(min_pts), 0, 0.0)
    uniq, first, inverse, weight = np.unique(x, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    # visit distinct points in order of first appearance
    visit = np.argsort(first, kind="stable")
    tree = cKDTree(uniq)
    radius = eps if np.isfinite(eps) else np.inf
    neighbours = tree.query_ball_point(uniq, r=radius) if np.isfinite(radius) else None
    all_idx = list(range(len(uniq)))

    def nbrs(i):
        return sorted(neighbours[i]) if neighbours is not None else all_idx

    core = np.array([weight[nbrs(i)].sum() >= min_pts for i in range(len(uniq))])
    labels = np.full(len(uniq), -1, dtype=np.int64)
    cluster = 0
    for start in visit:
        if labels[start] != -1 or not core[start]:
            continue
        labels[start] = cluster
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in nbrs(i):
                if labels[j] == -1:
                    labels[j] = cluster
                    if core[j]:
                        queue.append(j)
        cluster += 1
    row_labels = labels[inverse]
    return DbscanResult(
        labels=row_labels,
        eps=float(eps),
        min_pts=int(min_pts),
        n_clusters=cluster,
        noise_fraction=float(np.mean(row_labels == -1)),
    )


# -- APN -------------------------------------------------------------------


def fcm_clusterer(k: int = 6, m: float = 1.5, epsilon: float = 1e-5, max_iter: int = 1000) -> Clusterer:
    def run(x: np.ndarray, seed: int) -> np.ndarray:
        model = fit(x, FcmConfig(k=k, m=m, epsilon=epsilon, max_iter=max_iter, seed=seed))
        return np.argmax(model.memberships, axis=1)

    run.name = "fcm"  # type: ignore[attr-defined]
    return run


def kmeans_clusterer(k: int = 6, batch_size: int = 1024, max_iter: int = 100) -> Clusterer:
    def run(x: np.ndarray, seed: int) -> np.ndarray:
        return minibatch_kmeans(x, k=k, batch_size=batch_size, max_iter=max_iter, seed=seed).predict(x)

    run.name = "kmeans"  # type: ignore[attr-defined]
    return run


CLUSTERERS = {"fcm": fcm_clusterer, "kmeans": kmeans_clusterer}


@dataclass
class ApnResult:
    apn: float
    per_column: dict[int, float]
    skipped: dict[int, str]
    n_pairs: int
    n_coclustered: int


def _sample_pairs(n: int, max_pairs: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
        return i, j
    i = rng.integers(0, n, size=max_pairs)
    j = rng.integers(0, n - 1, size=max_pairs)
    j = j + (j >= i)
    return np.minimum(i, j), np.maximum(i, j)


def apn_stability(
    data: Dataset | np.ndarray,
    clusterer: Clusterer | str,
    seed: int = 0,
    max_pairs: int = 200_000,
    return_details: bool = False,
) -> float | ApnResult:
    """Average proportion of non-overlap under leave-one-column-out.

    For each dimension the data are re-clustered without it. Among sampled
    pairs co-clustered in the full fit, the share no longer co-clustered is
    averaged over dimensions. A column whose re-clustering raises is skipped.
    """
    if isinstance(clusterer, str):
        clusterer = CLUSTERERS[clusterer]()
    x = _as_array(data)
    n, dims = x.shape
    rng = np.random.default_rng(seed)
    full = np.asarray(clusterer(x, seed))
    pi, pj = _sample_pairs(n, max_pairs, rng)
    together = full[pi] == full[pj]
    pi, pj = pi[together], pj[together]
    per_col, skipped = {}, {}
    for c in range(dims):
        reduced = np.delete(x, c, axis=1)
        try:
            lab = np.asarray(clusterer(reduced, seed))
        except Exception as exc:  # clusterer failure is reported, not fatal
            skipped[c] = f"{type(exc).__name__}: {exc}"
            log.warning("APN: column %d skipped (%s)", c, exc)
            continue
        per_col[c] = float(np.mean(lab[pi] != lab[pj])) if len(pi) else 0.0
    apn = float(np.mean(list(per_col.values()))) if per_col else float("nan")
    if return_details:
        return ApnResult(apn, per_col, skipped, int(together.size), int(len(pi)))
    return apn


# -- comparison table -------------------------------------------------------


@dataclass(frozen=True)
class BaselineRow:
    method: str
    silhouette: float | None
    n_clusters: int | None
    noise_pct: float | None
    apn: float | None
    error: str | None = None


@dataclass
class BaselineReport:
    rows: list[BaselineRow]
    config: dict[str, object]

    def table(self) -> list[tuple]:
        return [(r.method, r.silhouette, r.n_clusters, r.noise_pct, r.apn, r.error or "") for r in self.rows]


def baseline_report(
    data: Dataset | np.ndarray,
    seed: int = 0,
    k: int = 6,
    fcm_config: FcmConfig | None = None,
    batch_size: int = 1024,
    kmeans_iter: int = 100,
    dbscan_eps: float | None = None,
    dbscan_min_pts: int | None = None,
    cap: int | None = SUBSAMPLE_CAP,
    max_pairs: int = 200_000,
) -> BaselineReport:
    """FCM (argmax), mini-batch k-means and DBSCAN on the same (sub)sample.

    A method that raises gets a row with ``error`` set instead of metrics.
    """
    x = _as_array(data)
    x = x[subsample_indices(len(x), cap, seed)]
    dims = x.shape[1]
    fcm_config = fcm_config or FcmConfig(k=k, seed=seed)
    eps = dbscan_eps if dbscan_eps is not None else median_nn_distance(x)
    min_pts = dbscan_min_pts if dbscan_min_pts is not None else 2 * dims
    config: dict[str, object] = {
        "seed": seed,
        "n": len(x),
        "subsample_cap": cap,
        "fcm.k": fcm_config.k,
        "fcm.m": fcm_config.m,
        "fcm.epsilon": fcm_config.epsilon,
        "fcm.max_iter": fcm_config.max_iter,
        "kmeans.k": k,
        "kmeans.batch_size": batch_size,
        "kmeans.max_iter": kmeans_iter,
        "dbscan.eps": eps,
        "dbscan.min_pts": min_pts,
        "apn.max_pairs": max_pairs,
        "apn.protocol": "leave-one-column-out",
    }
    rows = []

    fcm_run = fcm_clusterer(fcm_config.k, fcm_config.m, fcm_config.epsilon, fcm_config.max_iter)
    km_run = kmeans_clusterer(k, batch_size, kmeans_iter)
    for name, run, nclust in (("fcm_argmax", fcm_run, fcm_config.k), ("minibatch_kmeans", km_run, k)):
        try:
            labels = run(x, seed)
            rows.append(BaselineRow(name, silhouette(x, labels), nclust, 0.0,
                                    apn_stability(x, run, seed, max_pairs)))
        except Exception as exc:
            rows.append(BaselineRow(name, None, None, None, None, f"{type(exc).__name__}: {exc}"))
    try:
        if not eps > 0:
            raise ValueError("median nearest-neighbour distance is zero; pass dbscan_eps")
        res = dbscan(x, eps, min_pts)
        keep = res.labels != -1
        sil = silhouette(x[keep], res.labels[keep]) if keep.sum() >= 2 else None
        rows.append(BaselineRow("dbscan", sil, res.n_clusters, 100.0 * res.noise_fraction, None))
    except Exception as exc:
        rows.append(BaselineRow("dbscan", None, None, None, None, f"{type(exc).__name__}: {exc}"))
    return BaselineReport(rows, config)
