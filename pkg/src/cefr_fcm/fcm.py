"""Fuzzy C-Means by alternating optimization.

Memberships ``u_ij = 1 / sum_t (d_ij / d_it)^(2/(m-1))`` and centroids
``v_j = sum_i u_ij^m x_i / sum_i u_ij^m`` are updated in turn until no
centroid coordinate moves by ``epsilon`` or more.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from cefr_fcm.dataset import Dataset
from cefr_fcm.errors import InfeasibleError, SchemaError
from cefr_fcm.metrics import SUBSAMPLE_CAP, fpc, silhouette, subsample_indices

log = logging.getLogger(__name__)

INITS = ("seeded_points", "random_membership")
MODEL_FORMAT = "cefr-fcm/fcm-model"
MODEL_VERSION = 1

# a cluster whose summed weight falls below this is treated as empty
_EMPTY_WEIGHT = 1e-10


@dataclass(frozen=True)
class FcmConfig:
    k: int = 6
    m: float = 1.5
    epsilon: float = 1e-5
    max_iter: int = 1000
    seed: int = 0
    init: str = "seeded_points"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.m > 1.0:
            raise ValueError("m must be strictly greater than 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FcmConfig":
        return cls(
            k=int(d["k"]),
            m=float(d["m"]),
            epsilon=float(d["epsilon"]),
            max_iter=int(d["max_iter"]),
            seed=int(d["seed"]),
            init=str(d.get("init", "seeded_points")),
        )


@dataclass(frozen=True, eq=False)
class FcmModel:
    """A fitted FCM partition.

    ``memberships`` and ``objective_history`` describe the training run and
    are not persisted; a model loaded from disk has them empty.
    """

    centroids: np.ndarray
    config: FcmConfig
    iterations_used: int
    final_shift: float
    objective: float
    converged: bool = True
    degenerate: bool = False
    reseeds: int = 0
    objective_history: tuple[float, ...] = field(default=(), repr=False)
    memberships: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise SchemaError(f"centroid matrix must be 2-D with k >= 1 rows, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise SchemaError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "centroids": [[float(v) for v in row] for row in self.centroids],
            "iterations_used": int(self.iterations_used),
            "final_shift": float(self.final_shift),
            "objective": float(self.objective),
            "converged": bool(self.converged),
            "degenerate": bool(self.degenerate),
            "reseeds": int(self.reseeds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FcmModel":
        if d.get("format") != MODEL_FORMAT:
            raise SchemaError(f"not an FCM model document (format={d.get('format')!r})")
        if int(d.get("version", -1)) != MODEL_VERSION:
            raise SchemaError(f"unsupported FCM model version {d.get('version')!r}")
        try:
            return cls(
                centroids=np.array(d["centroids"], dtype=np.float64),
                config=FcmConfig.from_dict(d["config"]),
                iterations_used=int(d["iterations_used"]),
                final_shift=float(d["final_shift"]),
                objective=float(d["objective"]),
                converged=bool(d.get("converged", True)),
                degenerate=bool(d.get("degenerate", False)),
                reseeds=int(d.get("reseeds", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed FCM model document: {exc}") from exc


def _sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], centroids.shape[0]))
    for j, c in enumerate(centroids):
        diff = x - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def membership_matrix(x: np.ndarray, centroids: np.ndarray, m: float) -> np.ndarray:
    """Memberships of each row of ``x`` in each centroid.

    A row that coincides with one or more centroids gets its mass split
    equally among those centroids and zero elsewhere. Coincidence is decided
    on squared distances, so separations below about 1e-154 count as zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        return np.zeros((0, centroids.shape[0]))
    return _memberships_from_sq(_sq_distances(x, centroids), m)


def _memberships_from_sq(d2: np.ndarray, m: float) -> np.ndarray:
    zero = d2 <= 0.0
    # (d_ij / d_it)^(2/(m-1)) written on squared distances, scaled by the row minimum
    power = 1.0 / (m - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dmin = np.where(zero, np.inf, d2).min(axis=1, keepdims=True)
        ratio = (dmin / d2) ** power
        ratio = np.where(zero, 0.0, ratio)
        u = ratio / ratio.sum(axis=1, keepdims=True)
    hit = zero.any(axis=1)
    if hit.any():
        z = zero[hit].astype(np.float64)
        u[hit] = z / z.sum(axis=1, keepdims=True)
    return u


def _objective(u: np.ndarray, d2: np.ndarray, m: float) -> float:
    return float(np.sum((u**m) * d2))


def _initial_centroids(x: np.ndarray, config: FcmConfig, rng: np.random.Generator) -> np.ndarray:
    if config.init == "random_membership":
        u = rng.random((x.shape[0], config.k))
        u /= u.sum(axis=1, keepdims=True)
        w = u**config.m
        return (w.T @ x) / w.sum(axis=0)[:, None]
    _, first = np.unique(x, axis=0, return_index=True)
    order = np.sort(first)
    if len(order) >= config.k:
        pick = rng.choice(order, size=config.k, replace=False)
    else:
        # fewer distinct rows than clusters: use all distinct rows, repeat some
        extra = rng.choice(order, size=config.k - len(order), replace=True)
        pick = np.concatenate([order, extra])
    return x[np.sort(pick)].copy()


def fit(
    data: Dataset | np.ndarray,
    config: FcmConfig | None = None,
    init_centroids: np.ndarray | None = None,
) -> FcmModel:
    """Fit FCM to ``data``.

    Parameters
    ----------
    data : Dataset or ndarray of shape (n, 9)
    config : FcmConfig, optional
    init_centroids : ndarray of shape (k, 9), optional
        Explicit starting centroids, overriding ``config.init``.

    Raises
    ------
    InfeasibleError
        If there are fewer rows than clusters.
    """
    config = config or FcmConfig()
    x = data.as_float() if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise InfeasibleError("cannot fit an empty dataset")
    if n < config.k:
        raise InfeasibleError(f"need at least k={config.k} rows to fit, got {n}")
    rng = np.random.default_rng(config.seed)
    if init_centroids is not None:
        v = np.array(init_centroids, dtype=np.float64)
        if v.shape != (config.k, x.shape[1]):
            raise ValueError(f"init_centroids must have shape {(config.k, x.shape[1])}")
    else:
        v = _initial_centroids(x, config, rng)

    m = config.m
    history: list[float] = []
    shift = np.inf
    reseeds = 0
    it = 0
    for it in range(1, config.max_iter + 1):
        d2 = _sq_distances(x, v)
        u = _memberships_from_sq(d2, m)
        history.append(_objective(u, d2, m))
        w = u**m
        weight = w.sum(axis=0)
        empty = weight < _EMPTY_WEIGHT
        v_new = np.empty_like(v)
        v_new[~empty] = (w[:, ~empty].T @ x) / weight[~empty, None]
        if empty.any():
            # reseed each empty centroid to the currently worst-fitted row
            fit_cost = (w * d2).sum(axis=1)
            for j in np.flatnonzero(empty):
                worst = int(np.argmax(fit_cost))
                v_new[j] = x[worst]
                fit_cost[worst] = -np.inf
                reseeds += 1
        shift = float(np.max(np.abs(v_new - v)))
        v = v_new
        if shift < config.epsilon:
            break

    d2 = _sq_distances(x, v)
    u = _memberships_from_sq(d2, m)
    objective = _objective(u, d2, m)
    converged = shift < config.epsilon
    if not converged:
        log.warning("FCM hit max_iter=%d with shift %.3g", config.max_iter, shift)
    degenerate = False
    if config.k > 1:
        gaps = _sq_distances(v, v) + np.eye(config.k)
        degenerate = bool(np.any(gaps <= 1e-18))
    return FcmModel(
        centroids=v,
        config=config,
        iterations_used=it,
        final_shift=shift,
        objective=objective,
        converged=converged,
        degenerate=degenerate,
        reseeds=reseeds,
        objective_history=tuple(history + [objective]),
        memberships=u,
    )


def memberships(model: FcmModel, point: Sequence[float] | np.ndarray) -> np.ndarray:
    """Membership vector of a single point (cluster order of ``model``)."""
    p = np.asarray(point, dtype=np.float64).reshape(1, -1)
    return membership_matrix(p, model.centroids, model.config.m)[0]


def memberships_batch(model: FcmModel, data: Dataset | np.ndarray) -> np.ndarray:
    """Membership matrix of shape (n, k), rows in input order."""
    x = data.as_float() if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.size == 0:
        return np.zeros((0, model.k))
    return membership_matrix(x.reshape(-1, model.centroids.shape[1]), model.centroids, model.config.m)


@dataclass(frozen=True)
class GridCell:
    m: float
    epsilon: float
    fpc: float
    silhouette: float | None
    iterations_used: int
    converged: bool
    score: float = float("nan")
    selected: bool = False


@dataclass(frozen=True)
class GridSearchResult:
    cells: tuple[GridCell, ...]
    selected: GridCell

    def selected_config(self, base: FcmConfig) -> FcmConfig:
        return FcmConfig(
            k=base.k,
            m=self.selected.m,
            epsilon=self.selected.epsilon,
            max_iter=base.max_iter,
            seed=base.seed,
            init=base.init,
        )


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = np.nanmin(values), np.nanmax(values)
    if not np.isfinite(lo) or hi - lo <= 0:
        return np.where(np.isnan(values), 0.0, 1.0)
    return np.where(np.isnan(values), 0.0, (values - lo) / (hi - lo))


def grid_search(
    data: Dataset,
    m_grid: Iterable[float] = (1.5, 2.0, 2.5),
    eps_grid: Iterable[float] = (1e-3, 1e-4, 1e-5),
    k: int = 6,
    seed: int = 0,
    max_iter: int = 1000,
    silhouette_cap: int | None = SUBSAMPLE_CAP,
) -> GridSearchResult:
    """Fit every (m, epsilon) cell and pick the best by FPC and silhouette.

    Each metric is min-max scaled across the grid; the cell with the largest
    mean of the two scaled values wins. Ties go to the smaller ``m``, then
    the smaller ``epsilon``. An undefined silhouette scales to 0.
    """
    m_grid, eps_grid = list(m_grid), list(eps_grid)
    if not m_grid or not eps_grid:
        raise ValueError("grids must be non-empty")
    x = data.as_float()
    sub = subsample_indices(len(x), silhouette_cap, seed)
    raw = []
    for m, eps in itertools.product(m_grid, eps_grid):
        model = fit(data, FcmConfig(k=k, m=m, epsilon=eps, max_iter=max_iter, seed=seed))
        labels = np.argmax(model.memberships, axis=1)
        raw.append(
            (float(m), float(eps), fpc(model.memberships), silhouette(x[sub], labels[sub]),
             model.iterations_used, model.converged)
        )
    f = _minmax(np.array([r[2] for r in raw]))
    s = _minmax(np.array([np.nan if r[3] is None else r[3] for r in raw], dtype=float))
    scores = (f + s) / 2.0
    best = min(range(len(raw)), key=lambda i: (-scores[i], raw[i][0], raw[i][1]))
    cells = tuple(
        GridCell(*r, score=float(scores[i]), selected=(i == best)) for i, r in enumerate(raw)
    )
    return GridSearchResult(cells=cells, selected=cells[best])
