"""Validation battery for an ordered FCM model.

Partition quality (silhouette, FPC, partition entropy, mean certainty),
ordinal-progression tests, PCA, gap statistic, stratified cross-validation
and the train/test comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from cefr_fcm.dataset import DIMENSIONS, Dataset, stratified_folds
from cefr_fcm.errors import InfeasibleError
from cefr_fcm.fcm import FcmConfig, fit
from cefr_fcm.metrics import (
    SUBSAMPLE_CAP,
    entropy_certainty,
    fpc,
    partition_entropy,
    silhouette,
    subsample_indices,
    within_dispersion,
)
from cefr_fcm.ordering import OrderedFcmModel, order_clusters
from cefr_fcm.stats import StatTestResult, kendall_tau_b, kruskal_wallis, mann_whitney_u, spearman_rho

QUALITY_METRICS = ("silhouette", "fpc", "partition_entropy", "avg_certainty")


@dataclass(frozen=True)
class PartitionQuality:
    silhouette: float | None
    fpc: float
    partition_entropy: float
    avg_certainty: float
    n: int = 0
    silhouette_n: int = 0

    def metric(self, name: str) -> float | None:
        return getattr(self, name)

    def to_items(self, prefix: str = "") -> list[tuple[str, object]]:
        return [(f"{prefix}{name}", self.metric(name)) for name in QUALITY_METRICS] + [
            (f"{prefix}n", self.n),
            (f"{prefix}silhouette_n", self.silhouette_n),
        ]


def quality_from_memberships(
    x: np.ndarray, u: np.ndarray, cap: int | None = SUBSAMPLE_CAP, seed: int = 0
) -> PartitionQuality:
    labels = np.argmax(u, axis=1)
    sub = subsample_indices(len(x), cap, seed)
    return PartitionQuality(
        silhouette=silhouette(x[sub], labels[sub]),
        fpc=fpc(u),
        partition_entropy=partition_entropy(u),
        avg_certainty=float(entropy_certainty(u).mean()),
        n=len(x),
        silhouette_n=len(sub),
    )


def partition_quality(
    model: OrderedFcmModel, data: Dataset, cap: int | None = SUBSAMPLE_CAP, seed: int = 0
) -> PartitionQuality:
    """Silhouette on argmax labels plus FPC, partition entropy (nats) and mean certainty.

    Silhouette is ``None`` when only one hard cluster is populated. Above
    ``cap`` rows the silhouette uses a seeded subsample of that size.
    """
    if len(data) < 2:
        raise InfeasibleError("partition quality needs at least two rows")
    return quality_from_memberships(data.as_float(), model.memberships(data), cap, seed)


# -- ordinal progression ---------------------------------------------------


@dataclass(frozen=True)
class PairwiseTest:
    lower: str
    upper: str
    result: StatTestResult | None
    skipped: str | None = None


@dataclass(frozen=True)
class DimensionCorrelation:
    dimension: str
    kendall: StatTestResult
    spearman: StatTestResult


@dataclass(frozen=True)
class PcaResult:
    explained_variance_ratio: np.ndarray | None
    coordinates: np.ndarray
    components: np.ndarray
    mean: np.ndarray


@dataclass
class ValidationReport:
    quality: PartitionQuality
    kw: StatTestResult | None
    pairwise_mw: list[PairwiseTest]
    global_tau: StatTestResult
    global_rho: StatTestResult
    per_dimension: list[DimensionCorrelation]
    pca: PcaResult
    level_sizes: dict[str, int]
    level_medians: dict[str, float | None]
    notes: list[str] = field(default_factory=list)

    def to_items(self) -> list[tuple[str, object]]:
        from cefr_fcm.stats import format_p

        items: list[tuple[str, object]] = list(self.quality.to_items("quality."))
        for name, size in self.level_sizes.items():
            items.append((f"level.{name}.n", size))
            items.append((f"level.{name}.median_total", self.level_medians[name]))
        if self.kw is not None:
            items += [("kruskal_wallis.H", self.kw.statistic), ("kruskal_wallis.p", format_p(self.kw.p_value)),
                      ("kruskal_wallis.df", self.kw.detail.get("df"))]
        for pt in self.pairwise_mw:
            key = f"mann_whitney.{pt.lower}-{pt.upper}"
            if pt.result is None:
                items.append((f"{key}.skipped", pt.skipped))
            else:
                items += [(f"{key}.U", pt.result.statistic), (f"{key}.p", format_p(pt.result.p_value))]
        for name, res in (("global.kendall_tau", self.global_tau), ("global.spearman_rho", self.global_rho)):
            items += [(name, res.statistic), (f"{name}.p", format_p(res.p_value))]
        if self.pca.explained_variance_ratio is not None:
            items.append(("pca.explained_variance_ratio", list(self.pca.explained_variance_ratio)))
        else:
            items.append(("pca.explained_variance_ratio", None))
        items += [("note", n) for n in self.notes]
        return items

    def dimension_rows(self) -> list[tuple]:
        from cefr_fcm.stats import format_p

        return [
            (d.dimension, d.kendall.statistic, format_p(d.kendall.p_value),
             d.spearman.statistic, format_p(d.spearman.p_value))
            for d in self.per_dimension
        ]


def ordinal_progression_report(
    model: OrderedFcmModel,
    data: Dataset,
    all_pairs: bool = False,
    cap: int | None = SUBSAMPLE_CAP,
    seed: int = 0,
) -> ValidationReport:
    """Tests of ordinal progression across hard-assigned levels.

    Kruskal-Wallis and Mann-Whitney run on row total scores; the global
    correlation relates level ordinals to per-level median totals; the
    per-dimension table relates each row's level ordinal to its dimension score.
    """
    if len(data) < 2:
        raise InfeasibleError("validation needs at least two rows")
    u = model.memberships(data)
    x = data.as_float()
    hard = np.argmax(u, axis=1)
    totals = data.totals.astype(np.float64)
    names = model.level_names
    notes = [
        "partition_entropy_log=natural",
        "certainty_log=2",
        "tested_variable=total_score",
        f"silhouette_cap={cap}",
    ]

    groups = [totals[hard == j] for j in range(model.k)]
    populated = [g for g in groups if len(g)]
    kw = kruskal_wallis(populated) if len(populated) >= 2 else None
    if kw is None:
        notes.append("kruskal_wallis=skipped:fewer than two populated levels")

    pairs = combinations(range(model.k), 2) if all_pairs else zip(range(model.k - 1), range(1, model.k))
    pairwise = []
    for a, b in pairs:
        if len(groups[a]) == 0 or len(groups[b]) == 0:
            empty = names[a] if len(groups[a]) == 0 else names[b]
            pairwise.append(PairwiseTest(names[a], names[b], None, f"empty level {empty}"))
        else:
            pairwise.append(PairwiseTest(names[a], names[b], mann_whitney_u(groups[a], groups[b])))

    medians = {names[j]: (float(np.median(groups[j])) if len(groups[j]) else None) for j in range(model.k)}
    present = [j for j in range(model.k) if len(groups[j])]
    ords = np.array([j + 1 for j in present], dtype=np.float64)
    meds = np.array([medians[names[j]] for j in present], dtype=np.float64)
    if len(present) >= 2:
        global_tau, global_rho = kendall_tau_b(ords, meds), spearman_rho(ords, meds)
    else:
        undefined = {"undefined": "fewer than two populated levels"}
        global_tau = StatTestResult(None, None, "kendall_tau_b", undefined)
        global_rho = StatTestResult(None, None, "spearman_rho", undefined)

    level_ord = hard + 1.0
    per_dim = [
        DimensionCorrelation(d, kendall_tau_b(level_ord, x[:, i]), spearman_rho(level_ord, x[:, i]))
        for i, d in enumerate(DIMENSIONS)
    ]
    return ValidationReport(
        quality=quality_from_memberships(x, u, cap, seed),
        kw=kw,
        pairwise_mw=pairwise,
        global_tau=global_tau,
        global_rho=global_rho,
        per_dimension=per_dim,
        pca=pca_project(data),
        level_sizes={names[j]: int(len(groups[j])) for j in range(model.k)},
        level_medians=medians,
        notes=notes,
    )


# -- PCA -------------------------------------------------------------------


def pca_project(data: Dataset | np.ndarray, components: int = 2) -> PcaResult:
    """Project onto the leading principal axes of the sample covariance.

    Each axis is signed so that its largest-magnitude loading is positive.
    ``explained_variance_ratio`` covers all axes (descending) and is ``None``
    for zero-variance data.
    """
    x = data.as_float() if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n, dims = x.shape
    if n < 2:
        raise InfeasibleError("PCA needs at least two rows")
    if not 1 <= components <= dims:
        raise ValueError(f"components must lie in 1..{dims}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    idx = np.argsort(evals)[::-1]
    evals, evecs = np.clip(evals[idx], 0.0, None), evecs[:, idx]
    for j in range(dims):
        col = evecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, j] = -col
    total = evals.sum()
    ratios = evals / total if total > 0 else None
    return PcaResult(
        explained_variance_ratio=ratios,
        coordinates=xc @ evecs[:, :components],
        components=evecs[:, :components].T.copy(),
        mean=mean,
    )


# -- gap statistic ---------------------------------------------------------


@dataclass(frozen=True)
class GapRow:
    k: int
    log_w: float
    mean_ref_log_w: float
    gap: float
    sd: float
    s_k: float


def _hard_dispersion(x: np.ndarray, k: int, config: FcmConfig) -> float:
    if k == 1:
        return within_dispersion(x, np.zeros(len(x), dtype=int))
    cfg = FcmConfig(k=k, m=config.m, epsilon=config.epsilon, max_iter=config.max_iter,
                    seed=config.seed, init=config.init)
    model = fit(x, cfg)
    return within_dispersion(x, np.argmax(model.memberships, axis=1))


def gap_statistic(
    data: Dataset,
    k_range: Sequence[int] | range = range(2, 13),
    B: int = 10,
    seed: int = 0,
    config: FcmConfig | None = None,
    cap: int | None = SUBSAMPLE_CAP,
    same_reference: bool = False,
    max_redraws: int = 10,
) -> list[GapRow]:
    """Gap statistic over ``k_range`` using FCM argmax partitions.

    References are drawn uniformly over each dimension's observed range.
    ``same_reference`` reuses one reference draw for all ``B`` replicates,
    which zeroes the spread term.
    """
    if B < 5:
        raise ValueError("B must be at least 5")
    config = config or FcmConfig()
    ks = sorted(set(int(k) for k in k_range))
    x = data.as_float()
    x = x[subsample_indices(len(x), cap, seed)]
    n = len(x)
    if not ks or ks[0] < 1 or ks[-1] > n - 1:
        raise ValueError(f"k_range must lie within [1, {n - 1}]")
    lo, hi = x.min(axis=0), x.max(axis=0)
    rng = np.random.default_rng(seed)

    def draw():
        for _ in range(max_redraws):
            ref = lo + rng.random(x.shape) * (hi - lo)
            if np.ptp(ref, axis=0).max() > 0:
                return ref
        raise InfeasibleError("reference draws have zero dispersion (constant data?)")

    refs = [draw()] * B if same_reference else [draw() for _ in range(B)]
    rows = []
    for k in ks:
        w = _hard_dispersion(x, k, config)
        if w <= 0:
            raise InfeasibleError(f"zero within-cluster dispersion at k={k}")
        ref_logs = []
        for ref in refs:
            wr = _hard_dispersion(ref, k, config)
            attempts = 0
            while wr <= 0:
                attempts += 1
                if attempts > max_redraws:
                    raise InfeasibleError(f"degenerate reference dispersion at k={k}")
                wr = _hard_dispersion(draw(), k, config)
            ref_logs.append(math.log(wr))
        ref_logs = np.array(ref_logs)
        sd = float(ref_logs.std())
        mean_ref = float(ref_logs.mean())
        rows.append(GapRow(k, math.log(w), mean_ref, mean_ref - math.log(w), sd, sd * math.sqrt(1 + 1 / B)))
    return rows


# -- cross-validation and train/test ---------------------------------------


@dataclass
class CrossValidationResult:
    folds: list[PartitionQuality]
    fold_sizes: list[int]
    mean: dict[str, float | None]
    variance: dict[str, float | None]


def _summary(values: list[float | None]) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    arr = np.array(vals)
    var = float(arr.var(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), var


def cross_validate(
    data: Dataset,
    folds: int = 5,
    config: FcmConfig | None = None,
    seed: int = 0,
    strata_bins: int = 5,
    cap: int | None = SUBSAMPLE_CAP,
) -> CrossValidationResult:
    """Stratified k-fold: fit on ``folds - 1`` parts, score the held-out part.

    Variances are sample variances (``ddof=1``) across folds.
    """
    config = config or FcmConfig()
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(data) < folds * config.k:
        raise InfeasibleError(f"need at least folds*k = {folds * config.k} rows, got {len(data)}")
    parts = stratified_folds(data, folds, seed, strata_bins)
    results, sizes = [], []
    for f, held in enumerate(parts):
        train_idx = np.sort(np.concatenate([p for g, p in enumerate(parts) if g != f]))
        if len(held) < 2 or len(train_idx) < config.k:
            raise InfeasibleError(f"fold {f} is too small ({len(held)} held-out rows)")
        model = order_clusters(fit(data.take(train_idx), config))
        results.append(partition_quality(model, data.take(held), cap, seed))
        sizes.append(len(held))
    mean, variance = {}, {}
    for name in QUALITY_METRICS:
        mean[name], variance[name] = _summary([q.metric(name) for q in results])
    return CrossValidationResult(results, sizes, mean, variance)


@dataclass
class TrainTestReport:
    train: PartitionQuality
    test: PartitionQuality
    delta: dict[str, float | None]
    delta_pct: dict[str, float | None]

    def rows(self) -> list[tuple]:
        return [
            (name, self.train.metric(name), self.test.metric(name), self.delta[name], self.delta_pct[name])
            for name in QUALITY_METRICS
        ]


def train_test_report(
    model: OrderedFcmModel, train: Dataset, test: Dataset, cap: int | None = SUBSAMPLE_CAP, seed: int = 0
) -> TrainTestReport:
    """Quality on both splits; ``delta = test - train``, percent relative to train."""
    qa = partition_quality(model, train, cap, seed)
    qb = partition_quality(model, test, cap, seed)
    delta, pct = {}, {}
    for name in QUALITY_METRICS:
        a, b = qa.metric(name), qb.metric(name)
        if a is None or b is None:
            delta[name] = pct[name] = None
            continue
        delta[name] = b - a
        pct[name] = 100.0 * (b - a) / abs(a) if a != 0 else None
    return TrainTestReport(qa, qb, delta, pct)
