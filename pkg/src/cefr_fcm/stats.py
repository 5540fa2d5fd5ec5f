"""Rank-based tests: Kruskal-Wallis, Mann-Whitney U, Kendall tau-b, Spearman rho."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

P_FLOOR = 1e-300

KRUSKAL_WALLIS = "kruskal_wallis"
MANN_WHITNEY = "mann_whitney"
KENDALL_TAU_B = "kendall_tau_b"
SPEARMAN_RHO = "spearman_rho"


@dataclass(frozen=True)
class StatTestResult:
    """Outcome of a test.

    ``statistic`` and ``p_value`` are ``None`` when the statistic is undefined
    for the input (e.g. a correlation with a constant sample); ``detail``
    then carries an ``undefined`` reason.
    """

    statistic: float | None
    p_value: float | None
    method: str
    detail: dict = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.statistic is not None


def format_p(p: float | None) -> str:
    if p is None:
        return "undefined"
    if p < P_FLOOR:
        return f"<{P_FLOOR:g}"
    return repr(float(p))


def _norm_two_sided(z: float) -> float:
    return float(min(1.0, special.erfc(abs(z) / math.sqrt(2.0))))


def _tie_sizes(values: np.ndarray) -> np.ndarray:
    _, counts = np.unique(values, return_counts=True)
    return counts[counts > 1].astype(np.float64)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> StatTestResult:
    """Kruskal-Wallis H with tie correction; chi-squared p with ``g - 1`` df."""
    samples = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(samples) < 2:
        raise ValueError("Kruskal-Wallis needs at least two groups")
    if any(len(s) == 0 for s in samples):
        raise ValueError("Kruskal-Wallis groups must be non-empty")
    pooled = np.concatenate(samples)
    n = len(pooled)
    sizes = [len(s) for s in samples]
    detail = {"n_per_group": sizes, "df": len(samples) - 1}
    ties = _tie_sizes(pooled)
    correction = 1.0 - float(np.sum(ties**3 - ties)) / (n**3 - n) if n > 1 else 0.0
    detail["tie_correction"] = correction
    if correction <= 0.0:
        return StatTestResult(0.0, 1.0, KRUSKAL_WALLIS, detail)
    ranks = rankdata(pooled)
    bounds = np.cumsum([0] + sizes)
    h = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        r = ranks[lo:hi].sum()
        h += r * r / (hi - lo)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h = max(h / correction, 0.0)
    p = float(special.chdtrc(len(samples) - 1, h))
    return StatTestResult(float(h), p, KRUSKAL_WALLIS, detail)


@lru_cache(maxsize=None)
def _u_counts(nx: int, ny: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U value 0..nx*ny (no ties)."""
    # f(i, j)[u]: arrangements of i x-values and j y-values with statistic u
    table = {(0, j): [1] for j in range(ny + 1)}
    for i in range(1, nx + 1):
        table[(i, 0)] = [1]
        for j in range(1, ny + 1):
            a = table[(i - 1, j)]  # largest element is x: it beats all j y-values
            b = table[(i, j - 1)]  # largest element is y
            out = [0] * (i * j + 1)
            for u, c in enumerate(a):
                out[u + j] += c
            for u, c in enumerate(b):
                out[u] += c
            table[(i, j)] = out
    return tuple(table[(nx, ny)])


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> StatTestResult:
    """Two-sided Mann-Whitney U test; ``statistic`` is ``U_x``.

    Exact p by enumeration when ``len(x) + len(y) <= 12`` and there are no
    ties, otherwise the normal approximation with tie-corrected variance and
    a 0.5 continuity correction.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    nx, ny = len(x), len(y)
    if nx == 0 or ny == 0:
        raise ValueError("Mann-Whitney samples must be non-empty")
    pooled = np.concatenate([x, y])
    n = nx + ny
    ranks = rankdata(pooled)
    u = float(ranks[:nx].sum() - nx * (nx + 1) / 2.0)
    ties = _tie_sizes(pooled)
    mu = nx * ny / 2.0
    tie_term = float(np.sum(ties**3 - ties)) / (n * (n - 1)) if n > 1 else 0.0
    var = nx * ny / 12.0 * ((n + 1) - tie_term)
    z_plain = (u - mu) / math.sqrt(var) if var > 0 else 0.0
    detail = {"n_x": nx, "n_y": ny, "u_y": nx * ny - u, "z_uncorrected": z_plain,
              "tied_groups": int(len(ties))}
    if n <= 12 and len(ties) == 0:
        counts = np.array(_u_counts(nx, ny), dtype=np.float64)
        total = counts.sum()
        k = int(round(u))
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        detail["method"] = "exact"
        return StatTestResult(u, float(p), MANN_WHITNEY, detail)
    detail["method"] = "normal"
    if var <= 0:
        return StatTestResult(u, 1.0, MANN_WHITNEY, detail)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    detail["z"] = z
    return StatTestResult(u, _norm_two_sided(z), MANN_WHITNEY, detail)


def _concordance_from_table(table: np.ndarray) -> tuple[float, float]:
    """Concordant and discordant pair counts from an r x c contingency table."""
    t = table.astype(np.float64)
    # below_right[i, j] = sum of t[i', j'] with i' > i and j' > j
    cum = t[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
    below_right = np.zeros_like(t)
    below_right[:-1, :-1] = cum[1:, 1:]
    cum_left = t[::-1, :].cumsum(axis=0)[::-1, :].cumsum(axis=1)
    below_left = np.zeros_like(t)
    below_left[:-1, 1:] = cum_left[1:, :-1]
    return float((t * below_right).sum()), float((t * below_left).sum())


def _concordance_fenwick(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Concordant/discordant counts in O(n log n) for large non-discrete input."""
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    _, b_rank = np.unique(b, return_inverse=True)
    size = int(b_rank.max()) + 2
    tree = [0] * size

    def add(i):
        i += 1
        while i < size:
            tree[i] += 1
            i += i & -i

    def prefix(i):  # count of inserted ranks <= i - 1
        s = 0
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    conc = disc = 0
    n = len(a)
    start = 0
    inserted = 0
    while start < n:
        stop = start
        while stop < n and a[stop] == a[start]:
            stop += 1
        for i in range(start, stop):
            r = int(b_rank[i])
            less = prefix(r)
            leq = prefix(r + 1)
            conc += less
            disc += inserted - leq
        for i in range(start, stop):
            add(int(b_rank[i]))
        inserted += stop - start
        start = stop
    return float(conc), float(disc)


@lru_cache(maxsize=None)
def _inversion_counts(n: int) -> tuple[int, ...]:
    """Number of permutations of n items with each inversion count."""
    counts = [1]
    for m in range(2, n + 1):
        nxt = [0] * (len(counts) + m - 1)
        for inv, c in enumerate(counts):
            for extra in range(m):
                nxt[inv + extra] += c
        counts = nxt
    return tuple(counts)


def kendall_tau_b(a: Sequence[float], b: Sequence[float]) -> StatTestResult:
    """Kendall's tau-b.

    p is exact for ``n <= 8`` without ties (permutation distribution of the
    discordant-pair count), otherwise from the normal approximation with
    tie-corrected variance of ``S = concordant - discordant``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n = len(a)
    if n != len(b):
        raise ValueError("samples must have equal length")
    if n < 2:
        raise ValueError("need at least two observations")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    if len(ua) < 2 or len(ub) < 2:
        return StatTestResult(None, None, KENDALL_TAU_B, {"n": n, "undefined": "zero variance input"})
    if len(ua) * len(ub) <= 4_000_000:
        table = np.zeros((len(ua), len(ub)), dtype=np.int64)
        np.add.at(table, (ia, ib), 1)
        conc, disc = _concordance_from_table(table)
    else:
        conc, disc = _concordance_fenwick(a, b)
    ta = _tie_sizes(a)
    tb = _tie_sizes(b)
    n0 = n * (n - 1) / 2.0
    n1 = float(np.sum(ta * (ta - 1) / 2.0))
    n2 = float(np.sum(tb * (tb - 1) / 2.0))
    s = conc - disc
    tau = s / math.sqrt((n0 - n1) * (n0 - n2))
    tau = max(-1.0, min(1.0, tau))
    detail = {"n": n, "concordant": conc, "discordant": disc, "ties_a": n1, "ties_b": n2}
    if n <= 8 and n1 == 0 and n2 == 0:
        counts = np.array(_inversion_counts(n), dtype=np.float64)
        d = int(round(disc))
        total = counts.sum()
        p = min(1.0, 2.0 * min(counts[: d + 1].sum(), counts[d:].sum()) / total)
        detail["p_method"] = "exact"
        return StatTestResult(float(tau), float(p), KENDALL_TAU_B, detail)
    var = (
        n * (n - 1) * (2 * n + 5)
        - float(np.sum(ta * (ta - 1) * (2 * ta + 5)))
        - float(np.sum(tb * (tb - 1) * (2 * tb + 5)))
    ) / 18.0
    if n > 2:
        var += float(np.sum(ta * (ta - 1) * (ta - 2))) * float(np.sum(tb * (tb - 1) * (tb - 2))) / (
            9.0 * n * (n - 1) * (n - 2)
        )
    var += float(np.sum(ta * (ta - 1))) * float(np.sum(tb * (tb - 1))) / (2.0 * n * (n - 1))
    detail["p_method"] = "normal"
    p = _norm_two_sided(s / math.sqrt(var)) if var > 0 else 1.0
    return StatTestResult(float(tau), p, KENDALL_TAU_B, detail)


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> StatTestResult:
    """Spearman's rho as the Pearson correlation of average ranks.

    p from the normal approximation ``z = rho * sqrt(n - 1)``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n = len(a)
    if n != len(b):
        raise ValueError("samples must have equal length")
    if n < 2:
        raise ValueError("need at least two observations")
    ra = rankdata(a) - (n + 1) / 2.0
    rb = rankdata(b) - (n + 1) / 2.0
    sa, sb = float(np.dot(ra, ra)), float(np.dot(rb, rb))
    if sa == 0.0 or sb == 0.0:
        return StatTestResult(None, None, SPEARMAN_RHO, {"n": n, "undefined": "zero variance input"})
    rho = float(np.dot(ra, rb)) / math.sqrt(sa * sb)
    rho = max(-1.0, min(1.0, rho))
    p = _norm_two_sided(rho * math.sqrt(n - 1)) if n > 1 else 1.0
    return StatTestResult(rho, p, SPEARMAN_RHO, {"n": n, "p_method": "normal"})


def rank_correlations(a, b) -> tuple[StatTestResult, StatTestResult]:
    return kendall_tau_b(a, b), spearman_rho(a, b)
