"""Enhanced classification of membership vectors.

A membership vector (in level order A1..C2) is summarized by its primary and
secondary levels, a type (Clear / Transition / Predominant), a continuous
score on the 1..6 scale and an entropy-based certainty.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cefr_fcm.dataset import Dataset
from cefr_fcm.metrics import entropy_certainty
from cefr_fcm.ordering import CefrLevel, OrderedFcmModel
from cefr_fcm.thresholds import ClassifyThresholds

_TIE_TOL = 1e-12
HIST_EDGES = np.round(np.linspace(1.0, 6.0, 51), 10)


class ClassificationType(str, Enum):
    CLEAR = "Clear"
    TRANSITION = "Transition"
    PREDOMINANT = "Predominant"


class CertaintyBand(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


def _as_vector(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size == 0:
        raise ValueError("empty membership vector")
    return u


def top_two(u: Sequence[float] | np.ndarray) -> tuple[int, int]:
    """Indices of the primary and secondary memberships.

    The primary is the first maximum. Among clusters sharing the second-largest
    value, the one adjacent to the primary is chosen if exactly one is
    adjacent, otherwise the lowest index.
    """
    u = _as_vector(u)
    primary = int(np.argmax(u))
    if u.size == 1:
        return primary, primary
    rest = np.delete(np.arange(u.size), primary)
    best = u[rest].max()
    tied = [int(j) for j in rest if best - u[j] <= _TIE_TOL]
    if len(tied) > 1:
        adjacent = [j for j in tied if abs(j - primary) == 1]
        if len(adjacent) == 1:
            return primary, adjacent[0]
    return primary, tied[0]


def classify_type(
    u: Sequence[float] | np.ndarray, th: ClassifyThresholds | None = None
) -> ClassificationType:
    th = th or ClassifyThresholds()
    u = _as_vector(u)
    p, s = top_two(u)
    if u[p] >= th.tau_clear:
        return ClassificationType.CLEAR
    if abs(u[p] - u[s]) < th.tau_trans:
        return ClassificationType.TRANSITION
    return ClassificationType.PREDOMINANT


def continuous_score(u: Sequence[float] | np.ndarray) -> float:
    """Membership-weighted mean of the level ordinals 1..k."""
    u = _as_vector(u)
    ordinals = np.arange(1, u.size + 1)
    return float(np.clip(np.dot(u, ordinals), 1.0, float(u.size)))


def certainty(u: Sequence[float] | np.ndarray) -> float:
    """``1 - H(u) / log2(k)`` with base-2 entropy."""
    return float(entropy_certainty(_as_vector(u))[0])


def certainty_band(c: float, th: ClassifyThresholds | None = None) -> CertaintyBand:
    th = th or ClassifyThresholds()
    if c < th.cert_low:
        return CertaintyBand.LOW
    if c >= th.cert_high:
        return CertaintyBand.HIGH
    return CertaintyBand.MEDIUM


@dataclass(frozen=True)
class ClassificationRecord:
    memberships: tuple[float, ...]
    primary: CefrLevel
    secondary: CefrLevel
    ctype: ClassificationType
    label: str
    score: float
    certainty: float
    certainty_band: CertaintyBand
    row_id: str | None = None

    @property
    def is_adjacent(self) -> bool:
        return abs(self.primary.ordinal - self.secondary.ordinal) == 1


def _record(u: np.ndarray, th: ClassifyThresholds, row_id: str | None = None) -> ClassificationRecord:
    p, s = top_two(u)
    ctype = classify_type(u, th)
    primary, secondary = CefrLevel(p + 1), CefrLevel(s + 1)
    label = primary.code
    if ctype is ClassificationType.TRANSITION:
        label = f"{primary.code}-{secondary.code}"
    c = certainty(u)
    return ClassificationRecord(
        memberships=tuple(float(v) for v in u),
        primary=primary,
        secondary=secondary,
        ctype=ctype,
        label=label,
        score=continuous_score(u),
        certainty=c,
        certainty_band=certainty_band(c, th),
        row_id=row_id,
    )


def classify(
    model: OrderedFcmModel,
    point: Sequence[int] | np.ndarray,
    thresholds: ClassifyThresholds | None = None,
) -> ClassificationRecord:
    """Classify one score vector against a six-level ordered model."""
    model.require_cefr()
    u = model.memberships(np.asarray(point, dtype=np.float64).reshape(1, -1))[0]
    return _record(u, thresholds or model.thresholds)


@dataclass
class DistributionSummary:
    n: int
    by_type: dict[str, int]
    by_label: dict[str, int]
    by_primary: dict[str, int]
    by_band: dict[str, int]
    score_histogram: list[int]
    histogram_edges: list[float] = field(default_factory=lambda: HIST_EDGES.tolist())
    adjacent_transitions: int = 0
    mean_score: float = float("nan")
    mean_certainty: float = float("nan")

    def percent(self, counts: dict[str, int]) -> dict[str, float]:
        if self.n == 0:
            return {k: 0.0 for k in counts}
        return {k: 100.0 * v / self.n for k, v in counts.items()}

    @property
    def transitions(self) -> int:
        return self.by_type.get(ClassificationType.TRANSITION.value, 0)

    @property
    def adjacent_transition_share(self) -> float | None:
        if self.transitions == 0:
            return None
        return self.adjacent_transitions / self.transitions

    def to_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [
            ("n", self.n),
            ("mean_score", self.mean_score),
            ("mean_certainty", self.mean_certainty),
            ("transitions_adjacent", self.adjacent_transitions),
            ("transitions_adjacent_share", self.adjacent_transition_share),
        ]
        for prefix, counts in (
            ("type", self.by_type),
            ("primary", self.by_primary),
            ("band", self.by_band),
            ("label", self.by_label),
        ):
            pct = self.percent(counts)
            for key in counts:
                items.append((f"{prefix}.{key}.count", counts[key]))
                items.append((f"{prefix}.{key}.percent", pct[key]))
        return items


def summarize(records: Sequence[ClassificationRecord]) -> DistributionSummary:
    by_type = {t.value: 0 for t in ClassificationType}
    by_band = {b.value: 0 for b in CertaintyBand}
    by_primary = {lvl.code: 0 for lvl in CefrLevel}
    labels: Counter[str] = Counter()
    adjacent = 0
    for r in records:
        by_type[r.ctype.value] += 1
        by_band[r.certainty_band.value] += 1
        by_primary[r.primary.code] += 1
        labels[r.label] += 1
        if r.ctype is ClassificationType.TRANSITION and r.is_adjacent:
            adjacent += 1
    scores = np.array([r.score for r in records], dtype=np.float64)
    hist, _ = np.histogram(scores, bins=HIST_EDGES)
    by_label = {k: labels[k] for k in sorted(labels, key=_label_key)}
    return DistributionSummary(
        n=len(records),
        by_type=by_type,
        by_label=by_label,
        by_primary=by_primary,
        by_band=by_band,
        score_histogram=hist.tolist(),
        adjacent_transitions=adjacent,
        mean_score=float(scores.mean()) if len(scores) else float("nan"),
        mean_certainty=float(np.mean([r.certainty for r in records])) if records else float("nan"),
    )


def _label_key(label: str) -> tuple[int, int]:
    parts = label.split("-")
    first = CefrLevel[parts[0]].ordinal
    second = CefrLevel[parts[1]].ordinal if len(parts) > 1 else 0
    return first, second


def classify_batch(
    model: OrderedFcmModel,
    data: Dataset | np.ndarray,
    thresholds: ClassifyThresholds | None = None,
) -> tuple[list[ClassificationRecord], DistributionSummary]:
    """Classify every row; returns the records and their distribution summary."""
    model.require_cefr()
    th = thresholds or model.thresholds
    u = model.memberships(data)
    ids = data.row_ids if isinstance(data, Dataset) else None
    records = [_record(row, th, None if ids is None else ids[i]) for i, row in enumerate(u)]
    return records, summarize(records)


@dataclass(frozen=True)
class SensitivityCell:
    tau_clear: float
    tau_trans: float
    clear_pct: float
    transition_pct: float
    predominant_pct: float


def threshold_sensitivity(
    model: OrderedFcmModel,
    data: Dataset | np.ndarray,
    tau_clear_grid: Iterable[float],
    tau_trans_grid: Iterable[float],
) -> list[SensitivityCell]:
    """Type shares for every (tau_clear, tau_trans) pair.

    Memberships are computed once; only the type rule is re-applied per cell.
    Grid values are not required to satisfy ``tau_trans < tau_clear``.
    """
    u = model.memberships(data)
    n = u.shape[0]
    top = np.sort(u, axis=1)[:, ::-1]
    umax = top[:, 0]
    gap = top[:, 0] - top[:, 1] if u.shape[1] > 1 else np.zeros(n)
    cells = []
    for tc in tau_clear_grid:
        for tt in tau_trans_grid:
            if not (0.0 <= tc <= 1.0 and 0.0 <= tt <= 1.0):
                raise ValueError("threshold grid values must lie in [0, 1]")
            clear = umax >= tc
            trans = ~clear & (gap < tt)
            pred = ~clear & ~trans
            scale = 100.0 / n if n else 0.0
            cells.append(
                SensitivityCell(
                    float(tc), float(tt),
                    float(clear.sum() * scale), float(trans.sum() * scale), float(pred.sum() * scale),
                )
            )
    return cells


CSV_COLUMNS = ("id", "label", "ctype", "primary", "secondary", "score", "certainty", "band")


def format_records_csv(records: Sequence[ClassificationRecord], k: int = 6) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(CSV_COLUMNS) + [f"u{j}" for j in range(1, k + 1)])
    for i, r in enumerate(records):
        writer.writerow(
            [
                r.row_id if r.row_id is not None else str(i),
                r.label,
                r.ctype.value,
                r.primary.code,
                r.secondary.code,
                repr(r.score),
                repr(r.certainty),
                r.certainty_band.value,
            ]
            + [repr(v) for v in r.memberships]
        )
    return buf.getvalue()


def write_records_csv(records: Sequence[ClassificationRecord], path: str | Path) -> None:
    Path(path).write_text(format_records_csv(records), encoding="utf-8")
