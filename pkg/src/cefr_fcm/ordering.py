"""Ordering fitted clusters into proficiency levels by centroid total."""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from cefr_fcm.errors import NoCefrLabelsError, SchemaError
from cefr_fcm.fcm import FcmModel, memberships_batch
from cefr_fcm.thresholds import ClassifyThresholds

ORDERED_FORMAT = "cefr-fcm/ordered-model"
ORDERED_VERSION = 1
SJ_TIE_TOL = 1e-9


class CefrLevel(IntEnum):
    A1 = 1
    A2 = 2
    B1 = 3
    B2 = 4
    C1 = 5
    C2 = 6

    @property
    def code(self) -> str:
        return self.name

    @property
    def ordinal(self) -> int:
        return int(self.value)

    @classmethod
    def parse(cls, value: "CefrLevel | str | int") -> "CefrLevel":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown CEFR level {value!r}") from None
        return cls(int(value))


def sj(centroid: Sequence[float] | np.ndarray) -> float:
    """Sum of a centroid's coordinates."""
    return float(np.sum(np.asarray(centroid, dtype=np.float64)))


def level_names(k: int) -> tuple[str, ...]:
    if k == 6:
        return tuple(lvl.code for lvl in CefrLevel)
    return tuple(f"L{i}" for i in range(1, k + 1))


@dataclass(frozen=True, eq=False)
class OrderedFcmModel:
    """An FCM model plus the permutation that sorts its clusters by S_j.

    ``order[i]`` is the base-model cluster index holding level ``i + 1``.
    ``sj`` is listed in level order.
    """

    base: FcmModel
    sj: tuple[float, ...]
    order: tuple[int, ...]
    thresholds: ClassifyThresholds = field(default_factory=ClassifyThresholds)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        k = self.base.k
        if sorted(self.order) != list(range(k)):
            raise SchemaError(f"order {self.order} is not a permutation of 0..{k - 1}")
        if len(self.sj) != k:
            raise SchemaError("sj must have one value per cluster")

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def has_cefr(self) -> bool:
        return self.k == 6

    @property
    def level_names(self) -> tuple[str, ...]:
        return level_names(self.k)

    @property
    def centroids(self) -> np.ndarray:
        """Centroids in level order."""
        return self.base.centroids[list(self.order)]

    def memberships(self, data) -> np.ndarray:
        """Membership matrix with columns in level order."""
        return memberships_batch(self.base, data)[:, list(self.order)]

    def require_cefr(self) -> None:
        if not self.has_cefr:
            raise NoCefrLabelsError(f"CEFR labels need k=6, model has k={self.k}")

    def with_thresholds(self, thresholds: ClassifyThresholds) -> "OrderedFcmModel":
        return OrderedFcmModel(self.base, self.sj, self.order, thresholds, self.warnings)

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d["format"] = ORDERED_FORMAT
        d["version"] = ORDERED_VERSION
        d["sj"] = [float(v) for v in self.sj]
        d["order"] = [int(i) for i in self.order]
        d["levels"] = list(self.level_names)
        d["thresholds"] = self.thresholds.to_dict()
        d["warnings"] = list(self.warnings)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OrderedFcmModel":
        if d.get("format") != ORDERED_FORMAT:
            raise SchemaError(f"not an ordered model document (format={d.get('format')!r})")
        if int(d.get("version", -1)) != ORDERED_VERSION:
            raise SchemaError(f"unsupported ordered model version {d.get('version')!r}")
        base = dict(d)
        base["format"], base["version"] = "cefr-fcm/fcm-model", 1
        try:
            return cls(
                base=FcmModel.from_dict(base),
                sj=tuple(float(v) for v in d["sj"]),
                order=tuple(int(i) for i in d["order"]),
                thresholds=ClassifyThresholds.from_dict(d.get("thresholds", {})),
                warnings=tuple(d.get("warnings", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed ordered model document: {exc}") from exc


def _compare(a: tuple[float, np.ndarray], b: tuple[float, np.ndarray]) -> int:
    if abs(a[0] - b[0]) > SJ_TIE_TOL:
        return -1 if a[0] < b[0] else 1
    ta, tb = a[1].tolist(), b[1].tolist()
    return (ta > tb) - (ta < tb)


def order_clusters(
    model: FcmModel, thresholds: ClassifyThresholds | None = None
) -> OrderedFcmModel:
    """Sort clusters by ascending S_j.

    S_j values within ``1e-9`` of each other are ordered by lexicographic
    comparison of the centroid tuples, and an ``sj_tie`` warning is recorded.
    """
    sums = [sj(c) for c in model.centroids]
    keyed = [(sums[i], model.centroids[i], i) for i in range(model.k)]
    keyed.sort(key=functools.cmp_to_key(lambda a, b: _compare(a[:2], b[:2])))
    order = tuple(item[2] for item in keyed)
    warnings = []
    for a, b in zip(order, order[1:]):
        if abs(sums[a] - sums[b]) <= SJ_TIE_TOL:
            warnings.append(f"sj_tie:clusters={a},{b}:sj={sums[a]!r}")
    return OrderedFcmModel(
        base=model,
        sj=tuple(sums[i] for i in order),
        order=order,
        thresholds=thresholds or ClassifyThresholds(),
        warnings=tuple(warnings),
    )


def level_profile(model: OrderedFcmModel, level: CefrLevel | str | int) -> np.ndarray:
    """Centroid assigned to ``level``."""
    model.require_cefr()
    lvl = CefrLevel.parse(level)
    return model.base.centroids[model.order[lvl.ordinal - 1]].copy()


def save_model(model: OrderedFcmModel | FcmModel, path: str | Path) -> None:
    text = json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> OrderedFcmModel:
    """Load an ordered model; a bare FCM model document is ordered on load."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read model {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: model document must be a JSON object")
    if doc.get("format") == "cefr-fcm/fcm-model":
        return order_clusters(FcmModel.from_dict(doc))
    return OrderedFcmModel.from_dict(doc)
