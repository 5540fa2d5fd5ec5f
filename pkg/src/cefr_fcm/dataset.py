"""Loading, saving, splitting and synthesizing datasets of CT score vectors.

Every row is a nine-dimensional vector of ordinal scores in ``0..4``. Column
order is always normalized to :data:`DIMENSIONS`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from cefr_fcm.errors import EmptyInputError, InfeasibleError, SchemaError

DIMENSIONS: tuple[str, ...] = (
    "abstraction",
    "parallelization",
    "logic",
    "synchronization",
    "flow_control",
    "user_interactivity",
    "data_representation",
    "math_operators",
    "motion_operators",
)
N_DIMS = len(DIMENSIONS)
MAX_SCORE = 4
MAX_TOTAL = N_DIMS * MAX_SCORE

# Published ordered centroids, rows A1..C2, columns in DIMENSIONS order.
TABLE2_CENTROIDS = np.array(
    [
        [0.12, 0.18, 0.09, 0.15, 0.52, 1.01, 0.24, 0.08, 0.31],
        [0.89, 1.02, 0.65, 0.88, 1.76, 1.45, 1.34, 0.43, 1.15],
        [1.58, 1.89, 1.35, 1.58, 2.45, 1.68, 2.18, 0.82, 1.92],
        [2.21, 2.64, 2.01, 2.18, 2.85, 1.84, 2.89, 1.21, 2.55],
        [2.78, 3.18, 2.62, 2.71, 3.15, 1.95, 3.45, 1.59, 3.04],
        [3.29, 3.61, 3.19, 3.19, 3.38, 2.03, 3.87, 1.96, 3.46],
    ]
)
TABLE2_CENTROIDS.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable collection of score vectors.

    Parameters
    ----------
    scores : array_like, shape (n, 9)
        Integer scores in ``0..4``, columns in :data:`DIMENSIONS` order.
    row_ids : sequence of str, optional
        Opaque identifiers, unique, one per row.
    """

    scores: np.ndarray
    row_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.scores)
        if arr.size == 0:
            arr = arr.reshape(0, N_DIMS)
        if arr.ndim != 2 or arr.shape[1] != N_DIMS:
            raise SchemaError(f"expected an (n, {N_DIMS}) score matrix, got shape {arr.shape}")
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or not np.array_equal(arr, np.rint(arr)):
                raise SchemaError("scores must be integers")
        elif arr.dtype.kind not in "iu":
            raise SchemaError(f"scores must be integers, got dtype {arr.dtype}")
        arr = arr.astype(np.int64)
        bad = np.argwhere((arr < 0) | (arr > MAX_SCORE))
        if len(bad):
            r, c = bad[0]
            raise SchemaError(
                f"row {r}: {DIMENSIONS[c]} = {arr[r, c]} is outside 0..{MAX_SCORE}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        if self.row_ids is not None:
            ids = tuple(str(i) for i in self.row_ids)
            if len(ids) != len(arr):
                raise SchemaError(f"{len(ids)} row ids for {len(arr)} rows")
            if len(set(ids)) != len(ids):
                raise SchemaError("row ids must be unique")
            object.__setattr__(self, "row_ids", ids)

    def __len__(self) -> int:
        return self.scores.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.row_ids == other.row_ids and np.array_equal(self.scores, other.scores)

    @property
    def totals(self) -> np.ndarray:
        """Total score per row (0..36)."""
        return self.scores.sum(axis=1)

    def as_float(self) -> np.ndarray:
        return self.scores.astype(np.float64)

    def take(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        ids = None if self.row_ids is None else tuple(self.row_ids[i] for i in idx)
        return Dataset(self.scores[idx], ids)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    strata_bins: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.strata_bins < 1:
            raise ValueError("strata_bins must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class SyntheticSample(NamedTuple):
    data: Dataset
    labels: np.ndarray


def load_csv(path: str | Path) -> Dataset:
    """Read a score CSV.

    The header must name all nine dimensions (any order); an ``id`` column is
    optional. Rows keep file order.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return parse_csv(text, source=str(path))


def parse_csv(text: str, source: str = "<string>") -> Dataset:
    if text.startswith("\ufeff"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    while header is not None and not any(h.strip() for h in header):
        header = next(reader, None)
    if header is None:
        raise EmptyInputError(f"{source}: empty file")
    header = [h.strip() for h in header]
    missing = [d for d in DIMENSIONS if d not in header]
    if missing:
        raise SchemaError(f"{source}: missing column {missing[0]!r}")
    unknown = [h for h in header if h not in DIMENSIONS and h != "id"]
    if unknown:
        raise SchemaError(f"{source}: unexpected column {unknown[0]!r}")
    if len(set(header)) != len(header):
        raise SchemaError(f"{source}: duplicated column in header")
    cols = [header.index(d) for d in DIMENSIONS]
    id_col = header.index("id") if "id" in header else None

    rows: list[list[int]] = []
    ids: list[str] = []
    for line_no, record in enumerate(reader, start=2):
        if not record or not any(cell.strip() for cell in record):
            continue
        if len(record) != len(header):
            raise SchemaError(
                f"{source}: row {line_no}: expected {len(header)} fields, got {len(record)}"
            )
        values = []
        for d, c in zip(DIMENSIONS, cols):
            cell = record[c].strip()
            try:
                v = int(cell)
            except ValueError:
                raise SchemaError(
                    f"{source}: row {line_no}, column {d}: {cell!r} is not an integer"
                ) from None
            if not 0 <= v <= MAX_SCORE:
                raise SchemaError(
                    f"{source}: row {line_no}, column {d}: {v} is outside 0..{MAX_SCORE}"
                )
            values.append(v)
        rows.append(values)
        if id_col is not None:
            ids.append(record[id_col].strip())

    scores = np.array(rows, dtype=np.int64).reshape(-1, N_DIMS)
    return Dataset(scores, tuple(ids) if id_col is not None else None)


def format_csv(data: Dataset) -> str:
    header = (["id"] if data.row_ids is not None else []) + list(DIMENSIONS)
    lines = [",".join(header)]
    for i, row in enumerate(data.scores):
        cells = [str(int(v)) for v in row]
        if data.row_ids is not None:
            cells.insert(0, data.row_ids[i])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_dataset(data: Dataset, path: str | Path) -> None:
    """Write ``data`` in the canonical CSV layout (LF line endings)."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(data))
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def strata_of(data: Dataset, bins: int) -> np.ndarray:
    """Equal-width bin index of each row's total score over ``[0, 36]``."""
    width = MAX_TOTAL / bins
    return np.minimum((data.totals / width).astype(np.int64), bins - 1)


def stratified_split_indices(data: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    n = len(data)
    if n < 2:
        raise InfeasibleError(f"cannot split a dataset of {n} row(s)")
    rng = np.random.default_rng(spec.seed)
    strata = strata_of(data, spec.strata_bins)
    train, test = [], []
    for s in range(spec.strata_bins):
        members = np.flatnonzero(strata == s)
        if len(members) == 0:
            continue
        members = members[rng.permutation(len(members))]
        n_train = int(round(spec.train_fraction * len(members)))
        train.append(members[:n_train])
        test.append(members[n_train:])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test))
    # both sides must be usable
    if len(test_idx) == 0:
        moved = train_idx[rng.integers(len(train_idx))]
        train_idx, test_idx = train_idx[train_idx != moved], np.array([moved])
    elif len(train_idx) == 0:
        moved = test_idx[rng.integers(len(test_idx))]
        test_idx, train_idx = test_idx[test_idx != moved], np.array([moved])
    return train_idx, test_idx


def stratified_split(data: Dataset, spec: SplitSpec | None = None) -> tuple[Dataset, Dataset]:
    """Split into (train, test), stratified on binned total score.

    Within each stratum rows are shuffled with the seeded generator and the
    first ``round(train_fraction * size)`` go to train. Both outputs keep
    the input's relative row order.
    """
    spec = spec or SplitSpec()
    train_idx, test_idx = stratified_split_indices(data, spec)
    return data.take(train_idx), data.take(test_idx)


def stratified_folds(data: Dataset, folds: int, seed: int, bins: int = 5) -> list[np.ndarray]:
    """Assign rows to ``folds`` folds, dealing each shuffled stratum round-robin."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    rng = np.random.default_rng(seed)
    strata = strata_of(data, bins)
    assignment = np.empty(len(data), dtype=np.int64)
    offset = 0
    for s in range(bins):
        members = np.flatnonzero(strata == s)
        members = members[rng.permutation(len(members))]
        assignment[members] = (np.arange(len(members)) + offset) % folds
        offset += len(members)
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def synthesize(
    centroids: np.ndarray | Sequence[Sequence[float]] = TABLE2_CENTROIDS,
    per_cluster_n: int = 2000,
    noise_sd: float = 0.6,
    seed: int = 0,
) -> SyntheticSample:
    """Draw noisy integer vectors around each centroid.

    Each draw is ``clip(round(centroid + N(0, noise_sd^2)), 0, 4)``
    per dimension. Rows come back shuffled; ``labels[i]`` is the index of the
    centroid row that generated row ``i``.
    """
    centers = np.asarray(centroids, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != N_DIMS:
        raise SchemaError(f"centroid matrix must have {N_DIMS} columns, got shape {centers.shape}")
    if np.any((centers < 0) | (centers > MAX_SCORE)) or not np.all(np.isfinite(centers)):
        raise SchemaError(f"centroid entries must lie in [0, {MAX_SCORE}]")
    if per_cluster_n <= 0:
        raise EmptyInputError("per_cluster_n must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    k = len(centers)
    labels = np.repeat(np.arange(k), per_cluster_n)
    raw = centers[labels] + rng.normal(0.0, 1.0, size=(len(labels), N_DIMS)) * noise_sd
    scores = np.clip(np.rint(raw), 0, MAX_SCORE).astype(np.int64)
    perm = rng.permutation(len(labels))
    return SyntheticSample(Dataset(scores[perm]), labels[perm])


def describe(data: Dataset) -> dict[str, dict[str, float]]:
    """Per-dimension mean, SD (ddof=1) and quartiles."""
    out = {}
    x = data.as_float()
    for j, d in enumerate(DIMENSIONS):
        col = x[:, j]
        q1, med, q3 = np.percentile(col, [25, 50, 75])
        out[d] = {
            "mean": float(col.mean()),
            "sd": float(col.std(ddof=1)) if len(col) > 1 else 0.0,
            "q1": float(q1),
            "median": float(med),
            "q3": float(q3),
        }
    return out
