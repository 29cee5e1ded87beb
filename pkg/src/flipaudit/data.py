"""Feature matrices, grouped samples, normalization and transport costs.

All container types are immutable after construction (arrays are copied and
frozen), so they can be shared freely between threads.
"""

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantFeatureError,
    DataError,
    DimensionMismatchError,
    NonFiniteError,
    SchemaMismatchError,
    ShapeMismatchError,
)

#: Reserved CSV column names that are not features.
LABEL_COLUMN = "label"
GROUP_COLUMN = "group"


def _frozen(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An n x d matrix of finite real features with named columns."""

    values: np.ndarray
    feature_names: tuple

    def __init__(self, values, feature_names):
        values = _frozen(values)
        if values.ndim != 2:
            raise ShapeMismatchError(f"expected 2-d values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("feature values contain NaN or inf")
        names = tuple(str(n) for n in feature_names)
        if len(names) != values.shape[1]:
            raise ShapeMismatchError(
                f"{len(names)} feature names for {values.shape[1]} columns"
            )
        if len(set(names)) != len(names) or any(not n for n in names):
            raise DataError("feature names must be unique and nonempty")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        """Rows at ``indices``, in that order."""
        return FeatureMatrix(self.values[np.asarray(indices, dtype=int)], self.feature_names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


def _check_labels(labels, n: int, side: str):
    if labels is None:
        return None
    arr = _frozen(labels, dtype=int)
    if arr.shape != (n,):
        raise ShapeMismatchError(f"labels_{side} has shape {arr.shape}, expected ({n},)")
    if not np.isin(arr, (0, 1)).all():
        raise DataError(f"labels_{side} must be binary 0/1")
    return arr


@dataclass(frozen=True, eq=False)
class GroupedDataset:
    """Two same-schema samples (source group_a, target group_b) with optional labels."""

    group_a: FeatureMatrix
    group_b: FeatureMatrix
    labels_a: np.ndarray | None = None
    labels_b: np.ndarray | None = None

    def __post_init__(self):
        if self.group_a.feature_names != self.group_b.feature_names:
            raise SchemaMismatchError(
                f"feature names differ between groups: "
                f"{self.group_a.feature_names} vs {self.group_b.feature_names}"
            )
        object.__setattr__(self, "labels_a", _check_labels(self.labels_a, self.group_a.n_rows, "a"))
        object.__setattr__(self, "labels_b", _check_labels(self.labels_b, self.group_b.n_rows, "b"))

    @property
    def feature_names(self) -> tuple:
        return self.group_a.feature_names

    @property
    def n_features(self) -> int:
        return self.group_a.n_features

    def has_labels(self) -> bool:
        return self.labels_a is not None and self.labels_b is not None

    def swapped(self) -> "GroupedDataset":
        """The same data with source and target exchanged."""
        return GroupedDataset(self.group_b, self.group_a, self.labels_b, self.labels_a)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Column-wise shift/scale to zero mean and unit (population) variance."""

    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "std_devs", _frozen(self.std_devs))
        if self.means.shape != self.std_devs.shape or self.means.ndim != 1:
            raise ShapeMismatchError("means and std_devs must be 1-d of equal length")
        if not (self.std_devs > 0).all():
            raise DataError("std_devs must be strictly positive")

    def transform_values(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.means) / self.std_devs

    def inverse_values(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std_devs + self.means

    def transform(self, data: FeatureMatrix) -> FeatureMatrix:
        return FeatureMatrix(self.transform_values(data.values), data.feature_names)

    def inverse_transform(self, data: FeatureMatrix) -> FeatureMatrix:
        return FeatureMatrix(self.inverse_values(data.values), data.feature_names)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "std_devs": self.std_devs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["means"]), np.asarray(d["std_devs"]))


def fit_normalizer(data: FeatureMatrix) -> Normalizer:
    """Fit per-column mean and population standard deviation.

    Raises ConstantFeatureError for zero-variance columns instead of silently
    dropping them, so downstream feature indices stay valid.
    """
    if data.n_rows < 2:
        raise DataError("need at least 2 rows to fit a normalizer")
    means = data.values.mean(axis=0)
    stds = data.values.std(axis=0)  # population (ddof=0)
    for j, s in enumerate(stds):
        if s == 0.0:
            raise ConstantFeatureError(data.feature_names[j])
    return Normalizer(means, stds)


def normalize_dataset(data: GroupedDataset) -> tuple[GroupedDataset, Normalizer]:
    """Fit on the union of both groups, then transform each group.

    Fitting jointly preserves the inter-group shift that a transport map has
    to learn; per-group fitting would erase it.
    """
    pooled = FeatureMatrix(
        np.vstack([data.group_a.values, data.group_b.values]), data.feature_names
    )
    norm = fit_normalizer(pooled)
    out = GroupedDataset(
        norm.transform(data.group_a),
        norm.transform(data.group_b),
        data.labels_a,
        data.labels_b,
    )
    return out, norm


class CostFunction(enum.Enum):
    """Transport cost between two points; squared L1 is the package default."""

    SQUARED_L1 = "sql1"
    L1 = "l1"
    SQUARED_L2 = "sql2"


def cost(c: CostFunction, x, y) -> float:
    """Cost of moving from point ``x`` to point ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatchError(f"points have shapes {x.shape} and {y.shape}")
    return float(_cost_rows(c, x[None, :], y[None, :])[0])


def _cost_rows(c: CostFunction, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cost between aligned (n, d) arrays."""
    diff = a - b
    if c is CostFunction.SQUARED_L1:
        return np.abs(diff).sum(axis=-1) ** 2
    if c is CostFunction.L1:
        return np.abs(diff).sum(axis=-1)
    if c is CostFunction.SQUARED_L2:
        return (diff**2).sum(axis=-1)
    raise ValueError(f"unknown cost {c}")


def cost_grad_rows(c: CostFunction, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of the row-wise cost with respect to ``b`` (subgradient 0 at kinks)."""
    diff = b - a
    if c is CostFunction.SQUARED_L1:
        return 2.0 * np.abs(diff).sum(axis=-1, keepdims=True) * np.sign(diff)
    if c is CostFunction.L1:
        return np.sign(diff)
    if c is CostFunction.SQUARED_L2:
        return 2.0 * diff
    raise ValueError(f"unknown cost {c}")


def mean_cost_rows(c: CostFunction, a: np.ndarray, b: np.ndarray) -> float:
    return float(_cost_rows(c, a, b).mean())


def cost_matrix(c: CostFunction, a, b, block: int = 256) -> np.ndarray:
    """Dense n_a x n_b cost matrix; entry (i, j) = cost(a_i, b_j).

    Computed in row blocks to bound memory; per-entry arithmetic does not
    depend on the blocking, so results are bit-identical to a single pass.
    """
    av = a.values if isinstance(a, FeatureMatrix) else np.asarray(a, dtype=float)
    bv = b.values if isinstance(b, FeatureMatrix) else np.asarray(b, dtype=float)
    if av.shape[1] != bv.shape[1]:
        raise DimensionMismatchError(
            f"feature counts differ: {av.shape[1]} vs {bv.shape[1]}"
        )
    out = np.empty((av.shape[0], bv.shape[0]))
    for start in range(0, av.shape[0], block):
        chunk = av[start : start + block]
        out[start : start + block] = _cost_rows(c, chunk[:, None, :], bv[None, :, :])
    return out


# ---------------------------------------------------------------------------
# CSV interface
# ---------------------------------------------------------------------------


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"row {row}, column {col!r}: not a number: {text!r}") from exc


def read_grouped_csv(path, source_group: str | None = None) -> GroupedDataset:
    """Load a grouped dataset from CSV.

    The first row is a header. Columns named ``label`` (0/1) and ``group``
    (exactly two distinct values) are reserved; everything else is a feature.
    The lexicographically smaller group value becomes group_a unless
    ``source_group`` overrides it.
    """
    return read_grouped_csv_indexed(path, source_group)[0]


def read_grouped_csv_indexed(path, source_group: str | None = None):
    """Like :func:`read_grouped_csv` but also returns each group's original
    data-row positions (0-based, header excluded), for black-box prediction
    files keyed by row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if GROUP_COLUMN not in header:
        raise DataError(f"{path}: missing reserved column {GROUP_COLUMN!r}")
    gcol = header.index(GROUP_COLUMN)
    lcol = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
    feat_cols = [j for j, name in enumerate(header) if j not in (gcol, lcol)]
    names = [header[j] for j in feat_cols]

    groups = sorted({r[gcol] for r in rows if r})
    if len(groups) != 2:
        raise DataError(f"{path}: column 'group' must have exactly 2 values, got {groups}")
    if source_group is not None:
        if source_group not in groups:
            raise DataError(f"{path}: source group {source_group!r} not in {groups}")
        if source_group != groups[0]:
            groups = [groups[1], groups[0]]

    mats = {g: [] for g in groups}
    labs = {g: [] for g in groups}
    positions = {g: [] for g in groups}
    for i, r in enumerate(rows):
        if not r:
            continue
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}")
        g = r[gcol]
        mats[g].append([_parse_float(r[j], i + 2, header[j]) for j in feat_cols])
        positions[g].append(i)
        if lcol is not None:
            val = r[lcol].strip()
            if val not in ("0", "1"):
                raise DataError(f"{path}: row {i + 2}: label must be 0 or 1, got {val!r}")
            labs[g].append(int(val))

    for g in groups:
        if not mats[g]:
            raise DataError(f"{path}: group {g!r} has no rows")
    fm = {g: FeatureMatrix(np.array(mats[g]), names) for g in groups}
    la = np.array(labs[groups[0]]) if lcol is not None else None
    lb = np.array(labs[groups[1]]) if lcol is not None else None
    data = GroupedDataset(fm[groups[0]], fm[groups[1]], la, lb)
    return data, np.array(positions[groups[0]]), np.array(positions[groups[1]])


def write_grouped_csv(path, data: GroupedDataset, group_names=("a", "b")) -> None:
    """Write a grouped dataset in the schema accepted by :func:`read_grouped_csv`."""
    with_labels = data.has_labels()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(data.feature_names) + [GROUP_COLUMN]
        if with_labels:
            header.append(LABEL_COLUMN)
        writer.writerow(header)
        for fm, labels, gname in (
            (data.group_a, data.labels_a, group_names[0]),
            (data.group_b, data.labels_b, group_names[1]),
        ):
            for i in range(fm.n_rows):
                row = [repr(float(v)) for v in fm.values[i]] + [gname]
                if with_labels:
                    row.append(str(int(labels[i])))
                writer.writerow(row)
