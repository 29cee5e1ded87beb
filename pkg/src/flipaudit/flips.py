"""Flipsets, parity workflows and transparency reports.

A flipset partitions the source rows by whether a classifier's decision
changes when the row is replaced with its counterpart under a transport map:
the positive side holds rows classified 1 whose counterpart gets 0, the
negative side the reverse. Transparency reports summarize which features
moved, and how consistently, for one flipset side.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .data import FeatureMatrix, GroupedDataset
from .errors import (
    EmptyFlipsetError,
    EmptyStratumError,
    MissingLabelsError,
    ShapeMismatchError,
)
from .exact import ExactMap
from .gan import Generator, map_points


class Classifier(Protocol):
    """Binary classifier over rows of a feature matrix."""

    def predict(self, values: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class Flipset:
    """Indices of source rows whose classification flips under the map."""

    positive: np.ndarray
    negative: np.ndarray
    n_source: int
    counterpart_rows: FeatureMatrix

    @property
    def n_positive(self) -> int:
        return len(self.positive)

    @property
    def n_negative(self) -> int:
        return len(self.negative)

    def side(self, name: str) -> np.ndarray:
        return {"positive": self.positive, "negative": self.negative}[name]


@dataclass(frozen=True, eq=False)
class TransparencyReport:
    """Mean feature change and mean change direction over one flipset side."""

    feature_names: tuple
    mean_diff: np.ndarray
    mean_sign: np.ndarray
    ranking_by_diff: tuple
    ranking_by_sign: tuple


@dataclass(frozen=True)
class ParityCheck:
    """Positive-decision counts per group and flipset sizes for one audit."""

    positives_a: int
    positives_b: int
    flip_pos: int
    flip_neg: int
    net: int


@dataclass(frozen=True, eq=False)
class AuditBundle:
    parity: ParityCheck
    flipset: Flipset
    report_pos: TransparencyReport | None
    report_neg: TransparencyReport | None


def map_source(transport, data: GroupedDataset) -> FeatureMatrix:
    """Counterpart rows for every source row, for either kind of map."""
    if isinstance(transport, ExactMap):
        if transport.n != data.group_a.n_rows:
            raise ShapeMismatchError(
                f"assignment covers {transport.n} rows, source has {data.group_a.n_rows}"
            )
        return transport.counterparts(data.group_b)
    if isinstance(transport, Generator):
        return map_points(transport, data.group_a)
    raise TypeError(f"unsupported transport map type: {type(transport).__name__}")


def compute_flipset(h: Classifier, source: FeatureMatrix, mapped: FeatureMatrix) -> Flipset:
    """Partition source rows by decision change between them and their counterparts."""
    if source.values.shape != mapped.values.shape:
        raise ShapeMismatchError(
            f"source {source.values.shape} vs mapped {mapped.values.shape}"
        )
    h_src = np.asarray(h.predict(source.values))
    h_map = np.asarray(h.predict(mapped.values))
    return Flipset(
        positive=np.nonzero(h_src > h_map)[0],
        negative=np.nonzero(h_src < h_map)[0],
        n_source=source.n_rows,
        counterpart_rows=mapped,
    )


def transparency_report(
    flipset_side, source: FeatureMatrix, mapped: FeatureMatrix, exclude=()
) -> TransparencyReport:
    """Per-feature mean of (x - G(x)) and of sign(x - G(x)) over one side.

    ``exclude`` drops features from the rankings only (their vector entries
    remain); rank ties are broken by original feature order.
    """
    idx = np.asarray(flipset_side, dtype=int)
    if idx.size == 0:
        raise EmptyFlipsetError("transparency report is undefined on an empty flipset side")
    diffs = source.values[idx] - mapped.values[idx]
    mean_diff = diffs.mean(axis=0)
    mean_sign = np.sign(diffs).mean(axis=0)

    def ranking(vector):
        order = np.argsort(-np.abs(vector), kind="stable")
        return tuple(
            source.feature_names[j] for j in order if source.feature_names[j] not in exclude
        )

    return TransparencyReport(
        source.feature_names, mean_diff, mean_sign, ranking(mean_diff), ranking(mean_sign)
    )


def _reports(flipset: Flipset, source: FeatureMatrix, exclude=()):
    out = []
    for side in (flipset.positive, flipset.negative):
        if side.size:
            out.append(transparency_report(side, source, flipset.counterpart_rows, exclude))
        else:
            out.append(None)
    return out


def demographic_parity_audit(
    data: GroupedDataset, h: Classifier, transport, exclude=()
) -> AuditBundle:
    """Flipset, parity counts, and transparency reports for one map."""
    mapped = map_source(transport, data)
    flipset = compute_flipset(h, data.group_a, mapped)
    positives_a = int(np.asarray(h.predict(data.group_a.values)).sum())
    positives_b = int(np.asarray(h.predict(data.group_b.values)).sum())
    report_pos, report_neg = _reports(flipset, data.group_a, exclude)
    parity = ParityCheck(
        positives_a,
        positives_b,
        flipset.n_positive,
        flipset.n_negative,
        flipset.n_positive - flipset.n_negative,
    )
    return AuditBundle(parity, flipset, report_pos, report_neg)


def audit_exact_from_labels(
    data: GroupedDataset, transport: ExactMap, labels_a, labels_b, exclude=()
) -> AuditBundle:
    """Parity audit from precomputed black-box decisions on both groups.

    Works for exact maps only: under a bijection the counterpart decisions
    are the target-group decisions reordered, so no new points ever have to
    be classified.
    """
    labels_a = np.asarray(labels_a, dtype=int)
    labels_b = np.asarray(labels_b, dtype=int)
    if labels_a.shape != (data.group_a.n_rows,) or labels_b.shape != (data.group_b.n_rows,):
        raise ShapeMismatchError("decision vectors must match the group row counts")
    mapped = transport.counterparts(data.group_b)
    h_map = labels_b[transport.assignment]
    flipset = Flipset(
        positive=np.nonzero(labels_a > h_map)[0],
        negative=np.nonzero(labels_a < h_map)[0],
        n_source=data.group_a.n_rows,
        counterpart_rows=mapped,
    )
    report_pos, report_neg = _reports(flipset, data.group_a, exclude)
    parity = ParityCheck(
        int(labels_a.sum()),
        int(labels_b.sum()),
        flipset.n_positive,
        flipset.n_negative,
        flipset.n_positive - flipset.n_negative,
    )
    return AuditBundle(parity, flipset, report_pos, report_neg)


def label_stratum(data: GroupedDataset, label: int) -> GroupedDataset:
    """Rows of both groups with true label ``label``, original order kept."""
    if not data.has_labels():
        raise MissingLabelsError("equalized-odds auditing requires labels on both groups")
    keep_a = np.nonzero(data.labels_a == label)[0]
    keep_b = np.nonzero(data.labels_b == label)[0]
    if keep_a.size == 0:
        raise EmptyStratumError(label, "a")
    if keep_b.size == 0:
        raise EmptyStratumError(label, "b")
    return GroupedDataset(data.group_a.take(keep_a), data.group_b.take(keep_b))


def equalized_odds_audit(
    data: GroupedDataset, h: Classifier, map_pos, map_neg, exclude=()
) -> dict:
    """Run the parity audit separately on the y=1 and y=0 strata.

    ``map_pos`` must have been built on the label-1 subsets and ``map_neg``
    on the label-0 subsets (same stratum extraction as here).
    """
    return {
        1: demographic_parity_audit(label_stratum(data, 1), h, map_pos, exclude),
        0: demographic_parity_audit(label_stratum(data, 0), h, map_neg, exclude),
    }


@dataclass(frozen=True)
class ReverseCheck:
    """Flipset sizes for a forward map and its reverse-direction companion."""

    fwd_pos: int
    fwd_neg: int
    rev_pos: int
    rev_neg: int


def reverse_consistency(data: GroupedDataset, h: Classifier, map_fwd, map_rev) -> ReverseCheck:
    """Flipset sizes in both directions; for mutually inverse maps
    fwd_pos == rev_neg and fwd_neg == rev_pos exactly."""
    fwd = compute_flipset(h, data.group_a, map_source(map_fwd, data))
    rev_data = data.swapped()
    rev = compute_flipset(h, rev_data.group_a, map_source(map_rev, rev_data))
    return ReverseCheck(fwd.n_positive, fwd.n_negative, rev.n_positive, rev.n_negative)


def marginal_histograms(
    source: FeatureMatrix, flip_indices, bins: int = 20
) -> list[dict]:
    """Per-feature binned counts for the population and one flipset side.

    Bins are equal-width over the pooled (population) range of each feature.
    Returns one record per (feature, bin): feature, bin_left, bin_right,
    count_population, count_flipset.
    """
    idx = np.asarray(flip_indices, dtype=int)
    records = []
    for j, name in enumerate(source.feature_names):
        col = source.values[:, j]
        lo, hi = float(col.min()), float(col.max())
        if lo == hi:
            hi = lo + 1.0  # degenerate range: single bin of width 1
        edges = np.linspace(lo, hi, bins + 1)
        pop, _ = np.histogram(col, bins=edges)
        flip, _ = np.histogram(col[idx], bins=edges)
        for k in range(bins):
            records.append(
                {
                    "feature": name,
                    "bin_left": float(edges[k]),
                    "bin_right": float(edges[k + 1]),
                    "count_population": int(pop[k]),
                    "count_flipset": int(flip[k]),
                }
            )
    return records
