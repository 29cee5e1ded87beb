"""Exact optimal transport between equal-size samples.

The map is a minimum-mean-cost bijection between the rows of the two groups,
solved as a linear assignment problem. A factorial-time enumerator with a
canonical tie-break is provided as a test oracle.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import CostFunction, FeatureMatrix, GroupedDataset, _cost_rows, cost_matrix
from .errors import EmptyDatasetError, KTooLargeError, TooLargeError, UnequalSizesError

BRUTE_FORCE_LIMIT = 9


@dataclass(frozen=True, eq=False)
class ExactMap:
    """A bijection i -> assignment[i] from group_a rows onto group_b rows."""

    assignment: np.ndarray
    total_cost: float
    mean_cost: float

    def __post_init__(self):
        arr = np.array(self.assignment, dtype=int)
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)
        n = len(arr)
        if n == 0 or not np.array_equal(np.sort(arr), np.arange(n)):
            raise ValueError("assignment must be a permutation of 0..n-1")

    @property
    def n(self) -> int:
        return len(self.assignment)

    def counterparts(self, target: FeatureMatrix) -> FeatureMatrix:
        """Rows of the target group, aligned with the source rows."""
        return target.take(self.assignment)

    def inverse(self) -> "ExactMap":
        inv = np.empty(self.n, dtype=int)
        inv[self.assignment] = np.arange(self.n)
        return ExactMap(inv, self.total_cost, self.mean_cost)


def _check_sizes(data: GroupedDataset) -> int:
    n_a, n_b = data.group_a.n_rows, data.group_b.n_rows
    if n_a != n_b:
        raise UnequalSizesError(n_a, n_b)
    if n_a == 0:
        raise EmptyDatasetError("cannot solve transport on an empty group")
    return n_a


def _finish(data: GroupedDataset, c: CostFunction, assignment: np.ndarray) -> ExactMap:
    pair_costs = _cost_rows(c, data.group_a.values, data.group_b.values[assignment])
    total = float(pair_costs.sum())
    return ExactMap(assignment, total, total / len(assignment))


def solve_exact(data: GroupedDataset, c: CostFunction = CostFunction.SQUARED_L1) -> ExactMap:
    """Minimum-cost bijection between group_a and group_b rows.

    For a single feature all supported costs are convex in the coordinate
    difference, so the sorted (monotone) matching is optimal and the dense
    solver is skipped; higher dimensions use the assignment solver on the
    full cost matrix.
    """
    n = _check_sizes(data)
    if data.n_features == 1:
        order_a = np.argsort(data.group_a.values[:, 0], kind="stable")
        order_b = np.argsort(data.group_b.values[:, 0], kind="stable")
        assignment = np.empty(n, dtype=int)
        assignment[order_a] = order_b
        return _finish(data, c, assignment)
    matrix = cost_matrix(c, data.group_a, data.group_b)
    rows, cols = linear_sum_assignment(matrix)
    assignment = np.empty(n, dtype=int)
    assignment[rows] = cols
    return _finish(data, c, assignment)


def brute_force_exact(data: GroupedDataset, c: CostFunction = CostFunction.SQUARED_L1) -> ExactMap:
    """Exhaustive minimum over all n! bijections; test oracle.

    Ties are broken by the lexicographically smallest assignment, which is the
    first optimum encountered when permutations are enumerated in
    lexicographic order.
    """
    n = _check_sizes(data)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLargeError(n, BRUTE_FORCE_LIMIT)
    matrix = cost_matrix(c, data.group_a, data.group_b)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int)
    totals = matrix[np.arange(n), perms].sum(axis=1)
    best = int(np.argmin(totals))  # first minimum = lexicographically smallest
    return _finish(data, c, perms[best])


def subsample(data: FeatureMatrix, k: int, seed: int) -> FeatureMatrix:
    """k rows drawn uniformly without replacement; deterministic per seed."""
    if k > data.n_rows:
        raise KTooLargeError(f"k={k} exceeds available rows {data.n_rows}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(data.n_rows, size=k, replace=False)
    return FeatureMatrix(data.values[idx], data.feature_names)
