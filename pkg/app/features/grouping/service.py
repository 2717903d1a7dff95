"""Weak-strong user grouping by maximum total planar distance."""

import itertools
import logging
from collections import Counter
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.common.errors import ConfigurationError
from app.common.reports import Report, Violation, build_report
from app.features.geometry.schemas import UserTerminal

from .schemas import GroupAssignment, WeightMatrix

logger = logging.getLogger(__name__)


def build_weight_matrix(weak: Sequence[UserTerminal], strong: Sequence[UserTerminal]) -> WeightMatrix:
    """w[j][i] = √((x_i - x_j)² + (y_i - y_j)²); heights are ignored."""
    if not weak or not strong:
        raise ConfigurationError("both user classes must be non-empty to build weights")
    w_xy = np.array([[u.position.x, u.position.y] for u in weak])
    s_xy = np.array([[u.position.x, u.position.y] for u in strong])
    weights = np.linalg.norm(s_xy[:, None, :] - w_xy[None, :, :], axis=2)
    coordinates = {u.id: (u.position.x, u.position.y) for u in list(weak) + list(strong)}
    return WeightMatrix(
        weights=weights,
        strong_ids=[u.id for u in strong],
        weak_ids=[u.id for u in weak],
        coordinates=coordinates,
    )


def _check_square(W: WeightMatrix) -> np.ndarray:
    weights = np.asarray(W.weights, dtype=float)
    if weights.size == 0:
        raise ConfigurationError("cannot match empty classes")
    if weights.shape[0] != weights.shape[1]:
        raise ConfigurationError(
            f"matching needs equal class sizes, got {weights.shape[0]} strong and {weights.shape[1]} weak",
        )
    return weights


def _best_total(weights: np.ndarray) -> float:
    if weights.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def _assignment(W: WeightMatrix, columns: Sequence[int]) -> GroupAssignment:
    pairs = [(W.weak_ids[c], W.strong_ids[r]) for r, c in enumerate(columns)]
    weights = [float(W.weights[r, c]) for r, c in enumerate(columns)]
    return GroupAssignment(pairs=pairs, weights=weights)


def optimal_matching(W: WeightMatrix) -> GroupAssignment:
    """Max-weight perfect matching of strong rows to weak columns.

    Among optimal matchings, strong rows are fixed in order to the smallest
    weak column that still admits an optimal completion. Each row takes one
    solve in which its weights shrink by eps·rank of the column, eps small
    enough that the summed shrinkage stays below the tie tolerance.
    """
    weights = _check_square(W)
    n = weights.shape[0]
    optimum = _best_total(weights)
    eps = 1e-9 * max(1.0, abs(optimum)) / n**2

    columns: List[int] = []
    free = list(range(n))
    for r in range(n):
        sub = weights[np.ix_(list(range(r, n)), free)]
        sub[0] -= eps * np.arange(len(free))
        _, cols = linear_sum_assignment(sub, maximize=True)
        columns.append(free.pop(int(cols[0])))
    logger.debug(f"Matched {n} groups, total weight {optimum:.6g}")
    return _assignment(W, columns)


def brute_force_matching(W: WeightMatrix) -> GroupAssignment:
    """Exhaustive search over all column permutations (reference for small n)."""
    weights = _check_square(W)
    n = weights.shape[0]
    best_total, best_perm = -np.inf, tuple(range(n))
    # Permutations come in lexicographic order, so only a strict improvement
    # replaces the incumbent.
    for perm in itertools.permutations(range(n)):
        total = float(weights[np.arange(n), list(perm)].sum())
        if total > best_total + 1e-9 * max(1.0, abs(total)):
            best_total, best_perm = total, perm
    return _assignment(W, best_perm)


def verify_unique(a: GroupAssignment, weak_ids: Sequence[int], strong_ids: Sequence[int]) -> Report:
    """Check the pairing is a bijection between the weak and strong sets."""
    violations = []
    weak_seen = Counter(i for i, _ in a.pairs)
    strong_seen = Counter(j for _, j in a.pairs)

    for uid, n in sorted(weak_seen.items()):
        if n > 1:
            violations.append(Violation(rule="duplicate_weak", message=f"weak user {uid} appears {n} times", location={"user": uid}))
    for uid, n in sorted(strong_seen.items()):
        if n > 1:
            violations.append(Violation(rule="duplicate_strong", message=f"strong user {uid} appears {n} times", location={"user": uid}))
    for uid in sorted(set(weak_ids) - set(weak_seen)):
        violations.append(Violation(rule="unpaired_weak", message=f"weak user {uid} is not paired", location={"user": uid}))
    for uid in sorted(set(strong_ids) - set(strong_seen)):
        violations.append(Violation(rule="unpaired_strong", message=f"strong user {uid} is not paired", location={"user": uid}))
    for uid in sorted(set(weak_seen) - set(weak_ids)):
        violations.append(Violation(rule="unknown_weak", message=f"user {uid} is not in the weak class", location={"user": uid}))
    for uid in sorted(set(strong_seen) - set(strong_ids)):
        violations.append(Violation(rule="unknown_strong", message=f"user {uid} is not in the strong class", location={"user": uid}))
    if set(weak_seen) & set(strong_seen):
        shared = sorted(set(weak_seen) & set(strong_seen))
        violations.append(Violation(rule="overlap", message=f"users {shared} are in two groups", location={"users": shared}))

    coverage = len(set(weak_seen) | set(strong_seen))
    return build_report(violations, data={"coverage": coverage}, subject="uniqueness")


def assignment_rows(a: GroupAssignment) -> List[Tuple[int, int, int, float]]:
    """(group, weak_id, strong_id, weight) rows for export."""
    weights = a.weights or [float("nan")] * len(a.pairs)
    return [(g, i, j, w) for g, ((i, j), w) in enumerate(zip(a.pairs, weights))]
