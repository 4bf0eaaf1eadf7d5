"""Split-score evaluation, update priority and softmax-weighted selection.

Scores come in two forms.  A multi-column (one-hot) group is scored as the raw
residual sum of squares in the node minus the within-child sums of squares,
with empty children contributing zero.  A single column is scored as the best
two-child variance reduction over all cuts placed at observed values: the
node-centered sum of squares minus the within-child sums, zero when no cut
separates the node.  Ties on the cut value are broken toward the smallest cut,
so only the choice among (node set, group) pairs is randomized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError

Constraint = tuple[int, bool, float]  # (column, is_greater, threshold)


@dataclass(eq=False)
class NodeRef:
    """A region of one tree plus the training rows that fall inside it."""

    tree_index: int
    depth: int
    sample_indices: np.ndarray
    constraints: tuple[Constraint, ...] = ()
    parent_round: int | None = None

    @property
    def size(self) -> int:
        return len(self.sample_indices)


@dataclass(eq=False)
class AssociatedSet:
    """Sibling nodes created by one split (or a singleton root set)."""

    nodes: tuple[NodeRef, ...]
    split_group: int | None = None

    @property
    def depth(self) -> int:
        return self.nodes[0].depth

    @property
    def tree_index(self) -> int:
        return self.nodes[0].tree_index


@dataclass(eq=False)
class ScoredCandidate:
    """One (associated set, group) pair with its summed score and penalty."""

    set: AssociatedSet
    group: int
    score: float
    penalty: float
    cut_points: tuple[float, ...] | None = None


def split_score_group(x: np.ndarray, residuals: np.ndarray, rows: np.ndarray, columns) -> float:
    """Score splitting a node on a one-hot group.

    Returns ``sum(r_i^2)`` over the node minus the within-child centered sums
    of squares, children being the rows with each group column positive.
    Empty children contribute zero.
    """
    rows = np.asarray(rows)
    r = residuals[rows]
    score = float(r @ r)
    for j in columns:
        sub = r[x[rows, j] > 0]
        if sub.size:
            score -= float(np.sum((sub - sub.mean()) ** 2))
    return score


def split_score_single(
    feature_values: np.ndarray, residuals: np.ndarray, rows: np.ndarray
) -> tuple[float, float]:
    """Best two-child variance reduction over cuts at observed values.

    Children are ``{value > c}`` and ``{value <= c}``.  Returns the maximum
    node-centered reduction and the smallest maximizing cut; when every value
    in the node is identical the score is zero and the cut is that value.
    """
    rows = np.asarray(rows)
    v = np.asarray(feature_values, dtype=float)[rows]
    r = residuals[rows]
    n = len(rows)
    order = np.argsort(v, kind="stable")
    sv = v[order]
    if n < 2 or sv[0] == sv[-1]:
        return 0.0, float(sv[0])
    sr = r[order]
    csum = np.cumsum(sr)
    total = csum[-1]
    left_n = np.arange(1, n, dtype=float)
    left_s = csum[:-1]
    scores = left_s**2 / left_n + (total - left_s) ** 2 / (n - left_n) - total**2 / n
    scores[sv[:-1] == sv[1:]] = -np.inf
    t = int(np.argmax(scores))
    return max(float(scores[t]), 0.0), float(sv[t])


def penalty(update_list: Sequence[AssociatedSet], candidate: AssociatedSet) -> float:
    """Update-priority penalty: roots first, then depth-one sets, then the rest."""
    depths = [s.depth for s in update_list]
    if 0 in depths and candidate.depth > 0:
        return math.inf
    if 1 in depths and candidate.depth > 1:
        return math.inf
    return 0.0


def priority_penalties(depths: np.ndarray) -> np.ndarray:
    """Vectorized :func:`penalty` over candidate set depths."""
    depths = np.asarray(depths)
    out = np.zeros(depths.shape, dtype=float)
    if (depths == 0).any():
        out[depths > 0] = math.inf
    elif (depths == 1).any():
        out[depths > 1] = math.inf
    return out


def selection_probabilities(
    scores: np.ndarray, penalties: np.ndarray, alpha: float
) -> np.ndarray:
    """Probability of choosing each candidate under the softmax update rule.

    With ``alpha = inf`` the mass is uniform over the maximizers of the
    penalized score; otherwise it is ``softmax(alpha * penalized score)`` with
    infinitely penalized candidates receiving exactly zero.
    """
    scores = np.asarray(scores, dtype=float)
    penalized = scores - np.asarray(penalties, dtype=float)
    finite = np.isfinite(penalized)
    if not finite.any():
        raise ArgumentError("every candidate carries an infinite penalty")
    probs = np.zeros(len(scores))
    if math.isinf(alpha):
        best = penalized[finite].max()
        ties = finite & (penalized == best)
        probs[ties] = 1.0 / ties.sum()
    else:
        z = alpha * penalized[finite]
        z -= z.max()
        ez = np.exp(z)
        probs[finite] = ez / ez.sum()
    return probs


def select_update(
    scores: np.ndarray, penalties: np.ndarray, alpha: float, rng: np.random.Generator
) -> int:
    """Pick a candidate index by penalized argmax (``alpha = inf``) or softmax."""
    scores = np.asarray(scores, dtype=float)
    penalized = scores - np.asarray(penalties, dtype=float)
    finite = np.isfinite(penalized)
    if not finite.any():
        raise ArgumentError("every candidate carries an infinite penalty")
    if math.isinf(alpha):
        best = penalized[finite].max()
        ties = np.flatnonzero(finite & (penalized == best))
        return int(ties[rng.integers(len(ties))])
    probs = selection_probabilities(scores, penalties, alpha)
    return int(rng.choice(len(scores), p=probs))


def score_candidates(
    x: np.ndarray,
    residuals: np.ndarray,
    update_list: Sequence[AssociatedSet],
    group_columns: Sequence[Sequence[int]],
) -> list[ScoredCandidate]:
    """Score every (set, group) pair in an update list.

    ``group_columns[m]`` lists the encoded columns of group ``m``.  This is the
    plain reference evaluator; training uses an incremental equivalent.
    """
    out = []
    for s in update_list:
        pen = penalty(update_list, s)
        for m, cols in enumerate(group_columns):
            total = 0.0
            cuts = []
            for node in s.nodes:
                if len(cols) > 1:
                    total += split_score_group(x, residuals, node.sample_indices, cols)
                else:
                    sc, cut = split_score_single(x[:, cols[0]], residuals, node.sample_indices)
                    total += sc
                    cuts.append(cut)
            out.append(
                ScoredCandidate(s, m, total, pen, tuple(cuts) if cuts else None)
            )
    return out
