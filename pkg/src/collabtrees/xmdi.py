"""Extended mean-decrease-in-impurity: additive and interaction attribution.

Each completed update round carries an impurity drop and a split group.  The
drop is attributed to the unordered pair of the split group and the round's
inherited group: a root round attributes to the group itself (diagonal), a
round splitting the same group as its parent inherits the parent's
attribution, and a round splitting a different group pairs the two.  Dividing
by the training size and summing per cell yields a symmetric nonnegative
matrix in units of response variance; row sums give overall importances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .forest import CollabTreesModel, EnsembleModel, SplitRound

__all__ = [
    "XmdiMatrix",
    "attribute_round",
    "compute_xmdi",
    "overall_importance",
    "ensemble_xmdi",
    "attributed_total",
    "write_importance_csv",
    "read_importance_csv",
]


@dataclass(eq=False)
class XmdiMatrix:
    """Symmetric matrix of attributed per-sample impurity drops."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError("importance matrix must be square")

    @property
    def n_groups(self) -> int:
        return self.values.shape[0]


def attribute_round(rnd: SplitRound, rounds: Sequence[SplitRound]) -> tuple[int, int]:
    """Resolve one round's attribution pair (sorted group indices).

    Walks parent rounds while the split group repeats, so a run of
    same-group splits inherits the attribution of the earliest one.
    """
    cur = rnd
    while True:
        e = cur.parent_round
        if e is None:
            u = cur.group
            break
        if not (1 <= e < cur.index) or rounds[e - 1].index != e:
            raise DataError(f"split log round {cur.index} references missing round {e}")
        parent = rounds[e - 1]
        if cur.group != parent.group:
            u = parent.group
            break
        cur = parent
    return (min(rnd.group, u), max(rnd.group, u))


def compute_xmdi(model: CollabTreesModel, n: int | None = None) -> XmdiMatrix:
    """Attribute every logged drop, divided by the training size."""
    if n is None:
        n = model.n_train
    m_groups = model.schema.n_groups
    values = np.zeros((m_groups, m_groups))
    for rnd in model.rounds:
        l, k = attribute_round(rnd, model.rounds)
        v = rnd.drop / n
        values[l, k] += v
        if l != k:
            values[k, l] += v
    return XmdiMatrix(values)


def overall_importance(matrix: XmdiMatrix) -> np.ndarray:
    """Overall importance per group: row sum including the diagonal."""
    return matrix.values.sum(axis=1)


def ensemble_xmdi(ensemble: EnsembleModel) -> XmdiMatrix:
    """Element-wise mean of the member matrices."""
    acc = np.zeros((ensemble.schema.n_groups,) * 2)
    for model in ensemble.models:
        acc += compute_xmdi(model).values
    return XmdiMatrix(acc / len(ensemble.models))


def attributed_total(matrix: XmdiMatrix) -> float:
    """Sum over unique cells: diagonal plus the upper off-diagonal once.

    Equals the total per-sample impurity drop of the model's training sample.
    """
    v = matrix.values
    return float(np.trace(v) + np.triu(v, k=1).sum())


def write_importance_csv(
    matrix: XmdiMatrix, labels: Sequence[str], pairs_path, overall_path
) -> None:
    """Write the upper-triangle pair report and the overall-importance report."""
    if len(labels) != matrix.n_groups:
        raise DataError("label count does not match the matrix size")
    with open(pairs_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group_i", "group_j", "xmdi"])
        for i in range(matrix.n_groups):
            for j in range(i, matrix.n_groups):
                w.writerow([labels[i], labels[j], f"{matrix.values[i, j]:.10g}"])
    overall = overall_importance(matrix)
    with open(overall_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "xmdi_overall"])
        for i in range(matrix.n_groups):
            w.writerow([labels[i], f"{overall[i]:.10g}"])


def read_importance_csv(pairs_path) -> tuple[list[str], XmdiMatrix]:
    """Rebuild labels and the symmetric matrix from a pair report."""
    with open(pairs_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["group_i", "group_j", "xmdi"]:
            raise DataError(f"{pairs_path}: not an importance pair report")
        rows = [(a, b, float(v)) for a, b, v in reader]
    labels: list[str] = []
    for a, b, _ in rows:
        for name in (a, b):
            if name not in labels:
                labels.append(name)
    index = {name: i for i, name in enumerate(labels)}
    values = np.zeros((len(labels), len(labels)))
    for a, b, v in rows:
        i, j = index[a], index[b]
        values[i, j] = v
        values[j, i] = v
    return labels, XmdiMatrix(values)
