"""Evaluation protocol: three-way splits, random-search tuning, R², win rates.

Tuning samples hyperparameter sets uniformly from discrete value sets, trains
on the training split, scores R² on the validation split, and returns the
first-seen argmax; callers then refit on train plus validation and score the
test split.  Adjusted win rates min-max normalize per-dataset R² across
methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import build_schema, encode, encode_features
from .errors import ArgumentError, MetricError
from .forest import EnsembleModel, Hyperparams, grow_ensemble, predict_ensemble

# Default tuning value sets (bagging count deliberately small values allowed
# by overriding; see TuneBudget).
DEFAULT_SEARCH_SPACE: dict[str, tuple] = {
    "n_estimators": (100,),
    "n_trees": (6, 7, 8, 9, 10, 11, 12),
    "alpha": (0.001, 1.0, 10.0, 100.0, 10000.0, math.inf),
    "min_samples_split": (5, 10, 15, 20, 30),
    "min_samples_leaf": (0, 5, 10, 15, 20, 30),
    "n_bins": (5, 7, 10, 15, 20, 40),
    "random_update": (0.0, 0.0001, 0.001, 0.01, 0.1, 1.0),
    "max_depth": (3, 5, 10, 20, 30, math.inf),
}


@dataclass(frozen=True)
class TuneBudget:
    """Random-search budget: round count, value sets, base seed."""

    rounds: int
    search_space: dict[str, tuple] = field(default_factory=lambda: dict(DEFAULT_SEARCH_SPACE))
    seed: int = 42

    def __post_init__(self):
        if self.rounds < 1:
            raise ArgumentError("tuning budget must allow at least one round")
        unknown = set(self.search_space) - set(DEFAULT_SEARCH_SPACE)
        if unknown:
            raise ArgumentError(f"unknown hyperparameters in search space: {sorted(unknown)}")


def split_48_32_20(n: int, rng: np.random.Generator):
    """Random disjoint 48%/32%/20% partition with largest-remainder rounding."""
    if n < 10:
        raise ArgumentError("need at least 10 samples for a 48/32/20 split")
    fractions = (0.48, 0.32, 0.20)
    raw = [f * n for f in fractions]
    sizes = [int(math.floor(v)) for v in raw]
    remainders = [v - s for v, s in zip(raw, sizes)]
    for _ in range(n - sum(sizes)):
        i = int(np.argmax(remainders))
        sizes[i] += 1
        remainders[i] = -1.0
    perm = rng.permutation(n)
    train = perm[: sizes[0]]
    valid = perm[sizes[0] : sizes[0] + sizes[1]]
    test = perm[sizes[0] + sizes[1] :]
    return train, valid, test


def r2(predictions, truth) -> float:
    """Goodness of fit: one minus SSE over the centered sum of squares."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or len(p) < 2:
        raise ArgumentError("predictions and truth must be equal-length vectors (>= 2)")
    sst = float(np.sum((t - t.mean()) ** 2))
    if sst <= 0:
        raise MetricError("truth has zero variance; R² is undefined")
    return 1.0 - float(np.sum((t - p) ** 2)) / sst


def adjusted_win_rates(scores) -> np.ndarray:
    """Min-max normalized scores; all-equal inputs map to 0.5 each."""
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or len(s) < 2:
        raise ArgumentError("need scores for at least two methods")
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.full(len(s), 0.5)
    return (s - lo) / (hi - lo)


def sample_hyperparams(space: dict[str, tuple], rng: np.random.Generator, seed: int) -> Hyperparams:
    """Draw one hyperparameter set uniformly from each value set."""
    chosen = {}
    for name, values in space.items():
        chosen[name] = values[int(rng.integers(len(values)))]
    md = chosen.get("max_depth", math.inf)
    chosen["max_depth"] = math.inf if math.isinf(md) else int(md)
    return Hyperparams(seed=seed, **chosen)


def subset_table(table: dict[str, np.ndarray], idx: np.ndarray) -> dict[str, np.ndarray]:
    """Row-subset every column of a raw table."""
    return {k: v[idx] for k, v in table.items()}


def fit_on(table, roles, hp: Hyperparams, idx, threads: int = 1):
    """Build schema and encoding on the given rows, then train an ensemble."""
    sub = subset_table(table, idx)
    schema = build_schema(sub, roles, hp.n_bins)
    dataset = encode(sub, schema)
    ensemble = grow_ensemble(dataset, schema, hp, threads=threads)
    return ensemble, schema


def score_on(ensemble: EnsembleModel, table, roles, idx) -> float:
    """R² of ensemble predictions on the given rows."""
    sub = subset_table(table, idx)
    response = ensemble.schema.response
    truth = np.asarray(sub[response], dtype=float)
    features = {k: v for k, v in sub.items() if k != response}
    x = encode_features(features, ensemble.schema)
    return r2(predict_ensemble(ensemble, x), truth)


def random_search_tune(
    table,
    roles,
    train_idx,
    valid_idx,
    budget: TuneBudget,
    threads: int = 1,
):
    """Sample, train on the training rows, score on validation, keep the argmax.

    Returns ``(best_hyperparams, trace)`` where the trace holds one
    ``(round, hyperparams, validation_r2)`` triple per round; the first-seen
    maximum wins ties.  Callers refit on train plus validation afterwards.
    """
    rng = np.random.default_rng(budget.seed)
    best_hp = None
    best_score = -math.inf
    trace = []
    for b in range(budget.rounds):
        member_seed = int(np.random.SeedSequence(entropy=budget.seed, spawn_key=(b,)).generate_state(1)[0])
        hp = sample_hyperparams(budget.search_space, rng, seed=member_seed)
        ensemble, _ = fit_on(table, roles, hp, train_idx, threads=threads)
        score = score_on(ensemble, table, roles, valid_idx)
        trace.append((b, hp, score))
        if score > best_score:
            best_score = score
            best_hp = hp
    return best_hp, trace


def tuned_test_r2(
    table,
    roles,
    budget: TuneBudget,
    rng: np.random.Generator,
    threads: int = 1,
) -> float:
    """Full evaluation pass: split, tune, refit on train+validation, test R²."""
    n = len(next(iter(table.values())))
    train, valid, test = split_48_32_20(n, rng)
    best_hp, _ = random_search_tune(table, roles, train, valid, budget, threads=threads)
    refit_idx = np.concatenate([train, valid])
    ensemble, _ = fit_on(table, roles, best_hp, refit_idx, threads=threads)
    return score_on(ensemble, table, roles, test)
