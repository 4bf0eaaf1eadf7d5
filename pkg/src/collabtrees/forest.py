"""Growing K collaborative trees: scheduling, node validity, bagging, prediction.

Training keeps a list of associated-node sets awaiting update.  Every round
scores each candidate (set, group) pair, picks one by penalized argmax or
softmax sampling, splits the chosen set's nodes on the chosen group, and adds
within-child residual means to the owning tree.  Root sets go first, then
depth-one sets; after the first ``2K`` completed updates only a random subset
of the list is scored.

Scores depend on residuals only through the rows inside a set, so each set's
score vector is cached and recomputed lazily when an update touches its rows.
Single-column sort orders are carried from parent to child by stable
filtering, which keeps full-update training tractable at ``n`` in the tens of
thousands.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EncodedDataset, FeatureSchema
from .errors import ConfigError, DataError, SchemaError
from .splitter import Constraint, NodeRef, priority_penalties

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _scan_single_columns(order, boundary, r, values_t):
    """Best centered two-child reduction per column of one node.

    ``order`` holds per-column row ids sorted by value, ``boundary`` marks
    positions where consecutive sorted values differ, ``values_t`` is the
    (column, n) value matrix for cut retrieval.  Returns per-column scores and
    cut values; columns with no boundary score zero.
    """
    n_cols, nn = order.shape
    scores = np.zeros(n_cols)
    cuts = np.empty(n_cols)
    buf = np.empty(nn)
    inv_nn = 1.0 / nn
    for s in range(n_cols):
        tot = 0.0
        for t in range(nn):
            v = r[order[s, t]]
            buf[t] = v
            tot += v
        best = -np.inf
        best_t = -1
        left = 0.0
        base = tot * tot * inv_nn
        for t in range(nn - 1):
            left += buf[t]
            if boundary[s, t]:
                ln = t + 1.0
                rn = nn - ln
                right = tot - left
                sc = left * left / ln + right * right / rn - base
                if sc > best:
                    best = sc
                    best_t = t
        if best_t < 0:
            scores[s] = 0.0
            cuts[s] = values_t[s, order[s, 0]]
        else:
            scores[s] = best if best > 0.0 else 0.0
            cuts[s] = values_t[s, order[s, best_t]]
    return scores, cuts


def _scan_single_columns_numpy(order, boundary, r, values_t):
    """Vectorized equivalent of :func:`_scan_single_columns`."""
    n_cols, nn = order.shape
    rows = np.arange(n_cols)
    csum = np.cumsum(r[order], axis=1)
    tot = csum[:, -1:]
    left = csum[:, :-1]
    ln = np.arange(1, nn, dtype=float)
    sc = left**2 / ln + (tot - left) ** 2 / (nn - ln) - tot**2 / nn
    sc[~boundary] = -np.inf
    has_cut = boundary.any(axis=1)
    t = np.argmax(sc, axis=1)
    val = sc[rows, t]
    cut = np.where(
        has_cut,
        values_t[rows, order[rows, t]],
        values_t[rows, order[:, 0]],
    )
    return np.where(has_cut, np.maximum(val, 0.0), 0.0), cut


_single_column_scan = _scan_single_columns if _HAVE_NUMBA else _scan_single_columns_numpy

__all__ = [
    "Hyperparams",
    "SplitRound",
    "CollabTreesModel",
    "EnsembleModel",
    "node_valid_for_split",
    "children_valid_for_update",
    "grow",
    "grow_ensemble",
    "predict_model",
    "predict_ensemble",
]


@dataclass(frozen=True)
class Hyperparams:
    """Training hyperparameters; value sets for tuning live in ``bench``.

    ``n_bins`` is consumed by the encoding pipeline (schema construction),
    not by ``grow`` itself, and rides along here so tuning can search it."""

    n_estimators: int = 100
    n_trees: int = 10
    alpha: float = math.inf
    min_samples_split: int = 5
    min_samples_leaf: int = 0
    n_bins: int | None = None
    random_update: float = 1.0
    max_depth: float = math.inf
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be at least 1")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        if not (self.alpha >= 0):
            raise ConfigError("alpha must be nonnegative (or inf)")
        if self.min_samples_split < 0 or self.min_samples_leaf < 0:
            raise ConfigError("min_samples_* must be nonnegative")
        if self.n_bins is not None and self.n_bins < 2:
            raise ConfigError("n_bins must be at least 2 when provided")
        if not (0.0 <= self.random_update <= 1.0):
            raise ConfigError("random_update must lie in [0, 1]")
        if not (self.max_depth >= 1):
            raise ConfigError("max_depth must be positive")


@dataclass(frozen=True)
class SplitRound:
    """One completed update: round index, tree, split group, parent round, drop."""

    index: int
    tree: int
    group: int
    parent_round: int | None
    drop: float
    n_nodes: int
    n_updated: int


@dataclass(eq=False)
class CollabTreesModel:
    """K additive trees stored as (region constraints, increment) pairs."""

    trees: tuple[tuple[tuple[tuple[Constraint, ...], float], ...], ...]
    rounds: tuple[SplitRound, ...]
    y_mean: float
    n_train: int
    schema: FeatureSchema


@dataclass(eq=False)
class EnsembleModel:
    """Bagged collaborative-tree models plus the resample that trained each."""

    models: tuple[CollabTreesModel, ...]
    bootstrap_indices: tuple[np.ndarray, ...]
    hyperparams: Hyperparams
    schema: FeatureSchema
    y_mean: float
    n_train: int


def node_valid_for_split(node: NodeRef, hp: Hyperparams) -> bool:
    """A node may be split while shallower than max_depth and strictly larger
    than both sample-count thresholds."""
    return node.depth < hp.max_depth and node.size > max(
        hp.min_samples_split, hp.min_samples_leaf
    )


def children_valid_for_update(children: Sequence[NodeRef], hp: Hyperparams) -> tuple:
    """Children that receive tree increments: all larger than
    min_samples_leaf, provided at least two qualify; otherwise none."""
    valid = tuple(c for c in children if c.size > hp.min_samples_leaf)
    return valid if len(valid) >= 2 else ()


class _NodeCache:
    """Per-node scoring state: rows, per-column sort orders, fixed counts."""

    __slots__ = ("rows", "gs_order", "gs_boundary", "bin_ones", "multi_flat", "multi_counts")

    def __init__(self, rows):
        self.rows = rows
        self.gs_order = None
        self.gs_boundary = None
        self.bin_ones = None
        self.multi_flat = None
        self.multi_counts = None


class _SetState:
    __slots__ = ("sid", "tree", "depth", "parent_round", "items", "scores", "cuts",
                 "max_score", "fresh", "cum_at")

    def __init__(self, sid, tree, depth, parent_round, items):
        self.sid = sid
        self.tree = tree
        self.depth = depth
        self.parent_round = parent_round
        self.items = items  # list of (NodeRef, _NodeCache)
        self.scores = None
        self.cuts = None
        self.max_score = -math.inf
        self.fresh = False
        self.cum_at = 0.0  # cumulative residual-change norm at last scoring


class _Scorer:
    """Vectorized split scoring over all groups for one training matrix.

    Columns are handled by family: one-hot groups through offset bincounts,
    0/1 single columns through one matrix-vector product, and general single
    columns through cached per-column sort orders with a cumulative-sum scan.
    """

    def __init__(self, x: np.ndarray, schema: FeatureSchema):
        self.x = x
        self.n = x.shape[0]
        self.n_groups = schema.n_groups
        self.group_columns = [np.asarray(g.column_indices, dtype=np.intp) for g in schema.groups]

        multi_idx, multi_sizes = [], []
        bin_idx, bin_cols = [], []
        gs_idx, gs_cols = [], []
        for m, g in enumerate(schema.groups):
            if g.size > 1:
                multi_idx.append(m)
                multi_sizes.append(g.size)
            else:
                col = g.column_indices[0]
                v = x[:, col]
                if (np.equal(v, 0.0) | np.equal(v, 1.0)).all():
                    bin_idx.append(m)
                    bin_cols.append(col)
                else:
                    gs_idx.append(m)
                    gs_cols.append(col)

        self.multi_idx = np.asarray(multi_idx, dtype=np.intp)
        self.n_multi = len(multi_idx)
        self.multi_slot = np.full(self.n_groups, -1, dtype=np.intp)
        self.multi_slot[self.multi_idx] = np.arange(self.n_multi)
        if self.n_multi:
            sizes = np.asarray(multi_sizes)
            self.multi_offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
            self.multi_total = int(sizes.sum())
            labels = np.empty((self.n, self.n_multi), dtype=np.int32)
            for slot, m in enumerate(multi_idx):
                cols = self.group_columns[m]
                labels[:, slot] = np.argmax(x[:, cols], axis=1)
            self.labels = labels
            self.labels_off = (labels + self.multi_offsets[None, :]).astype(np.int64)
        else:
            self.labels = None
            self.labels_off = None

        self.bin_idx = np.asarray(bin_idx, dtype=np.intp)
        self.x_bin = np.ascontiguousarray(x[:, bin_cols]) if bin_idx else None
        self.gs_idx = np.asarray(gs_idx, dtype=np.intp)
        self.n_gs = len(gs_idx)
        self.xT_gs = np.ascontiguousarray(x[:, gs_cols].T) if gs_idx else None
        self._gs_rows = np.arange(self.n_gs)
        self._member = np.zeros(self.n, dtype=bool)

    def root_cache(self) -> _NodeCache:
        cache = _NodeCache(np.arange(self.n, dtype=np.int32))
        if self.n_gs:
            cache.gs_order = np.argsort(self.xT_gs, axis=1, kind="stable").astype(np.int32)
            sv = np.take_along_axis(self.xT_gs, cache.gs_order, axis=1)
            cache.gs_boundary = sv[:, :-1] != sv[:, 1:]
        if self.x_bin is not None:
            cache.bin_ones = self.x_bin.sum(axis=0)
        if self.n_multi:
            cache.multi_flat = self.labels_off.ravel()
            cache.multi_counts = np.bincount(cache.multi_flat, minlength=self.multi_total).astype(float)
        return cache

    def child_cache(self, parent: _NodeCache, rows: np.ndarray) -> _NodeCache:
        cache = _NodeCache(rows)
        nn = len(rows)
        if self.n_gs:
            self._member[rows] = True
            keep = self._member[parent.gs_order]
            cache.gs_order = parent.gs_order[keep].reshape(self.n_gs, nn)
            self._member[rows] = False
            if nn >= 2:
                sv = self.xT_gs[self._gs_rows[:, None], cache.gs_order]
                cache.gs_boundary = sv[:, :-1] != sv[:, 1:]
            else:
                cache.gs_boundary = np.zeros((self.n_gs, max(nn - 1, 0)), dtype=bool)
        if self.x_bin is not None:
            cache.bin_ones = self.x_bin[rows].sum(axis=0)
        if self.n_multi:
            cache.multi_flat = self.labels_off[rows].ravel()
            cache.multi_counts = np.bincount(cache.multi_flat, minlength=self.multi_total).astype(float)
        return cache

    def score_node(self, cache: _NodeCache, r: np.ndarray):
        """Scores over all groups plus per-group cut values for this node."""
        nn = len(cache.rows)
        scores = np.zeros(self.n_groups)
        cuts = np.full(self.n_groups, np.nan)
        r_node = r[cache.rows]
        total = float(r_node.sum())

        if self.x_bin is not None:
            xb = self.x_bin[cache.rows]
            s1 = r_node @ xb
            n1 = cache.bin_ones
            n0 = nn - n1
            with np.errstate(divide="ignore", invalid="ignore"):
                val = s1**2 / n1 + (total - s1) ** 2 / n0 - total**2 / nn
            ok = (n1 > 0) & (n0 > 0)
            scores[self.bin_idx] = np.where(ok, np.maximum(val, 0.0), 0.0)
            cuts[self.bin_idx] = 0.0

        if self.n_gs:
            if nn >= 2:
                val, cut = _single_column_scan(cache.gs_order, cache.gs_boundary, r, self.xT_gs)
                scores[self.gs_idx] = val
            else:
                cut = self.xT_gs[self._gs_rows, cache.gs_order[:, 0]]
            cuts[self.gs_idx] = cut

        if self.n_multi:
            w = np.broadcast_to(r_node[:, None], (nn, self.n_multi)).ravel()
            sums = np.bincount(cache.multi_flat, weights=w, minlength=self.multi_total)
            ratio = np.divide(
                sums * sums,
                cache.multi_counts,
                out=np.zeros_like(sums),
                where=cache.multi_counts > 0,
            )
            scores[self.multi_idx] = np.add.reduceat(ratio, self.multi_offsets)
        return scores, cuts


def _score_set(scorer: _Scorer, st: _SetState, r: np.ndarray) -> None:
    scores = np.zeros(scorer.n_groups)
    cuts = np.empty((len(st.items), scorer.n_groups))
    for i, (_, cache) in enumerate(st.items):
        sc, ct = scorer.score_node(cache, r)
        scores += sc
        cuts[i] = ct
    st.scores = scores
    st.cuts = cuts
    st.max_score = float(scores.max())
    st.fresh = True


def grow(
    dataset: EncodedDataset,
    schema: FeatureSchema,
    hp: Hyperparams,
    rng: np.random.Generator,
) -> CollabTreesModel:
    """Train one collaborative-trees model on an encoded (centered) dataset."""
    x, y = dataset.x, dataset.y
    n = len(y)
    if n < 2:
        raise DataError("training requires at least two samples")
    if schema.n_columns != x.shape[1]:
        raise SchemaError("schema does not match the encoded matrix width")
    K = hp.n_trees
    split_min = max(hp.min_samples_split, hp.min_samples_leaf)
    scorer = _Scorer(x, schema)
    r = np.array(y, dtype=float)

    sets: dict[int, _SetState] = {}
    owner = np.full((n, K), -1, dtype=np.int32)
    root = scorer.root_cache()
    next_id = 0
    for k in range(K):
        node = NodeRef(k, 0, root.rows, (), None)
        sets[next_id] = _SetState(next_id, k, 0, None, [(node, root)])
        owner[:, k] = next_id
        next_id += 1

    log: list[SplitRound] = []
    trees: list[list] = [[] for _ in range(K)]
    cum_change = 0.0  # running sum of residual-update norms, for score bounds

    while sets:
        ids = list(sets.keys())
        if len(log) < 2 * K or hp.random_update >= 1.0 or len(ids) == 1:
            cand_ids = ids
        else:
            m = max(int(hp.random_update * len(ids) + 0.5), 1)
            if m >= len(ids):
                cand_ids = ids
            else:
                pos = np.sort(rng.choice(len(ids), size=m, replace=False))
                cand_ids = [ids[i] for i in pos]

        pens = priority_penalties(np.array([sets[sid].depth for sid in cand_ids]))
        allowed = [sid for sid, p in zip(cand_ids, pens) if p == 0.0]

        if math.isinf(hp.alpha):
            # Every candidate score is a squared projection norm of the
            # residuals, so its square root moves by at most the norm of the
            # residual change.  A stale set whose bound falls below the best
            # current candidate cannot win the argmax and stays unscored.
            best = -math.inf
            for sid in allowed:
                if sets[sid].fresh and sets[sid].max_score > best:
                    best = sets[sid].max_score
            stale = []
            for sid in allowed:
                st = sets[sid]
                if not st.fresh:
                    if st.scores is None:
                        ub = math.inf
                    else:
                        slack = cum_change - st.cum_at
                        ub = (math.sqrt(max(st.max_score, 0.0)) + slack) ** 2
                    stale.append((ub, sid))
            stale.sort(reverse=True)
            for ub, sid in stale:
                if ub < best:
                    break
                _score_set(scorer, sets[sid], r)
                sets[sid].cum_at = cum_change
                if sets[sid].max_score > best:
                    best = sets[sid].max_score
            ties = []
            for sid in allowed:
                st = sets[sid]
                if st.fresh and st.max_score == best:
                    for g in np.flatnonzero(st.scores == best):
                        ties.append((sid, int(g)))
            sid, mhat = ties[int(rng.integers(len(ties)))]
        else:
            for sid in allowed:
                if not sets[sid].fresh:
                    _score_set(scorer, sets[sid], r)
                    sets[sid].cum_at = cum_change
            mat = np.stack([sets[sid].scores for sid in allowed])
            z = hp.alpha * (mat.ravel() - mat.max())
            p = np.exp(z)
            p /= p.sum()
            flat = int(rng.choice(p.size, p=p))
            sid, mhat = allowed[flat // scorer.n_groups], flat % scorer.n_groups

        st = sets.pop(sid)
        for _, cache in st.items:
            owner[cache.rows, st.tree] = -1

        cols = scorer.group_columns[mhat]
        drop = 0.0
        updated = 0
        changed_rows = []
        pending = []
        for i, (node, cache) in enumerate(st.items):
            rows = cache.rows
            if len(cols) > 1:
                lab = scorer.labels[rows, scorer.multi_slot[mhat]]
                children = [
                    (rows[lab == j], (int(cols[j]), True, 0.0))
                    for j in range(len(cols))
                    if (lab == j).any()
                ]
            else:
                c = float(st.cuts[i, mhat])
                v = x[rows, cols[0]]
                children = [
                    (rows[v > c], (int(cols[0]), True, c)),
                    (rows[v <= c], (int(cols[0]), False, c)),
                ]
            to_update = [ch for ch in children if len(ch[0]) > hp.min_samples_leaf]
            if len(to_update) < 2:
                continue  # split abandoned: no increment, children not enqueued
            updated += len(to_update)
            for crows, constraint in to_update:
                mean = float(r[crows].mean())
                r[crows] -= mean
                drop += len(crows) * mean * mean
                trees[st.tree].append((node.constraints + (constraint,), mean))
                changed_rows.append(crows)
            splittable = [
                ch
                for ch in children
                if len(ch[0]) > split_min and node.depth + 1 < hp.max_depth
            ]
            if splittable:
                pending.append((node, cache, splittable))

        if not updated:
            continue
        s_index = len(log) + 1
        log.append(
            SplitRound(s_index, st.tree, mhat, st.parent_round, drop, len(st.items), updated)
        )
        cum_change += math.sqrt(max(drop, 0.0))
        d = np.concatenate(changed_rows)
        for sid2 in np.unique(owner[d, :]):
            if sid2 >= 0:
                sets[int(sid2)].fresh = False
        for node, cache, splittable in pending:
            items = []
            for crows, constraint in splittable:
                ccache = scorer.child_cache(cache, crows)
                cnode = NodeRef(
                    st.tree,
                    node.depth + 1,
                    crows,
                    node.constraints + (constraint,),
                    s_index,
                )
                items.append((cnode, ccache))
            sets[next_id] = _SetState(next_id, st.tree, node.depth + 1, s_index, items)
            for _, cc in items:
                owner[cc.rows, st.tree] = next_id
            next_id += 1

    return CollabTreesModel(
        trees=tuple(tuple(t) for t in trees),
        rounds=tuple(log),
        y_mean=dataset.y_mean,
        n_train=n,
        schema=schema,
    )


def predict_model(model: CollabTreesModel, x: np.ndarray) -> np.ndarray | float:
    """Sum of per-tree increments over regions containing each query row."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.schema.n_columns:
        raise DataError("query width does not match the model schema")
    out = np.full(x.shape[0], model.y_mean)
    for tree in model.trees:
        for constraints, value in tree:
            mask = np.ones(x.shape[0], dtype=bool)
            for col, greater, thr in constraints:
                mask &= (x[:, col] > thr) if greater else (x[:, col] <= thr)
            out[mask] += value
    return float(out[0]) if single else out


def predict_ensemble(ensemble: EnsembleModel, x: np.ndarray) -> np.ndarray | float:
    """Mean of member predictions."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    out = np.zeros(x.shape[0])
    for m in ensemble.models:
        out += predict_model(m, x)
    out /= len(ensemble.models)
    return float(out[0]) if single else out


def _member_rng(seed: int, member: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(member,)))


def _grow_member(dataset, schema, hp, seed, b):
    rng = _member_rng(seed, b)
    idx = rng.integers(0, dataset.n, size=dataset.n)
    boot = EncodedDataset(x=dataset.x[idx], y=dataset.y[idx], y_mean=dataset.y_mean)
    return grow(boot, schema, hp, rng), idx


_POOL_STATE: dict = {}


def _pool_init(dataset, schema, hp, seed):
    _POOL_STATE["args"] = (dataset, schema, hp, seed)


def _pool_task(b):
    dataset, schema, hp, seed = _POOL_STATE["args"]
    return _grow_member(dataset, schema, hp, seed, b)


def grow_ensemble(
    dataset: EncodedDataset,
    schema: FeatureSchema,
    hp: Hyperparams,
    seed: int | None = None,
    threads: int = 1,
) -> EnsembleModel:
    """Train a bagged ensemble of ``hp.n_estimators`` models.

    Member ``b`` draws a size-n bootstrap with an RNG derived from
    ``(seed, b)``, so results are identical whatever the worker count.
    """
    if seed is None:
        seed = hp.seed
    B = hp.n_estimators
    if threads > 1 and B > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=min(threads, B),
            initializer=_pool_init,
            initargs=(dataset, schema, hp, seed),
        ) as pool:
            results = list(pool.map(_pool_task, range(B)))
    else:
        results = [_grow_member(dataset, schema, hp, seed, b) for b in range(B)]
    models = tuple(m for m, _ in results)
    boots = tuple(i for _, i in results)
    return EnsembleModel(
        models=models,
        bootstrap_indices=boots,
        hyperparams=hp,
        schema=schema,
        y_mean=dataset.y_mean,
        n_train=dataset.n,
    )
