"""Versioned text serialization for trained ensembles.

One JSON document per ensemble: format tag, version, payload and a SHA-256
checksum of the canonical payload encoding.  Floats round-trip exactly through
``repr``-based JSON, so reloaded models predict bit-identically.  Files are
written to a temporary sibling and renamed, never left partially written.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

from .core import FeatureSchema, GroupSpec
from .errors import PersistenceError
from .forest import CollabTreesModel, EnsembleModel, Hyperparams, SplitRound

FORMAT = "collabtrees-model"
VERSION = 1


def write_text_atomic(path, text: str) -> None:
    """Write via a temporary file in the destination directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v: float):
    if math.isinf(v):
        return "inf"
    return v


def _denum(v) -> float:
    return math.inf if v == "inf" else float(v)


def _schema_payload(schema: FeatureSchema) -> dict:
    return {
        "response": schema.response,
        "groups": [
            {
                "name": g.name,
                "kind": g.kind,
                "columns": list(g.column_indices),
                "bin_edges": list(g.bin_edges) if g.bin_edges is not None else None,
                "categories": list(g.categories) if g.categories is not None else None,
            }
            for g in schema.groups
        ],
    }


def _schema_restore(payload: dict) -> FeatureSchema:
    groups = tuple(
        GroupSpec(
            name=g["name"],
            kind=g["kind"],
            column_indices=tuple(g["columns"]),
            bin_edges=tuple(g["bin_edges"]) if g["bin_edges"] is not None else None,
            categories=tuple(g["categories"]) if g["categories"] is not None else None,
        )
        for g in payload["groups"]
    )
    return FeatureSchema(groups, response=payload["response"])


def _model_payload(model: CollabTreesModel) -> dict:
    return {
        "n_train": model.n_train,
        "y_mean": model.y_mean,
        "rounds": [
            [r.index, r.tree, r.group, r.parent_round, r.drop, r.n_nodes, r.n_updated]
            for r in model.rounds
        ],
        "trees": [
            [[[[c, bool(g), t] for c, g, t in constraints], value] for constraints, value in tree]
            for tree in model.trees
        ],
    }


def _model_restore(payload: dict, schema: FeatureSchema) -> CollabTreesModel:
    rounds = tuple(
        SplitRound(
            index=r[0],
            tree=r[1],
            group=r[2],
            parent_round=r[3],
            drop=r[4],
            n_nodes=r[5],
            n_updated=r[6],
        )
        for r in payload["rounds"]
    )
    trees = tuple(
        tuple(
            (tuple((int(c), bool(g), float(t)) for c, g, t in constraints), float(value))
            for constraints, value in tree
        )
        for tree in payload["trees"]
    )
    return CollabTreesModel(
        trees=trees,
        rounds=rounds,
        y_mean=float(payload["y_mean"]),
        n_train=int(payload["n_train"]),
        schema=schema,
    )


def _payload(ensemble: EnsembleModel) -> dict:
    hp = ensemble.hyperparams
    return {
        "schema": _schema_payload(ensemble.schema),
        "hyperparams": {
            "n_estimators": hp.n_estimators,
            "n_trees": hp.n_trees,
            "alpha": _num(hp.alpha),
            "min_samples_split": hp.min_samples_split,
            "min_samples_leaf": hp.min_samples_leaf,
            "n_bins": hp.n_bins,
            "random_update": hp.random_update,
            "max_depth": _num(hp.max_depth),
            "seed": hp.seed,
        },
        "y_mean": ensemble.y_mean,
        "n_train": ensemble.n_train,
        "models": [_model_payload(m) for m in ensemble.models],
        "bootstrap_indices": [idx.tolist() for idx in ensemble.bootstrap_indices],
    }


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def save_model(path, ensemble: EnsembleModel) -> None:
    """Serialize an ensemble to the versioned checksummed text format."""
    payload = _payload(ensemble)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "payload": payload,
        "checksum": _checksum(payload),
    }
    write_text_atomic(path, json.dumps(doc, indent=1) + "\n")


def load_model(path) -> EnsembleModel:
    """Load an ensemble, verifying format, version and checksum."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise PersistenceError(f"{path}: not a readable model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise PersistenceError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise PersistenceError(f"{path}: unsupported model version {doc.get('version')!r}")
    payload = doc.get("payload")
    if payload is None or doc.get("checksum") != _checksum(payload):
        raise PersistenceError(f"{path}: checksum mismatch (file corrupted)")
    schema = _schema_restore(payload["schema"])
    hp_raw = dict(payload["hyperparams"])
    hp = Hyperparams(
        n_estimators=hp_raw["n_estimators"],
        n_trees=hp_raw["n_trees"],
        alpha=_denum(hp_raw["alpha"]),
        min_samples_split=hp_raw["min_samples_split"],
        min_samples_leaf=hp_raw["min_samples_leaf"],
        n_bins=hp_raw["n_bins"],
        random_update=hp_raw["random_update"],
        max_depth=_denum(hp_raw["max_depth"]),
        seed=hp_raw["seed"],
    )
    models = tuple(_model_restore(m, schema) for m in payload["models"])
    boots = tuple(np.asarray(b, dtype=np.int64) for b in payload["bootstrap_indices"])
    return EnsembleModel(
        models=models,
        bootstrap_indices=boots,
        hyperparams=hp,
        schema=schema,
        y_mean=float(payload["y_mean"]),
        n_train=int(payload["n_train"]),
    )
