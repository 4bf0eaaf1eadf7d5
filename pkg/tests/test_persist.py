"""Model serialization: round-trips, version checks, corruption detection."""

import numpy as np
import pytest

from collabtrees.core import build_schema, encode
from collabtrees.datagen import CopulaConfig, gaussian_copula_ar1, matrix_to_table, model_y1
from collabtrees.errors import PersistenceError
from collabtrees.forest import Hyperparams, grow_ensemble, predict_ensemble
from collabtrees.persist import load_model, save_model


def trained_ensemble(seed=0, n=120):
    x = gaussian_copula_ar1(CopulaConfig(n=n, p=10, lam=0.2, seed=seed))
    y = model_y1(x, np.random.default_rng(seed))
    table = matrix_to_table(x, y)
    roles = {k: "continuous" for k in table if k != "y"}
    roles["y"] = "response"
    schema = build_schema(table, roles, 3)
    ds = encode(table, schema)
    hp = Hyperparams(n_estimators=3, n_trees=2, min_samples_split=10, min_samples_leaf=5, seed=seed)
    return grow_ensemble(ds, schema, hp), ds


def test_roundtrip_preserves_predictions_exactly(tmp_path):
    ensemble, ds = trained_ensemble()
    path = tmp_path / "model.json"
    save_model(path, ensemble)
    loaded = load_model(path)
    assert np.array_equal(predict_ensemble(loaded, ds.x), predict_ensemble(ensemble, ds.x))
    assert loaded.hyperparams == ensemble.hyperparams
    assert loaded.schema.labels == ensemble.schema.labels
    for m1, m2 in zip(loaded.models, ensemble.models):
        assert m1.rounds == m2.rounds
        assert m1.trees == m2.trees


def test_corrupted_byte_detected(tmp_path):
    ensemble, _ = trained_ensemble()
    path = tmp_path / "model.json"
    save_model(path, ensemble)
    raw = path.read_text()
    target = raw.index('"y_mean"')
    # flip one digit inside the payload without breaking the JSON syntax
    i = target
    while not raw[i].isdigit():
        i += 1
    flipped = "1" if raw[i] != "1" else "2"
    path.write_text(raw[:i] + flipped + raw[i + 1 :])
    with pytest.raises(PersistenceError, match="checksum"):
        load_model(path)


def test_truncated_file_detected(tmp_path):
    ensemble, _ = trained_ensemble()
    path = tmp_path / "model.json"
    save_model(path, ensemble)
    path.write_text(path.read_text()[:-40])
    with pytest.raises(PersistenceError):
        load_model(path)


def test_unknown_version_rejected(tmp_path):
    ensemble, _ = trained_ensemble()
    path = tmp_path / "model.json"
    save_model(path, ensemble)
    doc = path.read_text().replace('"version": 1', '"version": 99')
    path.write_text(doc)
    with pytest.raises(PersistenceError, match="version"):
        load_model(path)


def test_not_a_model_file_rejected(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"hello": "world"}')
    with pytest.raises(PersistenceError):
        load_model(path)
    path.write_text("not json at all")
    with pytest.raises(PersistenceError):
        load_model(path)


def test_empty_ensemble_roundtrip(tmp_path):
    # thresholds so high that no update is ever valid: pure-mean predictor
    x = np.array([[0.0], [1.0], [0.0], [1.0]])
    y = np.array([1.0, 2.0, 3.0, 4.0])
    table = {"x": x[:, 0], "y": y}
    roles = {"x": "binary", "y": "response"}
    schema = build_schema(table, roles)
    ds = encode(table, schema)
    hp = Hyperparams(n_estimators=1, n_trees=1, min_samples_leaf=10, min_samples_split=10)
    ensemble = grow_ensemble(ds, schema, hp)
    assert ensemble.models[0].rounds == ()
    path = tmp_path / "empty.json"
    save_model(path, ensemble)
    loaded = load_model(path)
    assert predict_ensemble(loaded, ds.x) == pytest.approx(np.full(4, 2.5))
