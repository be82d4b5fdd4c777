import json
from dataclasses import replace

import numpy as np
import pytest

from wingfatigue import nn
from wingfatigue.oracle import generate_fleet, label_world
from wingfatigue.pipeline import (
    ORACLE, PipelineConfig, PipelineModel, fit_pipeline, keys_in_role, predict_keys,
)
from wingfatigue.stats import TEST, TRAIN, split_assign

FAST = PipelineConfig(nn.TrainConfig(epochs=5), nn.TrainConfig(epochs=5, batch_size=128),
                      nn.TrainConfig(epochs=5, batch_size=128), seed=42)


@pytest.fixture(scope="module")
def world():
    return generate_fleet()


@pytest.fixture(scope="module")
def records(world):
    return label_world(world)


@pytest.fixture(scope="module")
def split(world):
    return split_assign(world.pses, world.mission_ids, 42)


@pytest.fixture(scope="module")
def fitted(world, records, split):
    return fit_pipeline(world, records, split, FAST)


def flat(model):
    return json.dumps(model.to_dict(), sort_keys=True)


def test_seeded_sets_every_model_seed():
    cfg = replace(FAST, seed=9).seeded()
    assert cfg.flight.seed == cfg.gag.seed == cfg.gm.seed == 9


def test_phase2_inputs_validated():
    with pytest.raises(ValueError):
        PipelineConfig(phase2_inputs="truth")


def test_curves_cover_every_epoch(fitted):
    assert set(fitted.curves) == {"flight", "gag", "gm"}
    for c in fitted.curves.values():
        assert len(c.train_loss) == len(c.val_loss) == 5


def test_rerun_is_bitwise_identical(world, records, split, fitted):
    again = fit_pipeline(world, records, split, FAST)
    assert flat(again.model) == flat(fitted.model)
    assert again.curves == fitted.curves


def test_different_seed_changes_weights(world, records, split, fitted):
    other = fit_pipeline(world, records, split, replace(FAST, seed=43))
    assert flat(other.model) != flat(fitted.model)


def test_model_round_trip_predictions(world, split, fitted):
    keys = keys_in_role(world, split, TEST)
    back = PipelineModel.from_dict(json.loads(flat(fitted.model)))
    a = predict_keys(fitted.model, world, keys)
    b = predict_keys(back, world, keys)
    assert [p.life for p in a] == [p.life for p in b]


def test_predict_keys_shapes(world, split, fitted):
    keys = keys_in_role(world, split, TEST)
    preds = predict_keys(fitted.model, world, keys)
    assert len(preds) == len(keys) == 152
    for key, p in zip(keys, preds):
        assert p.life.key == key
        assert len(p.stresses) == len(world.mission(key.mission_id).segments)
        assert p.life.d_gag > 0 and p.life.d_gm > 0 and np.isfinite(p.life.life)
    assert predict_keys(fitted.model, world, []) == []


def test_oracle_inputs_mode_differs(world, records, split, fitted):
    # Phase I is unchanged; only the damage networks see different inputs
    alt = fit_pipeline(world, records, split, replace(FAST, phase2_inputs=ORACLE))
    assert alt.model.flight.to_dict() == fitted.model.flight.to_dict()
    assert alt.model.gag.to_dict() != fitted.model.gag.to_dict()


def test_empty_train_split_rejected(world, records, split):
    test_only = [r for r in records if split.role(r.key.pse, r.key.mission_id) != TRAIN]
    with pytest.raises(ValueError):
        fit_pipeline(world, test_only, split, FAST)
