"""End-to-end fit and prediction across the three phases."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import nn, phase1, phase2
from .domain import Mission, Phase, SampleKey, StressVector
from .oracle import GroundTruthRecord, OracleWorld
from .phase3 import LifePrediction, predict_life
from .stats import TEST, TRAIN, VAL, SplitAssignment

PREDICTED = "predicted"
ORACLE = "oracle"


@dataclass(frozen=True)
class PipelineConfig:
    flight: nn.TrainConfig = phase1.FLIGHT_TRAIN
    gag: nn.TrainConfig = phase2.DAMAGE_TRAIN
    gm: nn.TrainConfig = phase2.DAMAGE_TRAIN
    seed: int = 42
    # Phase II inputs: Phase-I predictions, or oracle stresses to isolate Phase-II error
    phase2_inputs: str = PREDICTED

    def __post_init__(self):
        if self.phase2_inputs not in (PREDICTED, ORACLE):
            raise ValueError(f"phase2_inputs must be {PREDICTED!r} or {ORACLE!r}")

    def seeded(self) -> "PipelineConfig":
        """Copy with every model's training seed set to ``seed``."""
        return replace(self, flight=replace(self.flight, seed=self.seed),
                       gag=replace(self.gag, seed=self.seed), gm=replace(self.gm, seed=self.seed))


@dataclass
class PipelineModel:
    ground: phase1.GroundPolyModel
    flight: phase1.FlightStressModel
    gag: phase2.DamageModel
    gm: phase2.DamageModel
    split: SplitAssignment

    def to_dict(self) -> dict:
        return {
            "ground": self.ground.to_dict(),
            "flight": self.flight.to_dict(),
            "gag": self.gag.to_dict(),
            "gm": self.gm.to_dict(),
            "split": self.split.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineModel":
        return cls(
            phase1.GroundPolyModel.from_dict(d["ground"]),
            phase1.FlightStressModel.from_dict(d["flight"]),
            phase2.DamageModel.from_dict(d["gag"]),
            phase2.DamageModel.from_dict(d["gm"]),
            SplitAssignment.from_dict(d["split"]),
        )


@dataclass
class FitResult:
    model: PipelineModel
    curves: dict[str, nn.LearningCurves] = field(default_factory=dict)


def _by_role(records: Iterable[GroundTruthRecord], split: SplitAssignment) -> dict[str, list]:
    out = {TRAIN: [], VAL: [], TEST: []}
    for r in records:
        out[split.role(r.key.pse, r.key.mission_id)].append(r)
    return out


def _unique_pairs(records: Sequence[GroundTruthRecord]) -> list[GroundTruthRecord]:
    # stresses depend on (mission, pse) only, not on kt
    seen = {}
    for r in records:
        seen.setdefault((r.key.mission_id, r.key.pse), r)
    return list(seen.values())


def stress_samples(world: OracleWorld, records: Sequence[GroundTruthRecord], phase: Phase) -> list:
    """(pse, FlightParams, StressVector) for every segment of the given phase."""
    out = []
    for r in _unique_pairs(records):
        mission = world.mission(r.key.mission_id)
        for seg, s in zip(mission.segments, r.stresses):
            if seg.phase is phase:
                out.append((r.key.pse, seg.params, s))
    return out


def predict_stresses(model: PipelineModel, mission: Mission, pse: int) -> list[StressVector]:
    """Phase-I stress vector for every segment of ``mission`` at ``pse``."""
    flight_idx = [i for i, s in enumerate(mission.segments) if s.phase is Phase.FLIGHT]
    out: list[StressVector | None] = [None] * len(mission.segments)
    if flight_idx:
        pred = phase1.predict_flight_batch(model.flight, [pse] * len(flight_idx),
                                           [mission.segments[i].params for i in flight_idx])
        for i, row in zip(flight_idx, pred):
            out[i] = StressVector.from_array(row)
    for i, seg in enumerate(mission.segments):
        if seg.phase is Phase.GROUND:
            out[i] = phase1.predict_ground(model.ground, pse, seg.params.fw)
    return out


def _damage_rows(world, records, stresses_for):
    rows = []
    for r in records:
        mission = world.mission(r.key.mission_id)
        gf, mf = phase2.build_damage_features(stresses_for(r, mission), mission, r.key.kt)
        rows.append((gf, mf, r.d_gag_per_flight, r.d_gm_per_flight))
    return rows


def fit_pipeline(world: OracleWorld, records: Sequence[GroundTruthRecord], split: SplitAssignment,
                 config: PipelineConfig | None = None) -> FitResult:
    """Fit Phase I on train segments, then Phase II on train damage labels."""
    cfg = (config or PipelineConfig()).seeded()
    sets = _by_role(records, split)
    if not sets[TRAIN]:
        raise ValueError("split leaves no training samples")

    ground = phase1.fit_ground_model(
        (p, prm.fw, s.one_g) for p, prm, s in stress_samples(world, sets[TRAIN], Phase.GROUND))
    flight, flight_curves = phase1.fit_flight_model(
        [s for s in stress_samples(world, sets[TRAIN], Phase.FLIGHT)],
        [s for s in stress_samples(world, sets[VAL], Phase.FLIGHT)],
        cfg.flight,
    )
    partial = PipelineModel(ground, flight, None, None, split)  # type: ignore[arg-type]

    if cfg.phase2_inputs == ORACLE:
        def stresses_for(r, mission):
            return list(r.stresses)
    else:
        cache: dict = {}

        def stresses_for(r, mission):
            k = (r.key.mission_id, r.key.pse)
            if k not in cache:
                cache[k] = predict_stresses(partial, mission, r.key.pse)
            return cache[k]

    (gag, gm), (gag_curves, gm_curves) = phase2.fit_damage_models(
        _damage_rows(world, sets[TRAIN], stresses_for),
        _damage_rows(world, sets[VAL], stresses_for),
        cfg.gag, cfg.gm,
    )
    model = PipelineModel(ground, flight, gag, gm, split)
    return FitResult(model, {"flight": flight_curves, "gag": gag_curves, "gm": gm_curves})


@dataclass(frozen=True)
class SamplePrediction:
    life: LifePrediction
    gag_features: phase2.GagFeatures
    gm_features: phase2.GmFeatures
    stresses: tuple[StressVector, ...]


def predict_keys(model: PipelineModel, world: OracleWorld,
                 keys: Sequence[SampleKey]) -> list[SamplePrediction]:
    """End-to-end predictions, batched through each damage network."""
    stress_cache: dict = {}
    feats = []
    for key in keys:
        mission = world.mission(key.mission_id)
        k = (key.mission_id, key.pse)
        if k not in stress_cache:
            stress_cache[k] = predict_stresses(model, mission, key.pse)
        feats.append(phase2.build_damage_features(stress_cache[k], mission, key.kt))
    if not feats:
        return []
    d_gag = model.gag.predict(np.array([g.as_array() for g, _ in feats]))
    d_gm = model.gm.predict(np.array([m.as_array() for _, m in feats]))
    out = []
    for key, (gf, mf), dg, dm in zip(keys, feats, d_gag, d_gm):
        n = world.mission(key.mission_id).n_flights
        out.append(SamplePrediction(predict_life(key, n, float(dg), float(dm)), gf, mf,
                                    tuple(stress_cache[(key.mission_id, key.pse)])))
    return out


def keys_in_role(world: OracleWorld, split: SplitAssignment, role: str) -> list[SampleKey]:
    return [k for k in world.keys() if split.role(k.pse, k.mission_id) == role]
