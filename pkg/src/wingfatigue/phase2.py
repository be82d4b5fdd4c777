"""Per-flight damage prediction from time-averaged stresses.

Two regressors share the same machinery: one for the ground-air-ground
cycle (9 inputs) and one for gusts and maneuvers (7 inputs). Targets are
trained as MinMax-scaled log10 damage.
"""
from __future__ import annotations

from dataclasses import dataclass, astuple, fields
from typing import Sequence

import numpy as np

from . import nn
from .domain import MinMaxScaler, Mission, Phase, StressVector, fit_minmax, time_weighted_average

GAG_SPEC = nn.MlpSpec(9, (64, 64), 1, "tanh", 0.0)
GM_SPEC = nn.MlpSpec(7, (64, 64), 1, "relu", 0.001)
# log10 outputs are clipped so 10**x stays a positive, finite float64
_LOG10_RANGE = (-307.0, 308.0)

DAMAGE_TRAIN = nn.TrainConfig(lr0=8e-3, epochs=5000, batch_size=128, scheduler_gamma=0.975,
                              scheduler_step=30)


@dataclass(frozen=True)
class GagFeatures:
    kt: float
    one_g_flight: float
    d_vman: float
    d_vgust: float
    d_turn: float
    one_g_ground: float
    t_flight: float
    t_ground: float
    n: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class GmFeatures:
    kt: float
    one_g_flight: float
    d_vman: float
    d_vgust: float
    d_turn: float
    t_flight: float
    n: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def build_damage_features(stresses: Sequence[StressVector | None], mission: Mission,
                          kt: float) -> tuple[GagFeatures, GmFeatures]:
    """Time-weighted stress averages over flight and ground segments."""
    if len(stresses) != len(mission.segments) or any(s is None for s in stresses):
        raise ValueError(f"mission {mission.id}: every segment needs a predicted stress vector")
    flight = [(s, seg.params.time) for s, seg in zip(stresses, mission.segments)
              if seg.phase is Phase.FLIGHT]
    ground = [(s, seg.params.time) for s, seg in zip(stresses, mission.segments)
              if seg.phase is Phase.GROUND]
    tf = [t for _, t in flight]
    avg = [time_weighted_average([getattr(s, name) for s, _ in flight], tf) for name in StressVector.NAMES]
    g1 = time_weighted_average([s.one_g for s, _ in ground], [t for _, t in ground])
    t_flight = float(sum(tf))
    t_ground = float(sum(t for _, t in ground))
    n = float(mission.n_flights)
    return (
        GagFeatures(kt, *avg, g1, t_flight, t_ground, n),
        GmFeatures(kt, *avg, t_flight, n),
    )


@dataclass
class DamageModel:
    mlp: nn.Mlp
    x_scaler: MinMaxScaler
    y_scaler: MinMaxScaler  # on log10(damage)

    def predict(self, features) -> np.ndarray:
        """Per-flight damage for one feature row or a 2-D batch."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        z = nn.forward(self.mlp, self.x_scaler.transform(x))
        return self.decode_target(z)

    def encode_target(self, damage) -> np.ndarray:
        return self.y_scaler.transform(np.log10(np.asarray(damage, dtype=np.float64))[:, None])

    def decode_target(self, scaled) -> np.ndarray:
        log_d = self.y_scaler.transform(np.asarray(scaled).reshape(-1, 1), inverse=True)[:, 0]
        return 10.0 ** np.clip(log_d, *_LOG10_RANGE)

    def to_dict(self) -> dict:
        return {"mlp": self.mlp.to_dict(), "x_scaler": self.x_scaler.to_dict(),
                "y_scaler": self.y_scaler.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DamageModel":
        return cls(nn.Mlp.from_dict(d["mlp"]), MinMaxScaler.from_dict(d["x_scaler"]),
                   MinMaxScaler.from_dict(d["y_scaler"]))


def fit_damage_model(x_train, d_train, x_val, d_val, spec: nn.MlpSpec,
                     config: nn.TrainConfig) -> tuple[DamageModel, nn.LearningCurves]:
    x = np.asarray(x_train, dtype=np.float64)
    d = np.asarray(d_train, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("no damage training samples")
    if np.any(d <= 0) or (len(d_val) and np.any(np.asarray(d_val) <= 0)):
        raise ValueError("damage targets must be positive")
    xs = fit_minmax(x)
    ys = fit_minmax(np.log10(d)[:, None])
    model = DamageModel(nn.init_mlp(spec, config.seed), xs, ys)
    val_xy = None
    if len(x_val):
        val_xy = (xs.transform(np.asarray(x_val, dtype=np.float64)), model.encode_target(d_val))
    net, curves = nn.train(model.mlp, (xs.transform(x), model.encode_target(d)), val_xy, config)
    model.mlp = net
    return model, curves


def fit_damage_models(train, val, gag_config: nn.TrainConfig = DAMAGE_TRAIN,
                      gm_config: nn.TrainConfig = DAMAGE_TRAIN, gag_spec: nn.MlpSpec = GAG_SPEC,
                      gm_spec: nn.MlpSpec = GM_SPEC):
    """Fit both damage regressors.

    ``train``/``val`` are sequences of ``(GagFeatures, GmFeatures, d_gag_per_flight,
    d_gm_per_flight)``. Returns ``((gag_model, gm_model), (gag_curves, gm_curves))``.
    """
    def cols(rows):
        if not rows:
            return np.empty((0, 9)), np.empty((0, 7)), np.empty(0), np.empty(0)
        return (np.array([r[0].as_array() for r in rows]), np.array([r[1].as_array() for r in rows]),
                np.array([r[2] for r in rows]), np.array([r[3] for r in rows]))

    xg, xm, dg, dm = cols(train)
    vg, vm, vdg, vdm = cols(val)
    gag, gag_curves = fit_damage_model(xg, dg, vg, vdg, gag_spec, gag_config)
    gm, gm_curves = fit_damage_model(xm, dm, vm, vdm, gm_spec, gm_config)
    return (gag, gm), (gag_curves, gm_curves)


def predict_per_flight_damage(models: tuple[DamageModel, DamageModel], gag_f: GagFeatures,
                              gm_f: GmFeatures) -> tuple[float, float]:
    gag, gm = models
    return float(gag.predict(gag_f.as_array())[0]), float(gm.predict(gm_f.as_array())[0])
