"""Stress prediction: per-PSE quadratic fits in fuel weight for ground
segments and one shared MLP for flight segments."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import nn
from .domain import FlightParams, MinMaxScaler, StressVector, binary_encode_pse, fit_minmax

FLIGHT_FEATURES = ("flaps", "altitude", "tas", "mass", "fw", "thrust")
FLIGHT_INPUT_DIM = 6 + len(FLIGHT_FEATURES)
FLIGHT_SPEC = nn.MlpSpec(FLIGHT_INPUT_DIM, (50, 50), 4, "relu", 0.0)
FLIGHT_TRAIN = nn.TrainConfig(lr0=8e-3, epochs=1000, batch_size=256, scheduler_gamma=0.975,
                              scheduler_step=30)


class RankError(ValueError):
    pass


@dataclass(frozen=True)
class GroundPolyModel:
    coeffs: dict[int, tuple[float, float, float]]

    def to_dict(self) -> dict:
        return {str(p): [float(v).hex() for v in c] for p, c in self.coeffs.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundPolyModel":
        return cls({int(p): tuple(float.fromhex(v) for v in c) for p, c in d.items()})


def _quadratic_ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    # centre and scale x so the normal equations stay well conditioned
    mu = x.mean()
    sd = x.std()
    if sd == 0:
        sd = 1.0
    z = (x - mu) / sd
    design = np.column_stack([np.ones_like(z), z, z * z])
    g0, g1, g2 = np.linalg.solve(design.T @ design, design.T @ y)
    b2 = g2 / sd ** 2
    b1 = g1 / sd - 2.0 * g2 * mu / sd ** 2
    b0 = g0 - g1 * mu / sd + g2 * mu ** 2 / sd ** 2
    return float(b0), float(b1), float(b2)


def fit_ground_model(samples: Iterable[tuple[int, float, float]]) -> GroundPolyModel:
    """Ordinary least squares ``one_g ~ b0 + b1*fw + b2*fw**2`` for each PSE."""
    by_pse = defaultdict(list)
    for pse, fw, one_g in samples:
        by_pse[int(pse)].append((fw, one_g))
    coeffs = {}
    for pse, rows in sorted(by_pse.items()):
        arr = np.asarray(rows, dtype=np.float64)
        if np.unique(arr[:, 0]).size < 3:
            raise RankError(f"PSE {pse}: need at least 3 distinct fuel weights")
        coeffs[pse] = _quadratic_ols(arr[:, 0], arr[:, 1])
    return GroundPolyModel(coeffs)


def predict_ground(model: GroundPolyModel, pse: int, fw: float) -> StressVector:
    if pse not in model.coeffs:
        raise KeyError(f"PSE {pse} has no fitted ground model")
    b0, b1, b2 = model.coeffs[pse]
    return StressVector(b0 + b1 * fw + b2 * fw * fw, 0.0, 0.0, 0.0)


@dataclass
class FlightStressModel:
    mlp: nn.Mlp
    x_scaler: MinMaxScaler
    y_scaler: MinMaxScaler

    def to_dict(self) -> dict:
        return {"mlp": self.mlp.to_dict(), "x_scaler": self.x_scaler.to_dict(),
                "y_scaler": self.y_scaler.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "FlightStressModel":
        return cls(nn.Mlp.from_dict(d["mlp"]), MinMaxScaler.from_dict(d["x_scaler"]),
                   MinMaxScaler.from_dict(d["y_scaler"]))


def flight_features(pse: int, params: FlightParams) -> np.ndarray:
    """[6 PSE bits, flaps, altitude, tas, mass, fw, thrust]."""
    return np.concatenate([binary_encode_pse(pse), [getattr(params, f) for f in FLIGHT_FEATURES]])


def _stack(samples):
    x = np.array([flight_features(p, prm) for p, prm, _ in samples])
    y = np.array([s.as_array() for _, _, s in samples])
    return x, y


def fit_flight_model(train: Sequence[tuple[int, FlightParams, StressVector]],
                     val: Sequence[tuple[int, FlightParams, StressVector]],
                     config: nn.TrainConfig = FLIGHT_TRAIN,
                     spec: nn.MlpSpec = FLIGHT_SPEC) -> tuple[FlightStressModel, nn.LearningCurves]:
    if not train:
        raise ValueError("no flight training samples")
    x, y = _stack(train)
    xs = fit_minmax(x)
    ys = fit_minmax(y)
    val_xy = None
    if val:
        xv, yv = _stack(val)
        val_xy = (xs.transform(xv), ys.transform(yv))
    net = nn.init_mlp(spec, config.seed)
    net, curves = nn.train(net, (xs.transform(x), ys.transform(y)), val_xy, config)
    return FlightStressModel(net, xs, ys), curves


def predict_flight_batch(model: FlightStressModel, pses: Sequence[int],
                         params: Sequence[FlightParams]) -> np.ndarray:
    x = np.array([flight_features(p, prm) for p, prm in zip(pses, params)])
    return model.y_scaler.transform(nn.forward(model.mlp, model.x_scaler.transform(x)), inverse=True)


def predict_flight(model: FlightStressModel, pse: int, params: FlightParams) -> StressVector:
    return StressVector.from_array(predict_flight_batch(model, [pse], [params])[0])
