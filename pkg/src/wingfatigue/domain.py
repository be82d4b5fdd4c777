"""Domain types shared by every pipeline stage.

Flight parameters are SI (m, s, kg, N, Pa) except flaps (degrees) and
CG position (% MAC). Stresses are MPa throughout.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

N_PSE_MAX = 38
PSE_BITS = 6


class Phase(str, enum.Enum):
    GROUND = "Ground"
    FLIGHT = "Flight"


class SegmentClass(str, enum.Enum):
    TAXI = "Taxi"
    CLIMB = "Climb"
    CRUISE = "Cruise"
    DESCENT = "Descent"
    APPROACH = "Approach"

    @property
    def phase(self) -> Phase:
        return Phase.GROUND if self is SegmentClass.TAXI else Phase.FLIGHT


@dataclass(frozen=True)
class FlightParams:
    flaps: float
    tas: float
    altitude: float
    time: float
    distance: float
    thrust: float
    pressure: float
    mass: float
    cma_pct: float
    zfw: float
    pl: float
    fw: float

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError(f"segment time must be positive, got {self.time}")
        if self.tas < 0 or self.fw < 0 or self.pl < 0 or self.altitude < 0:
            raise ValueError("tas, fw, pl and altitude must be non-negative")
        if self.mass < self.zfw:
            raise ValueError(f"mass {self.mass} below zero-fuel weight {self.zfw}")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names()], dtype=np.float64)


@dataclass(frozen=True)
class StressVector:
    one_g: float
    d_vman: float = 0.0
    d_vgust: float = 0.0
    d_turn: float = 0.0

    NAMES = ("one_g", "d_vman", "d_vgust", "d_turn")

    def as_array(self) -> np.ndarray:
        return np.array([self.one_g, self.d_vman, self.d_vgust, self.d_turn])

    @classmethod
    def from_array(cls, a) -> "StressVector":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class Segment:
    cls: SegmentClass
    params: FlightParams

    @property
    def phase(self) -> Phase:
        return classify_phase(self)


@dataclass(frozen=True)
class Mission:
    id: str
    segments: tuple[Segment, ...]
    n_flights: int

    def __post_init__(self):
        phases = {s.phase for s in self.segments}
        if phases != {Phase.GROUND, Phase.FLIGHT}:
            raise ValueError(f"mission {self.id} needs both ground and flight segments")

    @property
    def t_flight(self) -> float:
        return sum(s.params.time for s in self.segments if s.phase is Phase.FLIGHT)

    @property
    def t_ground(self) -> float:
        return sum(s.params.time for s in self.segments if s.phase is Phase.GROUND)


@dataclass(frozen=True, order=True)
class SampleKey:
    mission_id: str
    pse: int
    kt: float

    def __post_init__(self):
        if not 1 <= self.pse <= N_PSE_MAX:
            raise ValueError(f"pse must be in 1..{N_PSE_MAX}, got {self.pse}")
        if not self.kt > 1:
            raise ValueError(f"kt must exceed 1, got {self.kt}")


def classify_phase(segment: Segment) -> Phase:
    return segment.cls.phase


def binary_encode_pse(pse: int) -> np.ndarray:
    """Unsigned 6-bit binary encoding of a PSE label, most significant bit first."""
    if not isinstance(pse, (int, np.integer)) or not 1 <= pse <= N_PSE_MAX:
        raise ValueError(f"pse must be an integer in 1..{N_PSE_MAX}, got {pse!r}")
    return np.array([(int(pse) >> k) & 1 for k in range(PSE_BITS - 1, -1, -1)], dtype=np.float64)


@dataclass(frozen=True)
class MinMaxScaler:
    min: np.ndarray
    max: np.ndarray

    @property
    def width(self) -> int:
        return self.min.shape[0]

    def transform(self, x, inverse: bool = False) -> np.ndarray:
        return apply_minmax(self, x, inverse=inverse)

    def to_dict(self) -> dict:
        return {"min": [float(v).hex() for v in self.min], "max": [float(v).hex() for v in self.max]}

    @classmethod
    def from_dict(cls, d) -> "MinMaxScaler":
        return cls(
            np.array([float.fromhex(v) for v in d["min"]]),
            np.array([float.fromhex(v) for v in d["max"]]),
        )


def fit_minmax(columns) -> MinMaxScaler:
    x = np.asarray(columns, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    return MinMaxScaler(x.min(axis=0), x.max(axis=0))


def apply_minmax(scaler: MinMaxScaler, row, inverse: bool = False) -> np.ndarray:
    """Map rows (1-D or 2-D) to [0, 1] per column, or back when ``inverse``.

    Constant columns map to 0 going forward and back to the stored constant.
    """
    x = np.asarray(row, dtype=np.float64)
    if x.shape[-1] != scaler.width:
        raise ValueError(f"row width {x.shape[-1]} does not match scaler width {scaler.width}")
    span = scaler.max - scaler.min
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    if inverse:
        return np.where(degenerate, scaler.min, x * safe + scaler.min)
    return np.where(degenerate, 0.0, (x - scaler.min) / safe)


def time_weighted_average(values: Sequence[float], durations: Sequence[float]) -> float:
    v = np.asarray(values, dtype=np.float64)
    t = np.asarray(durations, dtype=np.float64)
    if v.shape != t.shape or v.ndim != 1 or v.size == 0:
        raise ValueError("values and durations must be equal-length non-empty vectors")
    if np.any(t <= 0):
        raise ValueError("durations must be positive")
    avg = float(np.dot(v, t) / t.sum())
    # guard rounding outside the convex hull
    return min(max(avg, float(v.min())), float(v.max()))
