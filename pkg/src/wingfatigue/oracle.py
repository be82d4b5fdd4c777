"""Deterministic physics surrogate standing in for the CFD/FEM/load-spectrum
chain: mission generation, PSE stress transfer functions, gust/maneuver and
ground-air-ground cycle spectra, a Goodman-corrected Basquin S-N law and
Miner accumulation.

Everything is a closed-form function of the seed, so labels are exactly
reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    FlightParams,
    Mission,
    Phase,
    SampleKey,
    Segment,
    SegmentClass,
    StressVector,
    classify_phase,
)

RHO0 = 1.225
SCALE_HEIGHT = 8500.0
P0 = 101325.0
W_REF = 20000.0
Q_REF = 10000.0
OEW = 11000.0
SFC = 1.6e-5  # kg of fuel per N of thrust per second


@dataclass(frozen=True)
class Material:
    sigma_ultimate: float = 500.0
    basquin_C: float = 1e17
    basquin_b: float = 4.0

    def __post_init__(self):
        if not (self.sigma_ultimate > 0 and self.basquin_C > 0 and self.basquin_b > 0):
            raise ValueError("material constants must be positive")


@dataclass(frozen=True)
class OracleConfig:
    n_pse: int = 38
    n_missions: int = 7
    kt_set: tuple[float, ...] = (1.5, 2.0, 2.5, 3.0)
    material: Material = field(default_factory=Material)
    gust_rate: float = 0.02
    maneuver_rate: float = 0.005
    turn_rate: float = 0.002
    exceedance_scale: float = 0.35
    gag_mix: float = 0.8
    gm_bins: int = 8
    valley_ratio: float = 0.6
    truncation_sigmas: float = 6.0
    n_flights_range: tuple[int, int] = (800, 13000)
    shifted_mission: int = 0
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "kt_set", tuple(float(k) for k in self.kt_set))
        if isinstance(self.material, dict):
            object.__setattr__(self, "material", Material(**self.material))
        if not 1 <= self.n_pse <= 38:
            raise ValueError("n_pse must lie in 1..38")
        if self.n_missions < 3:
            raise ValueError("need at least 3 missions")
        if min(self.gust_rate, self.maneuver_rate, self.turn_rate) <= 0:
            raise ValueError("exceedance rates must be positive")
        if any(k <= 1 for k in self.kt_set):
            raise ValueError("kt values must exceed 1")
        if not (0 < self.exceedance_scale <= 1 and 0 <= self.gag_mix <= 1):
            raise ValueError("exceedance_scale must lie in (0, 1] and gag_mix in [0, 1]")
        if self.gm_bins < 1:
            raise ValueError("gm_bins must be >= 1")

    @property
    def rates(self) -> dict[str, float]:
        return {"gust": self.gust_rate, "maneuver": self.maneuver_rate, "turn": self.turn_rate}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kt_set"] = list(self.kt_set)
        d["n_flights_range"] = list(self.n_flights_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OracleConfig":
        d = dict(d)
        if "material" in d:
            d["material"] = Material(**d["material"])
        if "kt_set" in d:
            d["kt_set"] = tuple(d["kt_set"])
        if "n_flights_range" in d:
            d["n_flights_range"] = tuple(d["n_flights_range"])
        return cls(**d)


@dataclass(frozen=True)
class PseCoeffs:
    pse: int
    a: float
    b: float
    c: float
    A: float
    B: float
    C: float
    E: float
    F: float


@dataclass(frozen=True)
class CycleTriplet:
    sigma_max: float
    sigma_min: float
    occurrences: float

    def scaled(self, factor: float) -> "CycleTriplet":
        return CycleTriplet(self.sigma_max, self.sigma_min, self.occurrences * factor)


@dataclass(frozen=True)
class OracleWorld:
    config: OracleConfig
    pse_coeffs: dict[int, PseCoeffs]
    missions: tuple[Mission, ...]

    @property
    def pses(self) -> list[int]:
        return sorted(self.pse_coeffs)

    @property
    def mission_ids(self) -> list[str]:
        return [m.id for m in self.missions]

    @property
    def shifted_mission_id(self) -> str:
        return self.missions[self.config.shifted_mission].id

    def mission(self, mission_id: str) -> Mission:
        for m in self.missions:
            if m.id == mission_id:
                return m
        raise KeyError(f"unknown mission {mission_id!r}")

    def keys(self) -> list[SampleKey]:
        return [
            SampleKey(m.id, p, kt)
            for m in self.missions
            for p in self.pses
            for kt in self.config.kt_set
        ]


@dataclass(frozen=True)
class GroundTruthRecord:
    key: SampleKey
    n_flights: int
    stresses: tuple[StressVector, ...]
    gm_cycles: tuple[CycleTriplet, ...]
    gag_cycle: CycleTriplet | None  # None when read back from labels.csv
    d_gag: float
    d_gm: float
    life: float

    @property
    def d_gag_per_flight(self) -> float:
        return self.d_gag / self.n_flights

    @property
    def d_gm_per_flight(self) -> float:
        return self.d_gm / self.n_flights


def air_density(h: float) -> float:
    if h < 0:
        raise ValueError(f"altitude must be non-negative, got {h}")
    return RHO0 * math.exp(-h / SCALE_HEIGHT)


def mission_label(i: int) -> str:
    return chr(ord("A") + i) if i < 26 else f"M{i + 1}"


# --- world generation -------------------------------------------------------

# (flaps, tas, altitude, time, thrust) uniform ranges per segment class
_SEGMENT_RANGES = {
    SegmentClass.TAXI: ((0, 10), (5, 12), (0, 0), (400, 1200), (4e3, 8e3)),
    SegmentClass.CLIMB: ((5, 15), (110, 170), (1500, 4500), (400, 900), (55e3, 75e3)),
    SegmentClass.CRUISE: ((0, 0), (190, 250), (6000, 10500), (600, 2400), (22e3, 35e3)),
    SegmentClass.DESCENT: ((0, 0), (150, 200), (2000, 5000), (500, 1100), (5e3, 12e3)),
    SegmentClass.APPROACH: ((20, 35), (65, 85), (200, 700), (250, 500), (18e3, 28e3)),
}
_SHIFTED_CRUISE_ALT = (11500, 13500)
_PAYLOAD = (500, 3500)
_SHIFTED_PAYLOAD = (4500, 6000)
_RESERVE_FUEL = (800, 1500)


def _pse_coeffs(seed: int, pse: int, n_pse: int) -> PseCoeffs:
    rng = np.random.default_rng([seed, 1000 + pse])
    # PSEs are numbered root to tip; bending gains decay along the span
    u = (pse - 1) / max(1, n_pse - 1)
    span = 1.0 - 0.95 * u
    j = rng.normal(0.0, 0.04, size=8)
    return PseCoeffs(
        pse=pse,
        a=-320.0 * span * (1 + j[0]),
        b=-3.0e-2 * span * (1 + j[1]),
        c=1.0e-6 * span * j[2],
        A=370.0 * span * (1 + j[3]),
        B=2.5e-3 * span * (1 + j[4]),
        C=150.0 * span * j[5],
        E=0.6 * span * (1 + j[6]),
        F=35.0 * span * (1 + j[7]),
    )


def _cabin_dp(h: float) -> float:
    return min(P0 * (1.0 - math.exp(-h / SCALE_HEIGHT)), 58000.0)


def _make_mission(cfg: OracleConfig, index: int) -> Mission:
    rng = np.random.default_rng([cfg.seed, 2000 + index])
    shifted = index == cfg.shifted_mission
    n_flight_segments = int(rng.integers(4, 9))
    classes = (
        [SegmentClass.TAXI, SegmentClass.CLIMB]
        + [SegmentClass.CRUISE] * (n_flight_segments - 3)
        + [SegmentClass.DESCENT, SegmentClass.APPROACH]
    )
    pl = float(rng.uniform(*(_SHIFTED_PAYLOAD if shifted else _PAYLOAD)))
    zfw = OEW + pl
    cma = float(rng.uniform(22.0, 32.0))

    raw = []
    for cls in classes:
        flaps_r, tas_r, alt_r, time_r, thrust_r = _SEGMENT_RANGES[cls]
        if shifted and cls is SegmentClass.CRUISE:
            alt_r = _SHIFTED_CRUISE_ALT
        raw.append(
            (
                cls,
                float(rng.uniform(*flaps_r)),
                float(rng.uniform(*tas_r)),
                float(rng.uniform(*alt_r)),
                float(rng.uniform(*time_r)),
                float(rng.uniform(*thrust_r)),
            )
        )
    burns = [SFC * thrust * time for (_, _, _, _, time, thrust) in raw]
    fuel = sum(burns) + float(rng.uniform(*_RESERVE_FUEL))
    n_flights = int(rng.integers(cfg.n_flights_range[0], cfg.n_flights_range[1] + 1))

    segments = []
    for (cls, flaps, tas, alt, time, thrust), burn in zip(raw, burns):
        fw = fuel - 0.5 * burn
        fuel -= burn
        params = FlightParams(
            flaps=flaps,
            tas=tas,
            altitude=alt,
            time=time,
            distance=tas * time,
            thrust=thrust,
            pressure=_cabin_dp(alt),
            mass=zfw + fw,
            cma_pct=cma,
            zfw=zfw,
            pl=pl,
            fw=fw,
        )
        segments.append(Segment(cls, params))
    return Mission(mission_label(index), tuple(segments), n_flights)


def generate_fleet(config: OracleConfig | None = None) -> OracleWorld:
    cfg = config or OracleConfig()
    coeffs = {p: _pse_coeffs(cfg.seed, p, cfg.n_pse) for p in range(1, cfg.n_pse + 1)}
    missions = tuple(_make_mission(cfg, i) for i in range(cfg.n_missions))
    return OracleWorld(cfg, coeffs, missions)


# --- stresses and cycles ----------------------------------------------------

def oracle_stress(coeffs: PseCoeffs, params: FlightParams, phase: Phase) -> StressVector:
    if phase is Phase.GROUND:
        fw = params.fw
        return StressVector(coeffs.a + coeffs.b * fw + coeffs.c * fw * fw, 0.0, 0.0, 0.0)
    rho = air_density(params.altitude)
    load = params.mass / W_REF
    q = 0.5 * rho * params.tas ** 2
    return StressVector(
        one_g=coeffs.A * load * (1 + 0.002 * params.flaps) - coeffs.B * params.fw + coeffs.C,
        d_vman=0.5 * coeffs.A * load,
        d_vgust=coeffs.E * rho * params.tas / load,
        d_turn=coeffs.F * load * (1 + q / Q_REF),
    )


def gm_cycles(s: StressVector, t_seg: float, config: OracleConfig | None = None,
              bins: int | None = None) -> list[CycleTriplet]:
    """Expected per-flight gust/maneuver/turn cycles for one flight segment.

    Each source has an exponential exceedance curve ``rate*t*exp(-x/scale)``
    truncated at ``truncation_sigmas`` scales and split into equal-width
    amplitude bins; a bin's count is the exceedance drop across it.
    """
    cfg = config or OracleConfig()
    bins = bins or cfg.gm_bins
    if t_seg <= 0:
        raise ValueError("segment time must be positive")
    width = cfg.truncation_sigmas / bins
    out = []
    for rate, incr in ((cfg.gust_rate, s.d_vgust), (cfg.maneuver_rate, s.d_vman),
                       (cfg.turn_rate, s.d_turn)):
        scale = cfg.exceedance_scale * incr
        if scale <= 0:
            continue
        total = rate * t_seg
        for i in range(1, bins + 1):
            occ = total * (math.exp(-(i - 1) * width) - math.exp(-i * width))
            x = scale * (i - 0.5) * width
            out.append(CycleTriplet(s.one_g + x, s.one_g - cfg.valley_ratio * x, occ))
    return out


def gag_cycle(flight: Sequence[StressVector], ground: Sequence[StressVector], t_flight: float,
              t_ground: float, n: int, config: OracleConfig | None = None) -> CycleTriplet:
    """Once-per-flight ground-air-ground cycle.

    The peak grows with the expected largest dynamic excursion over the whole
    flight, ``log(1 + total_rate * t_flight)`` dominant-increment scales.
    """
    cfg = config or OracleConfig()
    if not flight or not ground:
        raise ValueError("a GAG cycle needs both flight and ground stresses")
    if t_flight <= 0:
        raise ValueError("t_flight must be positive")
    growth = math.log1p((cfg.gust_rate + cfg.maneuver_rate + cfg.turn_rate) * t_flight)
    peak = max(
        s.one_g + cfg.gag_mix * cfg.exceedance_scale * max(s.d_vgust, s.d_vman, s.d_turn) * growth
        for s in flight
    )
    valley = min(s.one_g for s in ground)
    return CycleTriplet(peak, valley, float(n))


def cycles_to_failure(sigma_max: float, sigma_min: float, kt: float,
                      material: Material | None = None) -> float:
    """Goodman-corrected Basquin life ``C / (kt * sigma_ar)**b``."""
    mat = material or Material()
    amp = 0.5 * (sigma_max - sigma_min)
    mean = 0.5 * (sigma_max + sigma_min)
    if mean >= mat.sigma_ultimate:
        raise ValueError(f"mean stress {mean:.1f} MPa reaches ultimate {mat.sigma_ultimate}")
    sar = amp / (1.0 - max(0.0, mean) / mat.sigma_ultimate)
    if sar <= 0:
        return math.inf
    return mat.basquin_C / (kt * sar) ** mat.basquin_b


def miner_damage(cycles: Iterable[CycleTriplet], kt: float, material: Material | None = None) -> float:
    total = 0.0
    for c in cycles:
        nf = cycles_to_failure(c.sigma_max, c.sigma_min, kt, material)
        if c.occurrences and math.isfinite(nf):
            total += c.occurrences / nf
    return total


def label_sample(world: OracleWorld, key: SampleKey) -> GroundTruthRecord:
    cfg = world.config
    if key.pse not in world.pse_coeffs or key.kt not in cfg.kt_set:
        raise KeyError(f"unknown sample key {key}")
    mission = world.mission(key.mission_id)
    coeffs = world.pse_coeffs[key.pse]
    stresses = tuple(oracle_stress(coeffs, s.params, classify_phase(s)) for s in mission.segments)
    flight, ground, per_flight = [], [], []
    for seg, st in zip(mission.segments, stresses):
        if seg.phase is Phase.FLIGHT:
            flight.append(st)
            per_flight.extend(gm_cycles(st, seg.params.time, cfg))
        else:
            ground.append(st)
    n = mission.n_flights
    gag = gag_cycle(flight, ground, mission.t_flight, mission.t_ground, n, cfg)
    d_gm = miner_damage([c.scaled(n) for c in per_flight], key.kt, cfg.material)
    d_gag = miner_damage([gag], key.kt, cfg.material)
    return GroundTruthRecord(
        key=key,
        n_flights=n,
        stresses=stresses,
        gm_cycles=tuple(per_flight),
        gag_cycle=gag,
        d_gag=d_gag,
        d_gm=d_gm,
        life=n / (d_gag + d_gm),
    )


def label_world(world: OracleWorld) -> list[GroundTruthRecord]:
    return [label_sample(world, k) for k in world.keys()]
