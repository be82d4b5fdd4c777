"""Fatigue life from accumulated damage via Miner's rule."""
from __future__ import annotations

from dataclasses import dataclass

from .domain import SampleKey


@dataclass(frozen=True)
class LifePrediction:
    key: SampleKey
    n: int
    d_gag: float
    d_gm: float
    life: float


def accumulate_damage(d_bar: float, n: float) -> float:
    if not d_bar > 0 or not n >= 1:
        raise ValueError("per-flight damage must be positive and n >= 1")
    return d_bar * n


def miner_life(n: float, d_gag: float, d_gm: float) -> float:
    """Flights to failure: total damage reaches 1 at ``n / (D_gag + D_gm)``."""
    total = d_gag + d_gm
    if not total > 0:
        raise ValueError("total damage must be positive; infinite life is out of scope")
    return n / total


def predict_life(key: SampleKey, n: int, d_gag_bar: float, d_gm_bar: float) -> LifePrediction:
    d_gag = accumulate_damage(d_gag_bar, n)
    d_gm = accumulate_damage(d_gm_bar, n)
    return LifePrediction(key, n, d_gag, d_gm, miner_life(n, d_gag, d_gm))
