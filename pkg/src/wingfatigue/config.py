"""Run configuration: defaults, JSON config file, flag and env overrides.

Precedence, lowest first: built-in defaults, config file, ``FATIGUE_SEED``,
``--seed``. The single global seed drives the oracle, the split and every
network initialisation.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .nn import TrainConfig
from .oracle import OracleConfig
from .phase1 import FLIGHT_TRAIN
from .phase2 import DAMAGE_TRAIN
from .pipeline import PREDICTED, PipelineConfig

SEED_ENV = "FATIGUE_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    oracle: OracleConfig = field(default_factory=OracleConfig)
    flight: TrainConfig = FLIGHT_TRAIN
    gag: TrainConfig = DAMAGE_TRAIN
    gm: TrainConfig = DAMAGE_TRAIN
    phase2_inputs: str = PREDICTED
    roi: tuple[float, float] = (1e3, 1e6)
    bootstrap_resamples: int = 10000
    alpha_close: float = 0.01
    alpha_far: float = 0.01

    def __post_init__(self):
        lo, hi = self.roi
        if not 0 < lo < hi:
            raise ConfigError(f"roi must satisfy 0 < lo < hi, got {self.roi}")
        if self.bootstrap_resamples < 1000:
            raise ConfigError("bootstrap_resamples must be >= 1000")
        if not (0 < self.alpha_close < 1 and 0 < self.alpha_far < 1):
            raise ConfigError("alpha_close and alpha_far must lie in (0, 1)")

    @property
    def world_config(self) -> OracleConfig:
        return replace(self.oracle, seed=self.seed)

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(self.flight, self.gag, self.gm, self.seed, self.phase2_inputs)

    def in_roi(self, life: float) -> bool:
        return self.roi[0] < life < self.roi[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["oracle"] = self.oracle.to_dict()
        d["roi"] = list(self.roi)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "oracle" in kw:
                kw["oracle"] = OracleConfig.from_dict(kw["oracle"])
            for name, base in (("flight", FLIGHT_TRAIN), ("gag", DAMAGE_TRAIN), ("gm", DAMAGE_TRAIN)):
                if name in kw:
                    kw[name] = replace(base, **kw[name])
            if "roi" in kw:
                kw["roi"] = tuple(float(v) for v in kw["roi"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike | None = None, seed: int | None = None,
                env: dict | None = None) -> RunConfig:
    env = os.environ if env is None else env
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    cfg = RunConfig.from_dict(data)
    if env.get(SEED_ENV):
        try:
            cfg = replace(cfg, seed=int(env[SEED_ENV]))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg
