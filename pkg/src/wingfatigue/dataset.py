"""CSV/JSON persistence for datasets, models, curves and reports.

CSV files carry a header row, UTF-8, LF line endings and floats at 17
significant digits, which round-trips every float64 exactly.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .domain import FlightParams, Mission, SampleKey, Segment, SegmentClass, StressVector
from .nn import LearningCurves
from .oracle import GroundTruthRecord, OracleConfig, OracleWorld, PseCoeffs
from .pipeline import PipelineModel

SEGMENTS_CSV = "segments.csv"
STRESSES_CSV = "stresses.csv"
LABELS_CSV = "labels.csv"
WORLD_JSON = "world.json"
DATASET_FILES = (SEGMENTS_CSV, STRESSES_CSV, LABELS_CSV, WORLD_JSON)

SEGMENT_HEADER = ["mission_id", "seg_index", "class", *FlightParams.names()]
STRESS_HEADER = ["mission_id", "seg_index", "pse", *StressVector.NAMES]
LABEL_HEADER = ["mission_id", "pse", "kt", "D_gag", "D_gm", "n", "life_N"]


class DataError(ValueError):
    pass


def fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path: Path, header: Sequence[str]) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or list(reader.fieldnames[: len(header)]) != list(header):
                raise DataError(f"{path}: expected header {list(header)}, got {reader.fieldnames}")
            return list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n",
                          encoding="utf-8")


def read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}") from exc


# --- dataset -----------------------------------------------------------------

@dataclass
class Dataset:
    world: OracleWorld
    records: list[GroundTruthRecord]

    def record_map(self) -> dict[SampleKey, GroundTruthRecord]:
        return {r.key: r for r in self.records}


def write_dataset(out_dir: str | os.PathLike, world: OracleWorld,
                  records: Sequence[GroundTruthRecord]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / SEGMENTS_CSV, SEGMENT_HEADER, (
        [m.id, i, seg.cls.value, *[float(v) for v in seg.params.as_array()]]
        for m in world.missions for i, seg in enumerate(m.segments)))
    pairs = {}
    for r in records:
        pairs.setdefault((r.key.mission_id, r.key.pse), r.stresses)
    write_csv(out / STRESSES_CSV, STRESS_HEADER, (
        [mid, i, pse, *[float(v) for v in s.as_array()]]
        for (mid, pse), stresses in pairs.items() for i, s in enumerate(stresses)))
    write_csv(out / LABELS_CSV, LABEL_HEADER, (
        [r.key.mission_id, r.key.pse, float(r.key.kt), float(r.d_gag), float(r.d_gm), r.n_flights,
         float(r.life)] for r in records))
    write_json(out / WORLD_JSON, {
        "seed": world.config.seed,
        "config": world.config.to_dict(),
        "n_flights": {m.id: m.n_flights for m in world.missions},
        "pse_coeffs": {str(p): {k: float(v).hex() for k, v in vars(c).items() if k != "pse"}
                       for p, c in world.pse_coeffs.items()},
    })


def read_dataset(data_dir: str | os.PathLike) -> Dataset:
    d = Path(data_dir)
    missing = [f for f in DATASET_FILES if not (d / f).is_file()]
    if missing:
        raise DataError(f"dataset {d} is missing {missing}")
    meta = read_json(d / WORLD_JSON)
    try:
        config = OracleConfig.from_dict(meta["config"])
        coeffs = {int(p): PseCoeffs(int(p), **{k: float.fromhex(v) for k, v in c.items()})
                  for p, c in meta["pse_coeffs"].items()}
        n_flights = {str(k): int(v) for k, v in meta["n_flights"].items()}

        segs: dict[str, list[Segment]] = {}
        for row in read_csv(d / SEGMENTS_CSV, SEGMENT_HEADER):
            params = FlightParams(**{n: float(row[n]) for n in FlightParams.names()})
            lst = segs.setdefault(row["mission_id"], [])
            if int(row["seg_index"]) != len(lst):
                raise DataError(f"segments of mission {row['mission_id']} are out of order")
            lst.append(Segment(SegmentClass(row["class"]), params))
        missions = tuple(Mission(mid, tuple(s), n_flights[mid]) for mid, s in segs.items())
        world = OracleWorld(config, coeffs, missions)

        stresses: dict[tuple[str, int], list[StressVector]] = {}
        for row in read_csv(d / STRESSES_CSV, STRESS_HEADER):
            stresses.setdefault((row["mission_id"], int(row["pse"])), []).append(
                StressVector(*(float(row[n]) for n in StressVector.NAMES)))

        records = []
        for row in read_csv(d / LABELS_CSV, LABEL_HEADER):
            key = SampleKey(row["mission_id"], int(row["pse"]), float(row["kt"]))
            st = stresses[(key.mission_id, key.pse)]
            if len(st) != len(world.mission(key.mission_id).segments):
                raise DataError(f"stress rows for {key.mission_id}/{key.pse} do not match segments")
            records.append(GroundTruthRecord(
                key=key, n_flights=int(row["n"]), stresses=tuple(st), gm_cycles=(), gag_cycle=None,
                d_gag=float(row["D_gag"]), d_gm=float(row["D_gm"]), life=float(row["life_N"])))
    except DataError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed dataset {d}: {exc!r}") from exc
    if not records:
        raise DataError(f"dataset {d} has no labels")
    for r in records:
        if not (r.d_gag > 0 and r.d_gm > 0 and math.isfinite(r.life)):
            raise DataError(f"invalid label for {r.key}")
    return Dataset(world, records)


# --- model and curves ----------------------------------------------------------

def write_model(path: str | os.PathLike, model: PipelineModel) -> None:
    write_json(Path(path), model.to_dict())


def read_model(path: str | os.PathLike) -> PipelineModel:
    obj = read_json(Path(path))
    try:
        return PipelineModel.from_dict(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed model file {path}: {exc!r}") from exc


CURVES_HEADER = ["model", "epoch", "train_loss", "val_loss"]


def write_curves(path: str | os.PathLike, curves: dict[str, LearningCurves]) -> None:
    write_csv(Path(path), CURVES_HEADER, (
        [name, epoch, float(tr), float(va)]
        for name, c in curves.items()
        for epoch, (tr, va) in enumerate(zip(c.train_loss, c.val_loss))))


def read_curves(path: str | os.PathLike) -> dict[str, LearningCurves]:
    out: dict[str, tuple[list, list]] = {}
    for row in read_csv(Path(path), CURVES_HEADER):
        tr, va = out.setdefault(row["model"], ([], []))
        tr.append(float(row["train_loss"]))
        va.append(float(row["val_loss"]))
    return {k: LearningCurves(v[0], v[1]) for k, v in out.items()}
