"""Test-split evaluation and split-adequacy audit reports."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import phase2, stats
from .config import RunConfig
from .dataset import Dataset
from .domain import Phase, StressVector, fit_minmax
from .oracle import GroundTruthRecord
from .pipeline import PipelineModel, SamplePrediction, predict_keys, predict_stresses
from .stats import TEST, TRAIN, VAL

TARGETS = ("D_gag", "D_gm", "life")
CONTINUOUS_VARS = ("one_g_flight", "one_g_ground", "d_vgust", "d_vman", "d_turn", "N")
CATEGORICAL_VARS = ("kt", "n", "t_flight", "t_ground")


class SplitMismatch(ValueError):
    pass


def check_compatible(model: PipelineModel, dataset: Dataset) -> None:
    pses = set(dataset.world.pses)
    missions = set(dataset.world.mission_ids)
    if set(model.split.assignment) != pses:
        raise SplitMismatch("model split covers different PSEs than the dataset")
    for pse, roles in model.split.assignment.items():
        if set(roles) != missions:
            raise SplitMismatch(f"model split for PSE {pse} names missions absent from the dataset")


def records_in_role(dataset: Dataset, model: PipelineModel, role: str) -> list[GroundTruthRecord]:
    return [r for r in dataset.records if model.split.role(r.key.pse, r.key.mission_id) == role]


@dataclass
class ScoredSample:
    record: GroundTruthRecord
    pred: SamplePrediction

    def values(self, target: str) -> tuple[float, float]:
        """(predicted, true) for a target."""
        life = self.pred.life
        if target == "D_gag":
            return life.d_gag, self.record.d_gag
        if target == "D_gm":
            return life.d_gm, self.record.d_gm
        return life.life, self.record.life

    def error(self, target: str) -> float:
        p, t = self.values(target)
        return float(stats.relative_error(p, t))


def score(model: PipelineModel, dataset: Dataset, records: Sequence[GroundTruthRecord]) -> list[ScoredSample]:
    preds = predict_keys(model, dataset.world, [r.key for r in records])
    return [ScoredSample(r, p) for r, p in zip(records, preds)]


def _summary(errors) -> dict | None:
    return stats.error_summary(errors).to_dict() if len(errors) else None


def _phase1_report(model: PipelineModel, dataset: Dataset, records: Sequence[GroundTruthRecord]) -> dict:
    """Stress errors on test segments, flight per component and ground 1g."""
    seen = set()
    flight_rows, ground_err = [], []
    for r in records:
        k = (r.key.mission_id, r.key.pse)
        if k in seen:
            continue
        seen.add(k)
        mission = dataset.world.mission(r.key.mission_id)
        pred = predict_stresses(model, mission, r.key.pse)
        for i, (seg, p, t) in enumerate(zip(mission.segments, pred, r.stresses)):
            if seg.phase is Phase.FLIGHT:
                flight_rows.append((r.key.mission_id, r.key.pse, i,
                                    stats.relative_error(p.as_array(), t.as_array())))
            else:
                ground_err.append(float(stats.relative_error(p.one_g, t.one_g)))
    err = np.array([row[3] for row in flight_rows]).reshape(-1, 4)
    comps = StressVector.NAMES
    out = {
        "flight": {
            "count": len(flight_rows),
            "mre": {c: float(err[:, j].mean()) if len(err) else None for j, c in enumerate(comps)},
            "summary": {c: _summary(err[:, j]) for j, c in enumerate(comps)},
            "mre_by_mission": {
                c: stats.grouped_mre((row[0], row[3][j]) for row in flight_rows) for j, c in enumerate(comps)},
            "mre_by_pse": {
                c: {str(k): v for k, v in stats.grouped_mre((row[1], row[3][j]) for row in flight_rows).items()}
                for j, c in enumerate(comps)},
        },
        "ground": {"count": len(ground_err), "summary": _summary(ground_err)},
    }
    return out


def interval_report(cfg: RunConfig, calib: Sequence[ScoredSample], test: Sequence[ScoredSample]) -> dict | None:
    """Bootstrap P95 life-error bound from calibration samples, coverage on test (usage region)."""
    c = [s.error("life") for s in calib if cfg.in_roi(s.record.life)]
    t = [s.error("life") for s in test if cfg.in_roi(s.record.life)]
    if not c or not t:
        return None
    iv = stats.bootstrap_p95_interval(c, cfg.bootstrap_resamples, cfg.seed)
    cov, cov_ci = stats.coverage_check(t, iv.epsilon, cfg.bootstrap_resamples, cfg.seed)
    out = stats.PredictionInterval(iv.epsilon, iv.p95_mean, iv.ci95, cov, cov_ci).to_dict()
    out.update(n_calibration=len(c), n_test=len(t))
    return out


def evaluate(model: PipelineModel, dataset: Dataset, cfg: RunConfig) -> tuple[dict, dict[str, tuple]]:
    """Report dict plus plot-ready tables ``{name: (header, rows)}``."""
    check_compatible(model, dataset)
    test = score(model, dataset, records_in_role(dataset, model, TEST))
    calib = score(model, dataset, records_in_role(dataset, model, VAL))
    rows = []
    for s in test:
        k = s.record.key
        row = {"mission_id": k.mission_id, "pse": k.pse, "kt": k.kt, "n": s.record.n_flights,
               "in_roi": cfg.in_roi(s.record.life)}
        for t in TARGETS:
            p, tr = s.values(t)
            row.update({f"{t}_true": tr, f"{t}_pred": p, f"{t}_err": s.error(t)})
        rows.append(row)

    roi_rows = [r for r in rows if r["in_roi"]]
    report = {
        "seed": cfg.seed,
        "split_seed": model.split.seed,
        "roi": list(cfg.roi),
        "n_test": len(rows),
        "n_test_roi": len(roi_rows),
        "rows": rows,
        "summaries": {
            "full": {t: _summary([r[f"{t}_err"] for r in rows]) for t in TARGETS},
            "roi": {t: _summary([r[f"{t}_err"] for r in roi_rows]) for t in TARGETS},
        },
        "grouped_mre": {
            g: {t: {str(k): v for k, v in stats.grouped_mre((r[g], r[f"{t}_err"]) for r in rows).items()}
                for t in TARGETS}
            for g in ("pse", "mission_id", "kt")
        } if rows else {},
        "spearman": {},
        "tukey": {},
        "phase1": _phase1_report(model, dataset, records_in_role(dataset, model, TEST)),
        "interval": interval_report(cfg, calib, test),
    }
    for t in ("D_gag", "D_gm"):
        truth = [r[f"{t}_true"] for r in rows]
        err = [r[f"{t}_err"] for r in rows]
        if len(rows) >= 3:
            rho, p = stats.spearman(truth, err)
            report["spearman"][t] = {"rho": rho, "p": p}
        if rows:
            thr, idx = stats.tukey_fence(err)
            report["tukey"][t] = {"threshold": thr, "outliers": idx}

    tables = {}
    key_cols = ["mission_id", "pse", "kt"]
    for t in TARGETS:
        tables[f"scatter_{t}.csv"] = (
            key_cols + ["true", "pred", "rel_err", "in_roi"],
            [[r["mission_id"], r["pse"], r["kt"], r[f"{t}_true"], r[f"{t}_pred"], r[f"{t}_err"],
              int(r["in_roi"])] for r in rows])
    tables["grouped_mre.csv"] = (
        ["grouping", "group", "target", "mre"],
        [[g, k, t, v] for g, by_t in report["grouped_mre"].items() for t, d in by_t.items()
         for k, v in d.items()])
    p1 = report["phase1"]["flight"]
    tables["phase1_grouped_mre.csv"] = (
        ["grouping", "group", "component", "mre"],
        [[g, k, c, v] for g in ("mission", "pse") for c, d in p1[f"mre_by_{g}"].items()
         for k, v in d.items()])
    return report, tables


# --- split audit ----------------------------------------------------------------

def audit_variables(dataset: Dataset, records: Sequence[GroundTruthRecord]) -> dict[str, np.ndarray]:
    """Phase-II inputs (from true stresses) and life, one entry per sample."""
    cols = {v: [] for v in CATEGORICAL_VARS + CONTINUOUS_VARS}
    for r in records:
        mission = dataset.world.mission(r.key.mission_id)
        g, _ = phase2.build_damage_features(list(r.stresses), mission, r.key.kt)
        for name in ("kt", "n", "t_flight", "t_ground", "one_g_flight", "one_g_ground", "d_vgust",
                     "d_vman", "d_turn"):
            cols[name].append(getattr(g, name))
        cols["N"].append(r.life)
    return {k: np.asarray(v, dtype=np.float64) for k, v in cols.items()}


def feature_matrix(dataset: Dataset, records: Sequence[GroundTruthRecord]) -> np.ndarray:
    if not records:
        return np.empty((0, len(phase2.GagFeatures.names())))
    return np.array([
        phase2.build_damage_features(list(r.stresses), dataset.world.mission(r.key.mission_id),
                                     r.key.kt)[0].as_array()
        for r in records])


def audit(model: PipelineModel, dataset: Dataset, cfg: RunConfig,
          extra_test: Sequence[GroundTruthRecord] = ()) -> dict:
    """Train-vs-test distribution tests, proximity flags, interval and coverage.

    ``extra_test`` records are appended to the test set (used to plant known
    duplicates when checking the proximity audit).
    """
    check_compatible(model, dataset)
    train = records_in_role(dataset, model, TRAIN)
    test = records_in_role(dataset, model, TEST) + list(extra_test)
    if not train or not test:
        raise SplitMismatch("split has an empty train or test set")
    a = audit_variables(dataset, train)
    b = audit_variables(dataset, test)
    battery = {}
    for v in CONTINUOUS_VARS:
        d, p_ks = stats.ks_2sample(a[v], b[v])
        a2, p_ad = stats.ad_2sample(a[v], b[v])
        battery[v] = {"KS": {"stat": d, "p": p_ks}, "AD": {"stat": a2, "p": p_ad}}
    for v in CATEGORICAL_VARS:
        cats = sorted(set(a[v].tolist()) | set(b[v].tolist()))
        try:
            chi, p = stats.chi2_2sample(a[v], b[v], cats)
            battery[v] = {"chi2": {"stat": chi, "p": p}}
        except ValueError as exc:
            battery[v] = {"chi2": {"stat": None, "p": None, "note": str(exc)}}

    xs = fit_minmax(feature_matrix(dataset, train))
    prox = stats.proximity_audit(xs.transform(feature_matrix(dataset, train)),
                                 xs.transform(feature_matrix(dataset, test)),
                                 cfg.alpha_close, cfg.alpha_far)
    scored = score(model, dataset, test)
    life_err = np.array([s.error("life") for s in scored])

    def flagged(idx):
        return {
            "indices": idx,
            "keys": [[test[i].key.mission_id, test[i].key.pse, test[i].key.kt] for i in idx],
            "fraction": len(idx) / len(test),
            "life_mre": float(life_err[idx].mean()) if idx else None,
        }

    calib = score(model, dataset, records_in_role(dataset, model, VAL))
    return {
        "seed": cfg.seed,
        "split_seed": model.split.seed,
        "n_train": len(train),
        "n_test": len(test),
        "battery": battery,
        "proximity": {
            "close_threshold": prox.close_threshold,
            "far_threshold": prox.far_threshold,
            "p_hacking": flagged(prox.p_hacking_indices),
            "isolated": flagged(prox.isolated_indices),
            "nearest_train_distance": prox.nearest_train_distance,
        },
        "interval": interval_report(cfg, calib, scored),
    }
