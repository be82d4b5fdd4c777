"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import itertools
import json
import math
import time

import numpy as np
import pytest

import brute_force_oracle as bf
from wingfatigue import dataset as ds
from wingfatigue import nn, stats
from wingfatigue.config import RunConfig
from wingfatigue.dataset import Dataset
from wingfatigue.domain import StressVector
from wingfatigue.evaluation import evaluate
from wingfatigue.oracle import generate_fleet, label_world
from wingfatigue.pipeline import PipelineModel, fit_pipeline, predict_keys
from wingfatigue.stats import split_assign

SEED = 42


def run_benchmark(seed=SEED):
    t0 = time.perf_counter()
    cfg = RunConfig(seed=seed)
    world = generate_fleet(cfg.world_config)
    records = label_world(world)
    split = split_assign(world.pses, world.mission_ids, cfg.seed)
    fit = fit_pipeline(world, records, split, cfg.pipeline)
    report, _ = evaluate(fit.model, Dataset(world, records), cfg)
    return {"world": world, "records": records, "split": split, "fit": fit, "report": report,
            "cfg": cfg, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def bench():
    return run_benchmark()


def test_1_gradient_correctness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(20):
        depth = int(rng.integers(1, 4))
        dims = [int(v) for v in rng.integers(1, 17, size=depth + 2)]
        net = nn.init_mlp(nn.MlpSpec(dims[0], tuple(dims[1:-1]), dims[-1], "tanh"), i)
        x = rng.normal(size=(8, dims[0]))
        y = rng.normal(size=(8, dims[-1]))
        worst = max(worst, nn.gradient_check(net, (x, y), eps=1e-6))
    secs = time.perf_counter() - t0
    verdict(1, "gradient check", worst < 1e-4 and secs < 30,
            f"max deviation {worst:.2e} (< 1e-4), {secs:.1f} s (< 30 s)")


def test_2_oracle_self_consistency(verdict):
    world = generate_fleet()
    records = label_world(world)
    worst = max(abs(r.life * (r.d_gag + r.d_gm) - r.n_flights) / r.n_flights for r in records)
    spots = records[::53]
    exact = sum((r.d_gag, r.d_gm, r.life) == bf.label(world, r.key) for r in spots)
    verdict(2, "oracle self-consistency",
            worst <= 1e-9 and len(spots) >= 10 and exact == len(spots),
            f"life identity max rel {worst:.1e} over {len(records)} samples; "
            f"brute force bitwise match {exact}/{len(spots)} spot keys")


def test_3_ground_exactness(bench, verdict):
    g = bench["report"]["phase1"]["ground"]["summary"]
    verdict(3, "ground model exactness", g["mean"] < 1e-6,
            f"test ground MRE {g['mean']:.2e}% (max {g['max']:.2e}%)")


def test_4_end_to_end_benchmark(bench, verdict):
    rep = bench["report"]
    flight = rep["phase1"]["flight"]["mre"]
    full = rep["summaries"]["full"]
    roi = rep["summaries"]["roi"]["life"]
    ok = (all(v <= 5 for v in flight.values()) and full["D_gag"]["median"] <= 10
          and full["D_gm"]["median"] <= 10 and roi is not None and roi["median"] <= 10
          and bench["seconds"] <= 15 * 60)
    comps = ", ".join(f"{k} {v:.2f}%" for k, v in flight.items())
    verdict(4, "end-to-end benchmark", ok,
            f"flight MRE [{comps}] (<= 5%); median D_gag {full['D_gag']['median']:.2f}%, "
            f"D_gm {full['D_gm']['median']:.2f}% (<= 10%); life median in usage region "
            f"{roi['median']:.2f}% over {rep['n_test_roi']} samples (<= 10%); "
            f"wall {bench['seconds']:.0f} s (<= 900 s)")


def test_5_qualitative_structure(bench, verdict):
    rep = bench["report"]
    sp = rep["spearman"]["D_gag"]
    p1 = rep["phase1"]["flight"]
    shifted = bench["world"].shifted_mission_id
    comps = StressVector.NAMES
    overall = float(np.mean([p1["mre"][c] for c in comps]))
    mission = float(np.mean([p1["mre_by_mission"][c][shifted] for c in comps]))
    verdict(5, "qualitative structure", sp["rho"] < 0 and sp["p"] < 0.05 and mission >= overall,
            f"Spearman(D_gag, error) rho {sp['rho']:.3f}, p {sp['p']:.4f}; shifted mission "
            f"{shifted} flight MRE {mission:.2f}% vs mean {overall:.2f}%")


def _null_rate(test, trials=2000):
    hits = 0
    for s in range(trials):
        rng = np.random.default_rng([s, 7])
        hits += test(rng) < 0.05
    return hits / trials


def _midranks(v):
    return [sum(u < x for u in v) + (sum(u == x for u in v) + 1) / 2 for x in v]


def _brute_rho(x, y):
    rx, ry = _midranks(x), _midranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return num / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))


def test_6_statistical_tests(verdict):
    d, p_exact = stats.ks_2sample([1, 2], [3, 4])
    ks_rate = _null_rate(lambda r: stats.ks_2sample(r.normal(size=50), r.normal(size=50))[1])
    chi_rate = _null_rate(lambda r: stats.chi2_2sample(r.integers(0, 4, 50), r.integers(0, 4, 50),
                                                       [0, 1, 2, 3])[1])
    worst, cases = 0.0, 0
    for n in range(3, 9):
        for x, y in itertools.islice(itertools.product(itertools.permutations(range(n)), repeat=2), 40):
            worst = max(worst, abs(stats.spearman(x, y)[0] - _brute_rho(x, y)))
            cases += 1
        rng = np.random.default_rng(n)
        for _ in range(40):
            x, y = rng.integers(0, 4, n).tolist(), rng.integers(0, 4, n).tolist()
            if len(set(x)) > 1 and len(set(y)) > 1:
                worst = max(worst, abs(stats.spearman(x, y)[0] - _brute_rho(x, y)))
                cases += 1
    tukey = round(stats.tukey_threshold(2.47, 8.40), 1)
    ok = (d == 1.0 and p_exact == 2 / 6 and 0.03 <= ks_rate <= 0.07 and 0.03 <= chi_rate <= 0.07
          and worst == 0.0 and tukey == 17.3)
    verdict(6, "statistical tests", ok,
            f"KS exact p {p_exact:.6f} (2/6); null rejection KS {ks_rate:.4f}, chi2 {chi_rate:.4f} "
            f"(in [0.03, 0.07]); Spearman vs rank formula max gap {worst:.1e} over {cases} cases; "
            f"Tukey {tukey}")


def test_7_interval_calibration(verdict):
    inside = 0
    covs = []
    for s in range(500):
        rng = np.random.default_rng([s, 11])
        calib, test = rng.exponential(5.0, 200), rng.exponential(5.0, 200)
        iv = stats.bootstrap_p95_interval(calib, B=10_000, seed=s)
        cov = float(np.mean(test <= 100 * iv.epsilon))
        covs.append(cov)
        inside += 0.88 <= cov <= 0.99
    frac = inside / 500
    verdict(7, "interval calibration", frac >= 0.9,
            f"coverage in [0.88, 0.99] in {frac:.1%} of 500 trials (>= 90%); "
            f"median coverage {np.median(covs):.3f}")


def test_8_proximity_audit(verdict):
    found_dup = found_far = planted = false_flags = clean_total = 0
    worst_seed = 0.0
    for s in range(100):
        rng = np.random.default_rng([s, 13])
        train = rng.normal(size=(500, 4))
        clean = rng.normal(size=(200, 4))
        ref = stats.proximity_audit(train, train[:1]).far_threshold
        dup = train[rng.choice(500, 5, replace=False)]
        dirs = rng.normal(size=(5, 4))
        far = train[:5] + 100 * ref * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        rep = stats.proximity_audit(train, np.vstack([clean, dup, far]))
        close, iso = set(rep.p_hacking_indices), set(rep.isolated_indices)
        found_dup += len(close & set(range(200, 205)))
        found_far += len(iso & set(range(205, 210)))
        planted += 5
        flagged = len((close | iso) & set(range(200)))
        false_flags += flagged
        clean_total += 200
        worst_seed = max(worst_seed, flagged / 200)
    rate = false_flags / clean_total
    ok = found_dup == planted and found_far == planted and rate < 0.05
    verdict(8, "proximity audit", ok,
            f"duplicate recall {found_dup}/{planted}, outlier recall {found_far}/{planted}; "
            f"false-flag rate {rate:.2%} over 100 seeds x 200 clean points (< 5%, "
            f"worst single seed {worst_seed:.1%})")


def test_9_reproducibility(bench, tmp_path, verdict):
    for d in ("a", "b"):
        world = generate_fleet(bench["cfg"].world_config)
        ds.write_dataset(tmp_path / d, world, label_world(world))
    same_data = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
                    for f in ds.DATASET_FILES)

    again = fit_pipeline(bench["world"], bench["records"], bench["split"], bench["cfg"].pipeline)
    model = bench["fit"].model
    same_weights = (json.dumps(again.model.to_dict(), sort_keys=True)
                    == json.dumps(model.to_dict(), sort_keys=True)
                    and again.curves == bench["fit"].curves)

    ds.write_model(tmp_path / "model.json", model)
    back = ds.read_model(tmp_path / "model.json")
    keys = bench["world"].keys()
    a = [(p.life.d_gag, p.life.d_gm, p.life.life) for p in predict_keys(model, bench["world"], keys)]
    b = [(p.life.d_gag, p.life.d_gm, p.life.life) for p in predict_keys(back, bench["world"], keys)]
    same_pred = a == b and isinstance(back, PipelineModel)
    verdict(9, "reproducibility and persistence", same_data and same_weights and same_pred,
            f"datasets byte-identical {same_data}; retrained weights and curves bitwise-identical "
            f"{same_weights}; model.json round-trip predictions bitwise-identical {same_pred} "
            f"over {len(keys)} samples")


def test_damage_log_ratio_median_near_zero(bench):
    rows = bench["report"]["rows"]
    for t in ("D_gag", "D_gm"):
        ratio = np.log10([r[f"{t}_pred"] / r[f"{t}_true"] for r in rows])
        assert abs(np.median(ratio)) <= 0.05
