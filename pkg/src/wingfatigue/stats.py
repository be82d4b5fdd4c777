"""Certification statistics: error summaries, rank correlation, outlier
fences, two-sample tests, bootstrap prediction intervals, the per-PSE
mission split and the nearest-neighbour proximity audit.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, asdict
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy import special, stats as sps
from scipy.spatial import cKDTree

KS_EXACT_MAX_N = 12
SPEARMAN_EXACT_MAX_N = 9

# Interpolation coefficients for the k-sample Anderson-Darling critical values
# (Scholz & Stephens 1987, Table 2); p-values outside the table are capped.
_AD_SIG = np.array([0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001])
_AD_B0 = np.array([0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085])
_AD_B1 = np.array([-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615])
_AD_B2 = np.array([-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154])


@dataclass(frozen=True)
class ErrorSummary:
    mean: float
    std: float
    q1: float
    median: float
    q3: float
    min: float
    max: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PredictionInterval:
    epsilon: float
    p95_mean: float
    ci95: tuple[float, float]
    coverage: float | None = None
    coverage_ci95: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ProximityReport:
    p_hacking_indices: list[int]
    isolated_indices: list[int]
    nearest_train_distance: list[float]
    close_threshold: float
    far_threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


# --- errors ------------------------------------------------------------------

def relative_error(pred, truth):
    """Absolute percentage error; works elementwise on arrays."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if np.any(t == 0):
        raise ValueError("relative error undefined for zero truth")
    out = np.abs(p - t) / np.abs(t) * 100.0
    return float(out) if out.ndim == 0 else out


def error_summary(errors: Iterable[float]) -> ErrorSummary:
    e = np.asarray(list(errors), dtype=np.float64)
    if e.size == 0:
        raise ValueError("cannot summarise an empty error list")
    q1, med, q3 = np.percentile(e, [25, 50, 75])
    return ErrorSummary(
        mean=float(e.mean()),
        std=float(e.std(ddof=1)) if e.size > 1 else 0.0,
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        min=float(e.min()),
        max=float(e.max()),
        count=int(e.size),
    )


def grouped_mre(records: Iterable[tuple[Hashable, float]]) -> dict:
    groups = defaultdict(list)
    for key, err in records:
        groups[key].append(err)
    if not groups:
        raise ValueError("no records to group")
    return {k: float(np.mean(v)) for k, v in groups.items()}


def tukey_threshold(q1: float, q3: float) -> float:
    return q3 + 1.5 * (q3 - q1)


def tukey_fence(errors) -> tuple[float, list[int]]:
    """Upper Tukey fence and indices strictly above it."""
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("empty error list")
    q1, q3 = np.percentile(e, [25, 75])
    thr = tukey_threshold(float(q1), float(q3))
    return thr, [int(i) for i in np.flatnonzero(e > thr)]


# --- correlation -------------------------------------------------------------

def _pearson_rows(x, ys):
    xc = x - x.mean()
    yc = ys - ys.mean(axis=-1, keepdims=True)
    return (yc @ xc) / np.sqrt((xc @ xc) * np.einsum("ij,ij->i", yc, yc))


def spearman(x, y, alternative: str = "two-sided") -> tuple[float, float]:
    """Spearman rank correlation with mid-rank ties.

    The p-value is exact (all permutations) for n <= 9, otherwise from the
    Student-t approximation with n - 2 degrees of freedom.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    rx = sps.rankdata(x)
    ry = sps.rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise ValueError("correlation undefined for a constant vector")
    rho = float(_pearson_rows(rx, ry[None, :])[0])
    rho = max(-1.0, min(1.0, rho))

    if n <= SPEARMAN_EXACT_MAX_N:
        perms = np.array(list(itertools.permutations(ry)))
        null = _pearson_rows(rx, perms)
        tol = 1e-12
        if alternative == "less":
            p = np.mean(null <= rho + tol)
        elif alternative == "greater":
            p = np.mean(null >= rho - tol)
        else:
            p = np.mean(np.abs(null) >= abs(rho) - tol)
        return rho, float(p)

    df = n - 2
    if abs(rho) == 1.0:
        t = math.copysign(math.inf, rho)
    else:
        t = rho * math.sqrt(df / (1.0 - rho * rho))
    if alternative == "less":
        p = sps.t.cdf(t, df)
    elif alternative == "greater":
        p = sps.t.sf(t, df)
    else:
        p = 2.0 * sps.t.sf(abs(t), df)
    return rho, float(min(1.0, p))


# --- two-sample tests ----------------------------------------------------------

def _ks_stat(a_sorted, b_sorted, grid):
    fa = np.searchsorted(a_sorted, grid, side="right") / a_sorted.size
    fb = np.searchsorted(b_sorted, grid, side="right") / b_sorted.size
    return float(np.max(np.abs(fa - fb)))


def ks_2sample(a, b) -> tuple[float, float]:
    """Two-sided two-sample Kolmogorov-Smirnov test.

    Small problems (na + nb <= 12) get the exact permutation p-value over all
    label assignments; larger ones use the asymptotic Kolmogorov distribution
    at sqrt(na*nb/(na+nb)) * D.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    grid = np.unique(pooled)
    d = _ks_stat(a, b, grid)
    if d == 0.0:
        return 0.0, 1.0

    if na + nb <= KS_EXACT_MAX_N:
        hits = total = 0
        idx = np.arange(na + nb)
        for combo in itertools.combinations(idx, na):
            mask = np.zeros(na + nb, dtype=bool)
            mask[list(combo)] = True
            dd = _ks_stat(np.sort(pooled[mask]), np.sort(pooled[~mask]), grid)
            hits += dd >= d - 1e-12
            total += 1
        return d, hits / total

    en = na * nb / (na + nb)
    return d, float(min(1.0, special.kolmogorov(math.sqrt(en) * d)))


def _ad_midrank_stat(samples, pooled_sorted, distinct):
    n_total = pooled_sorted.size
    left = np.searchsorted(pooled_sorted, distinct, side="left")
    lj = np.searchsorted(pooled_sorted, distinct, side="right") - left
    bj = left + lj / 2.0
    total = 0.0
    for s in samples:
        s = np.sort(s)
        right = np.searchsorted(s, distinct, side="right")
        fij = right - np.searchsorted(s, distinct, side="left")
        mij = right - fij / 2.0
        inner = lj / n_total * (n_total * mij - bj * s.size) ** 2 / (bj * (n_total - bj) - n_total * lj / 4.0)
        total += inner.sum() / s.size
    return total * (n_total - 1.0) / n_total


def ad_2sample(a, b) -> tuple[float, float]:
    """Two-sample Anderson-Darling test (mid-rank version for ties).

    Returns the standardized statistic and a p-value interpolated from the
    tabulated critical values, capped to [0.001, 0.25].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.sort(np.concatenate([a, b]))
    n_total = pooled.size
    if n_total < 4:
        raise ValueError("need at least 4 observations in total")
    distinct = np.unique(pooled)
    if distinct.size < 2:
        return -math.inf, float(_AD_SIG.max())
    a2kn = _ad_midrank_stat([a, b], pooled, distinct)

    k = 2
    n = np.array([a.size, b.size], dtype=np.float64)
    big_h = (1.0 / n).sum()
    hs_cs = (1.0 / np.arange(n_total - 1, 1, -1)).cumsum()
    h = hs_cs[-1] + 1
    g = (hs_cs / np.arange(2, n_total)).sum()
    ca = (4 * g - 6) * (k - 1) + (10 - 6 * g) * big_h
    cb = (2 * g - 4) * k ** 2 + 8 * h * k + (2 * g - 14 * h - 4) * big_h - 8 * h + 4 * g - 6
    cc = (6 * h + 2 * g - 2) * k ** 2 + (4 * h - 4 * g + 6) * k + (2 * h - 6) * big_h + 4 * h
    cd = (2 * h + 6) * k ** 2 - 4 * h * k
    var = (ca * n_total ** 3 + cb * n_total ** 2 + cc * n_total + cd) / (
        (n_total - 1.0) * (n_total - 2.0) * (n_total - 3.0))
    m = k - 1
    a2 = (a2kn - m) / math.sqrt(var)

    critical = _AD_B0 + _AD_B1 / math.sqrt(m) + _AD_B2 / m
    if a2 < critical.min():
        p = _AD_SIG.max()
    elif a2 > critical.max():
        p = _AD_SIG.min()
    else:
        coef = np.polyfit(critical, np.log(_AD_SIG), 2)
        p = math.exp(np.polyval(coef, a2))
    return float(a2), float(np.clip(p, _AD_SIG.min(), _AD_SIG.max()))


def chi2_2sample(a, b, categories: Sequence | None = None) -> tuple[float, float]:
    """Chi-square homogeneity test on the 2 x k table of category counts."""
    a = list(a)
    b = list(b)
    cats = list(categories) if categories is not None else sorted(set(a) | set(b))
    unknown = (set(a) | set(b)) - set(cats)
    if unknown:
        raise ValueError(f"values outside the category list: {sorted(unknown)[:5]}")
    index = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for row, sample in enumerate((a, b)):
        for v in sample:
            table[row, index[v]] += 1
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        raise ValueError("need at least two populated categories")
    col = table.sum(axis=0)
    rows = table.sum(axis=1)
    expected = np.outer(rows, col) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    p = float(sps.chi2.sf(stat, table.shape[1] - 1))
    return stat, p


# --- split -------------------------------------------------------------------

TRAIN, VAL, TEST = "train", "val", "test"


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict[int, dict[str, str]]
    seed: int

    def role(self, pse: int, mission_id: str) -> str:
        return self.assignment[pse][mission_id]

    def missions(self, pse: int, role: str) -> list[str]:
        return [m for m, r in self.assignment[pse].items() if r == role]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "assignment": {str(p): dict(v) for p, v in self.assignment.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        return cls({int(p): dict(v) for p, v in d["assignment"].items()}, int(d["seed"]))


def split_assign(pses: Sequence[int], missions: Sequence[str], seed: int) -> SplitAssignment:
    """Per PSE, one random mission for test, one for validation, the rest train."""
    missions = list(missions)
    if len(missions) < 3:
        raise ValueError("need at least 3 missions to split train/val/test")
    out = {}
    for pse in pses:
        order = np.random.default_rng([seed, int(pse)]).permutation(len(missions))
        roles = {missions[order[0]]: TEST, missions[order[1]]: VAL}
        out[int(pse)] = {m: roles.get(m, TRAIN) for m in missions}
    return SplitAssignment(out, int(seed))


# --- intervals -----------------------------------------------------------------

def bootstrap_p95_interval(calib_errors, B: int = 10000, seed: int = 0) -> PredictionInterval:
    """Bootstrap the 95th percentile of calibration errors (in %)."""
    e = np.asarray(calib_errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("empty calibration errors")
    if B < 1000:
        raise ValueError("use at least 1000 bootstrap resamples")
    rng = np.random.default_rng(seed)
    p95 = np.empty(B)
    chunk = max(1, 2_000_000 // e.size)
    for start in range(0, B, chunk):
        stop = min(B, start + chunk)
        idx = rng.integers(0, e.size, size=(stop - start, e.size))
        p95[start:stop] = np.percentile(e[idx], 95, axis=1)
    # offset from one resample so constant inputs give their value exactly
    mean = float(p95[0] + (p95 - p95[0]).mean())
    lo, hi = np.percentile(p95, [2.5, 97.5])
    return PredictionInterval(mean / 100.0, mean, (float(min(lo, mean)), float(max(hi, mean))))


def coverage_check(test_errors, epsilon: float, B: int = 10000, seed: int = 0) -> tuple[float, tuple[float, float]]:
    e = np.asarray(test_errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("empty test errors")
    inside = (e <= 100.0 * epsilon).astype(np.float64)
    cov = float(inside.mean())
    rng = np.random.default_rng(seed)
    boots = inside[rng.integers(0, e.size, size=(B, e.size))].mean(axis=1)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return cov, (float(lo), float(hi))


# --- proximity -----------------------------------------------------------------

def proximity_audit(train_X, test_X, alpha_close: float = 0.01, alpha_far: float = 0.01) -> ProximityReport:
    """Flag test points unusually close to, or far from, the training set.

    The reference is each training point's nearest-neighbour distance to the
    rest of the training set; exact duplicates are always flagged as close.
    """
    tr = np.asarray(train_X, dtype=np.float64)
    te = np.asarray(test_X, dtype=np.float64)
    if tr.ndim != 2 or tr.shape[0] < 2:
        raise ValueError("need at least 2 training points")
    if te.ndim != 2 or te.shape[1] != tr.shape[1]:
        raise ValueError("train and test feature widths differ")
    tree = cKDTree(tr)
    ref = tree.query(tr, k=2)[0][:, 1]
    near = tree.query(te, k=1)[0]
    lo = float(np.quantile(ref, alpha_close))
    hi = float(np.quantile(ref, 1.0 - alpha_far))
    close = (near < lo) | (near == 0.0)
    far = (near > hi) & ~close
    return ProximityReport(
        p_hacking_indices=[int(i) for i in np.flatnonzero(close)],
        isolated_indices=[int(i) for i in np.flatnonzero(far)],
        nearest_train_distance=[float(v) for v in near],
        close_threshold=lo,
        far_threshold=hi,
    )
