"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The ML-100K criteria need ``data/ml-100k/u.data`` (see scripts/fetch_ml100k.py).
"""
import math
import os

import numpy as np
import pytest

from cgrs.bench import ExperimentConfig, emit_reports, run_experiment, summary_rows
from cgrs.conformal import nonconformity, p_value, p_values, recommend_cgrs
from cgrs.corpus import load_dataset
from cgrs.grouping import split_virtual
from cgrs.metrics import auc, average_precision, ndcg, precision_recall_f1, reciprocal_rank
from cgrs.scoring import WeightedProfile, am_score, log_scores, pm_score, rank_by_score
from cgrs.stats import StatIndex, build_index

from . import oracles
from .conftest import ACCEPTANCE_LINES, GF2, ROB, U1_PROFILE, count_tables, dense_index, random_virtual, require_ml100k

JOBS = int(os.environ.get("CGRS_JOBS", min(4, os.cpu_count() or 1)))
EPS_GRID = (0.01, 0.05, 0.1, 0.2)


def record(number, name, ok, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {name}" + (f": {detail}" if detail else ""))
    assert ok, detail


# 1 -------------------------------------------------------------------------

def test_reference_values(movie_dataset, movie_index, matrix_index):
    pm = pm_score(movie_index, WeightedProfile.uniform(movie_dataset.profiles[ROB].items), GF2).score
    expected = {2: 0.0039, 4: 0.0005, 6: 0.0024, 8: 0.0022, 10: 0.0028}
    prof = WeightedProfile.uniform(U1_PROFILE)
    got = {c: am_score(matrix_index, prof, c).score for c in expected}
    cands = sorted(expected)
    ranking = rank_by_score(matrix_index, cands, log_scores(matrix_index, prof, cands))
    ok = (abs(pm - 0.0062) <= 5e-5 and all(abs(got[c] - v) <= 5e-5 for c, v in expected.items())
          and ranking == [2, 10, 6, 8, 4])
    detail = f"pm={pm:.5f} am={{{', '.join(f'{c}: {v:.5f}' for c, v in got.items())}}} order={ranking}"
    record(1, "reference score values", ok, detail)


# 2 -------------------------------------------------------------------------

def test_permutation_invariance():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(1000):
        n_items = int(rng.integers(4, 16))
        idx = dense_index(rng, n_items, n_users=int(rng.integers(10, 80)), density=float(rng.uniform(0.1, 0.7)))
        items = rng.permutation(np.arange(1, n_items + 1))
        n_train = int(rng.integers(1, n_items - 1))
        train, new, target = items[:n_train], int(items[n_train]), int(items[n_train + 1])
        weights = {int(i): float(rng.uniform(0.01, 1.0)) for i in train}
        base = nonconformity(idx, WeightedProfile(weights), new, target)
        for _ in range(3):
            order = rng.permutation(len(train))
            shuffled = {int(train[j]): weights[int(train[j])] for j in order}
            if nonconformity(idx, WeightedProfile(shuffled), new, target) != base:
                bad += 1
    record(2, "nonconformity invariant to training order", bad == 0, f"{bad} mismatches over 1000 fixtures")


# 3 -------------------------------------------------------------------------

def test_fast_pvalue_equals_bruteforce():
    rng = np.random.default_rng(77)
    bad = checked = 0
    for trial in range(1000):
        n = int(rng.integers(2, 13))
        n_items = n + int(rng.integers(1, 4)) + 3
        idx = dense_index(rng, n_items, n_users=120, density=0.6)
        sup, co = count_tables(idx)
        if (idx.co_support.toarray() == 0).any():
            continue
        items = rng.permutation(np.arange(1, n_items + 1))
        n_calib = int(rng.integers(1, max(2, n // 2 + 1)))
        vp = random_virtual(rng, items[:n + n_calib], n_calib, dyadic=bool(trial % 2))
        cands = sorted(int(i) for i in items[n + n_calib:])
        fast = p_values(idx, vp, cands)
        for c, pv in zip(cands, fast):
            exact = oracles.pipeline_p_value(sup, co, idx.n_users, vp.train_part.entries, vp.calib_part, c)
            checked += 1
            if pv != float(exact) or p_value(idx, vp, c) != pv:
                bad += 1
    ok = bad == 0 and checked >= 1000
    record(3, "fast p-value equals brute-force p-value", ok, f"{bad} mismatches over {checked} candidates")


# 4 and 5 -------------------------------------------------------------------

@pytest.fixture(scope="module")
def exchangeable_index():
    """Users whose items are i.i.d. draws from one fixed popularity law."""
    rng = np.random.default_rng(4)
    n_users, n_items = 800, 150
    pop = 1.0 / np.arange(1, n_items + 1) ** 0.8
    pop /= pop.sum()
    rows = []
    for _ in range(n_users):
        draws = np.unique(rng.choice(n_items, size=int(rng.integers(20, 40)), p=pop))
        rows.append(draws)
    x = np.zeros((n_users, n_items), dtype=np.int64)
    for u, r in enumerate(rows):
        x[u, r] = 1
    idx = StatIndex.from_counts(np.arange(1, n_items + 1), x.T @ x, n_users)
    return idx, [r + 1 for r in rows]


def _validity_trials(idx, profiles, n_trials, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_trials):
        prof = profiles[int(rng.integers(len(profiles)))]
        held = int(rng.choice(prof))
        rest = {int(i): 1.0 for i in prof if i != held}
        vp = split_virtual(rest, 0.25, rng)
        out.append((vp, held))
    return out


def test_validity(exchangeable_index):
    idx, profiles = exchangeable_index
    trials = _validity_trials(idx, profiles, 2000, 11)
    pv = np.array([p_values(idx, vp, [held])[0] for vp, held in trials])
    parts, ok = [], True
    for eps in (0.05, 0.1, 0.2):
        rate = float(np.mean(pv <= eps))
        bound = eps + 3 * math.sqrt(eps * (1 - eps) / 2000)
        ok &= rate <= bound
        parts.append(f"eps={eps}: {rate:.4f} <= {bound:.4f}")
    record(4, "empirical error within bound", ok, "; ".join(parts))


def test_region_properties(exchangeable_index):
    idx, profiles = exchangeable_index
    all_items = idx.item_ids.tolist()
    bounds_bad = nest_bad = 0
    for vp, _ in _validity_trials(idx, profiles, 300, 12):
        cands = [c for c in all_items if c not in vp.weighted_items]
        out = recommend_cgrs(idx, vp, cands, 0.1)
        lo = 1 / (vp.n + 1)
        bounds_bad += int(((out.pvalues < lo - 1e-12) | (out.pvalues > 1.0)).sum())
        regions = [out.region_at(e) for e in sorted(EPS_GRID)]
        nest_bad += sum(1 for a, b in zip(regions, regions[1:]) if not b <= a)
    ok = bounds_bad == 0 and nest_bad == 0
    record(5, "p-value bounds and nested regions", ok, f"{bounds_bad} out-of-range p-values, {nest_bad} nesting violations")


# 9 -------------------------------------------------------------------------

def test_metric_units():
    checks = [
        abs(ndcg([5, 1, 2], {1}) - math.log(2) / math.log(3)) <= 1e-9,
        ndcg([1, 2, 3, 4], {1, 2}) == 1.0,
        ndcg([1, 2, 3], {9}) == 0.0,
        auc([1, 2, 3, 4], {1, 2}) == 1.0,
        auc([1, 2, 3, 4], {3, 4}) == 0.0,
        auc([10, 1, 11, 2], {1, 2}) == 0.25,
        average_precision([1, 2, 9], {1, 2}) == 1.0,
        abs(average_precision([7, 8, 1], {1}) - 1 / 3) <= 1e-12,
        abs(average_precision([1, 7, 2, 8], {1, 2}) - 5 / 6) <= 1e-12,
        reciprocal_rank([5, 6, 7, 3], {3}) == 0.25,
        reciprocal_rank([5, 6], {3}) == 0.0,
        precision_recall_f1([1, 2, 3], {1, 2, 3}, 3) == (1.0, 1.0, 1.0),
        precision_recall_f1([1, 2, 3], {7}, 3) == (0.0, 0.0, 0.0),
        precision_recall_f1([1, 9, 2, 8, 7, 3], {9, 7, 3, 4}, 5)[:2] == (0.4, 0.5),
    ]
    record(9, "metric unit cases", all(checks), f"{sum(checks)}/{len(checks)} cases")


# 6, 7, 8, 10: ML-100K runs --------------------------------------------------

@pytest.fixture(scope="module")
def ml100k():
    ds = load_dataset(require_ml100k(), "tab_data")
    return ds, build_index(ds, with_precedence=False)


def _config(setting, sizes):
    return ExperimentConfig(dataset=str(require_ml100k()), dataset_name="ml-100k", setting=setting,
                            group_sizes=sizes, n_instances=500, seed=0, jobs=JOBS)


@pytest.fixture(scope="module")
def homogeneous_sweep(ml100k):
    ds, idx = ml100k
    return run_experiment(_config("homogeneous", (2, 3, 4, 5, 6)), ds, idx)


def _means(art, g):
    return {r["system"]: r for r in summary_rows(art) if r["group_size"] == g}


def test_direction_homogeneous(homogeneous_sweep):
    m = _means(homogeneous_sweep, 2)
    ok = all(m["CGRS"][k] >= m["GRS"][k] for k in ("ap", "ndcg", "auc"))
    detail = ", ".join(f"{k}: CGRS {m['CGRS'][k]:.4f} vs GRS {m['GRS'][k]:.4f}" for k in ("ap", "ndcg", "auc"))
    record("6a", "homogeneous g=2 CGRS >= GRS", ok, detail)


def test_reference_band_homogeneous(homogeneous_sweep):
    m = _means(homogeneous_sweep, 2)
    target = {("GRS", "ap"): 0.20563, ("CGRS", "ap"): 0.22068, ("GRS", "auc"): 0.88378, ("CGRS", "auc"): 0.89307}
    parts, ok = [], True
    for (system, key), ref in target.items():
        got = m[system][key]
        ok &= abs(got - ref) <= 0.04
        parts.append(f"{system} {key} {got:.4f} (ref {ref})")
    record("6b", "homogeneous g=2 within 0.04 of reference", ok, ", ".join(parts))


def test_direction_random(ml100k):
    ds, idx = ml100k
    m = _means(run_experiment(_config("random", (2,)), ds, idx), 2)
    ok = all(m["CGRS"][k] >= m["GRS"][k] for k in ("ap", "ndcg"))
    detail = ", ".join(f"{k}: CGRS {m['CGRS'][k]:.4f} vs GRS {m['GRS'][k]:.4f}" for k in ("ap", "ndcg"))
    record(7, "random g=2 CGRS >= GRS", ok, detail)


def test_group_size_trend(homogeneous_sweep):
    parts, ok = [], True
    for system in ("GRS", "CGRS"):
        aps = [_means(homogeneous_sweep, g)[system]["ap"] for g in range(2, 7)]
        ok &= all(b < a for a, b in zip(aps, aps[1:]))
        parts.append(f"{system} AP " + " ".join(f"{v:.4f}" for v in aps))
    record(8, "AP decreasing in group size", ok, "; ".join(parts))


def test_determinism(ml100k, tmp_path):
    ds, idx = ml100k
    cfg = _config("homogeneous", (2,))
    emit_reports(run_experiment(cfg, ds, idx), tmp_path / "a")
    emit_reports(run_experiment(cfg), tmp_path / "b")
    same = {f: (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
            for f in ("summary.csv", "topk.csv", "validity.csv")}
    record(10, "byte-identical reports across runs", all(same.values()), str(same))
