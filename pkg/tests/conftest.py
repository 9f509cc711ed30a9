import os
from pathlib import Path

import numpy as np
import pytest

from cgrs.corpus import Interaction, build_profiles, split_profiles
from cgrs.stats import StatIndex, build_index

ROOT = Path(__file__).resolve().parents[1]
ML100K = Path(os.environ.get("CGRS_ML100K", ROOT / "data" / "ml-100k" / "u.data"))

# Nine viewers; list order is viewing order.
TOY, MINIONS, GF1, GF2, THOR, AVENGERS = 1, 2, 3, 4, 5, 6
MOVIE_TABLE = {
    "Mark": [MINIONS, THOR, TOY, AVENGERS],
    "Christopher": [GF1, GF2, TOY, MINIONS],
    "Rob": [THOR, AVENGERS, GF1, TOY],
    "Jacob": [AVENGERS, GF1, GF2, THOR],
    "Rachel": [GF1, MINIONS, GF2, TOY],
    "Thomas": [GF1, GF2, MINIONS],
    "Grant": [THOR, AVENGERS, MINIONS, TOY],
    "Pamela": [GF1, AVENGERS, THOR, GF2],
    "Holly": [MINIONS, TOY, GF1, GF2],
}
ROB = 3

# Co-support counts over thirty users and ten items (items 1..10).
SUPPORT_MATRIX = np.array([
    [20, 9, 8, 11, 7, 8, 6, 7, 7, 3],
    [9, 25, 10, 11, 9, 7, 7, 6, 8, 4],
    [8, 10, 21, 5, 7, 6, 5, 6, 4, 3],
    [11, 11, 5, 25, 6, 8, 6, 6, 3, 2],
    [7, 9, 7, 6, 22, 8, 7, 6, 9, 4],
    [8, 7, 6, 8, 8, 18, 5, 6, 4, 1],
    [6, 7, 5, 6, 7, 5, 15, 4, 4, 1],
    [7, 6, 6, 6, 6, 6, 4, 18, 7, 2],
    [7, 8, 4, 3, 9, 4, 4, 7, 20, 3],
    [3, 4, 3, 2, 4, 1, 1, 2, 3, 6],
])
U1_PROFILE = (1, 3, 5, 7, 9)


def movie_interactions():
    out = []
    for uid, movies in enumerate(MOVIE_TABLE.values(), start=1):
        for ts, m in enumerate(movies):
            out.append(Interaction(uid, m, 5.0, 1000 + ts))
    return out


@pytest.fixture(scope="session")
def movie_dataset():
    return build_profiles(movie_interactions(), min_profile=1)


@pytest.fixture(scope="session")
def movie_index(movie_dataset):
    return build_index(movie_dataset, use_train_only=False)


@pytest.fixture(scope="session")
def matrix_index():
    return StatIndex.from_counts(np.arange(1, 11), SUPPORT_MATRIX, n_users=30)


def synthetic_interactions(n_users=60, n_items=80, seed=0, min_len=20, max_len=40, n_clusters=3):
    """Clustered popularity data: each user mostly draws from one item cluster."""
    rng = np.random.default_rng(seed)
    pop = rng.zipf(1.6, size=n_items).astype(float)
    cluster = rng.integers(n_clusters, size=n_items)
    out = []
    for u in range(1, n_users + 1):
        c = rng.integers(n_clusters)
        p = pop * np.where(cluster == c, 6.0, 1.0)
        size = int(rng.integers(min_len, max_len + 1))
        items = rng.choice(np.arange(1, n_items + 1), size=size, replace=False, p=p / p.sum())
        for ts, i in enumerate(items):
            out.append(Interaction(u, int(i), float(rng.integers(1, 6)), 10_000 + 10 * ts + int(rng.integers(3))))
    return out


def write_udata(path, interactions):
    path.write_text("".join(f"{i.user_id}\t{i.item_id}\t{int(i.rating)}\t{i.timestamp}\n" for i in interactions))
    return path


@pytest.fixture(scope="session")
def synthetic_dataset():
    return split_profiles(build_profiles(synthetic_interactions(), min_profile=20))


@pytest.fixture(scope="session")
def synthetic_index(synthetic_dataset):
    return build_index(synthetic_dataset)


@pytest.fixture
def synthetic_udata(tmp_path):
    return write_udata(tmp_path / "u.data", synthetic_interactions())


def require_ml100k():
    if not ML100K.exists():
        pytest.fail(f"{ML100K} missing; run scripts/fetch_ml100k.py")
    return ML100K


def dense_index(rng, n_items, n_users=120, density=0.6):
    """Random index where (almost) every pair co-occurs; item ids are 1..n_items."""
    from cgrs.stats import StatIndex

    x = (rng.random((n_users, n_items)) < density).astype(np.int64)
    return StatIndex.from_counts(np.arange(1, n_items + 1), x.T @ x, n_users)


def count_tables(index):
    sup = {int(i): int(s) for i, s in zip(index.item_ids, index.support)}
    return sup, index.co


def random_virtual(rng, items, n_calib, dyadic=False):
    """Random weights on ``items`` and a random calibration subset of size ``n_calib``."""
    from cgrs.grouping import split_virtual

    if dyadic:
        weights = {int(i): float(rng.integers(1, 9)) / 8 for i in items}
    else:
        weights = {int(i): float(rng.uniform(0.05, 1.0)) for i in items}
    return split_virtual(weights, n_calib / len(items), rng)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
