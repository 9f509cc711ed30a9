"""Group synthesis, group item weights and the virtual-user profile."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Dataset
from .errors import ConfigError, ContractError, DegenerateProfileError, EmptyProfileError, NoHomogeneousGroupError
from .scoring import WeightedProfile, log_scores
from .stats import StatIndex

PROFILE_STRATEGIES = ("hybrid", "threshold", "weighted")
SAMPLERS = ("auto", "rejection", "sequential")


@dataclass(frozen=True)
class Group:
    members: tuple[int, ...]
    train: Mapping[int, tuple[int, ...]] = field(repr=False, compare=False)

    def __post_init__(self):
        if len(self.members) < 2:
            raise ContractError("a group needs at least two members")
        if len(set(self.members)) != len(self.members):
            raise ContractError("group members must be distinct")

    @classmethod
    def of(cls, dataset: Dataset, members: Iterable[int]) -> "Group":
        members = tuple(sorted(int(m) for m in members))
        missing = [m for m in members if m not in dataset.profiles]
        if missing:
            raise ContractError(f"users not in dataset: {missing}")
        return cls(members, {m: dataset.profiles[m].train_items for m in members})

    @property
    def size(self) -> int:
        return len(self.members)

    def union_items(self) -> list[int]:
        return sorted(set().union(*map(set, self.train.values())))

    def common_items(self) -> set[int]:
        return set.intersection(*map(set, self.train.values()))


def is_homogeneous(group: Group) -> bool:
    """Every member shares at least ``1 / (2g)`` of its train profile with the whole group."""
    common = len(group.common_items())
    g = group.size
    return all(2 * g * common >= len(group.train[m]) for m in group.members)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def form_random_group(dataset: Dataset, g: int, rng_seed) -> Group:
    users = dataset.user_ids
    if g > len(users):
        raise ContractError(f"group size {g} exceeds {len(users)} users")
    rng = _rng(rng_seed)
    return Group.of(dataset, rng.choice(users, size=g, replace=False).tolist())


class HomogeneousSampler:
    """Draws homogeneous groups; holds a user x item train matrix for reuse.

    ``rejection`` draws uniform random groups until one passes.  ``sequential``
    adds members one at a time, choosing uniformly among users that keep the
    criterion satisfiable, and restarts on a dead end.  ``auto`` spends
    ``rejection_budget`` attempts on rejection before switching.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.users = np.array(dataset.user_ids, dtype=np.int64)
        items = np.array(sorted(dataset.item_universe), dtype=np.int64)
        rows, cols = [], []
        for r, u in enumerate(self.users):
            t = np.searchsorted(items, np.asarray(dataset.profiles[int(u)].train_items, dtype=np.int64))
            rows.append(np.full(len(t), r))
            cols.append(t)
        r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        self.matrix = sp.csr_matrix((np.ones(len(r), dtype=np.int32), (r, c)), shape=(len(self.users), len(items)))
        self.sizes = np.asarray(self.matrix.sum(axis=1)).ravel()

    def _rejection(self, g: int, rng) -> Group | None:
        grp = Group.of(self.dataset, rng.choice(self.users, size=g, replace=False).tolist())
        return grp if is_homogeneous(grp) else None

    def _sequential(self, g: int, rng) -> Group | None:
        first = int(rng.integers(len(self.users)))
        chosen = [first]
        common = self.matrix[first].toarray().ravel().astype(bool)
        for _ in range(g - 1):
            overlap = self.matrix @ common.astype(np.int32)
            need = max(self.sizes[chosen].max(), 0)
            ok = (2 * g * overlap >= self.sizes) & (2 * g * overlap >= need)
            ok[chosen] = False
            eligible = np.flatnonzero(ok)
            if len(eligible) == 0:
                return None
            nxt = int(eligible[rng.integers(len(eligible))])
            chosen.append(nxt)
            common &= self.matrix[nxt].toarray().ravel().astype(bool)
        grp = Group.of(self.dataset, self.users[chosen].tolist())
        return grp if is_homogeneous(grp) else None

    def sample(self, g: int, rng_seed, max_attempts: int = 10_000, strategy: str = "auto",
               rejection_budget: int = 2_000) -> Group:
        if strategy not in SAMPLERS:
            raise ConfigError(f"unknown sampler {strategy!r}")
        if g > len(self.users):
            raise ContractError(f"group size {g} exceeds {len(self.users)} users")
        rng = _rng(rng_seed)
        for attempt in range(max_attempts):
            if strategy == "rejection" or (strategy == "auto" and attempt < rejection_budget):
                grp = self._rejection(g, rng)
            else:
                grp = self._sequential(g, rng)
            if grp is not None:
                return grp
        raise NoHomogeneousGroupError(f"no homogeneous group of size {g} after {max_attempts} attempts")


def form_homogeneous_group(dataset: Dataset, g: int, rng_seed, max_attempts: int = 10_000,
                           strategy: str = "auto", sampler: HomogeneousSampler | None = None) -> Group:
    sampler = sampler or HomogeneousSampler(dataset)
    return sampler.sample(g, rng_seed, max_attempts=max_attempts, strategy=strategy)


def group_weights(index: StatIndex, group: Group, items: Sequence[int] | None = None, model: str = "am") -> dict[int, float]:
    """Group preference weight for each item (default: the union of train profiles).

    A member contributes 1 for an item it consumed and the item's relevance
    score against its train profile otherwise; contributions are averaged.
    """
    items = group.union_items() if items is None else sorted(int(i) for i in items)
    union = set(group.union_items())
    stray = [i for i in items if i not in union]
    if stray:
        raise ContractError(f"items consumed by no member: {stray[:5]}")
    arr = np.array(items, dtype=np.int64)
    total = np.zeros(len(arr))
    for m in group.members:
        own = np.isin(arr, group.train[m])
        total[own] += 1.0
        others = arr[~own]
        if len(others):
            scores = np.exp(log_scores(index, WeightedProfile.uniform(group.train[m]), others, model))
            total[~own] += scores
    weights = total / group.size
    return dict(zip(arr.tolist(), np.minimum(weights, 1.0).tolist()))


def group_weight(index: StatIndex, group: Group, item: int, model: str = "am") -> float:
    return group_weights(index, group, [item], model)[int(item)]


@dataclass(frozen=True)
class VirtualProfile:
    weighted_items: Mapping[int, float]
    train_part: WeightedProfile
    calib_part: tuple[int, ...]
    threshold: float
    members: tuple[int, ...] = ()

    @property
    def profile(self) -> WeightedProfile:
        return WeightedProfile(self.weighted_items)

    @property
    def n(self) -> int:
        return len(self.train_part)

    @property
    def k(self) -> int:
        return len(self.calib_part)


def split_virtual(weighted: Mapping[int, float], calib_fraction: float, rng_seed, threshold: float = 0.0,
                  members: tuple[int, ...] = ()) -> VirtualProfile:
    """Random split of a weighted profile; the calibration part gets ``floor(calib_fraction * size)`` items."""
    if not 0.0 < calib_fraction < 1.0:
        raise ConfigError("calib_fraction must lie in (0, 1)")
    items = sorted(weighted)
    if len(items) < 2:
        raise DegenerateProfileError(f"virtual profile has {len(items)} item(s); cannot split")
    n_calib = math.floor(calib_fraction * len(items))
    order = _rng(rng_seed).permutation(len(items))
    train_idx, calib_idx = order[: len(items) - n_calib], order[len(items) - n_calib :]
    train = WeightedProfile({items[i]: weighted[items[i]] for i in sorted(train_idx)})
    calib = tuple(sorted(items[i] for i in calib_idx))
    return VirtualProfile(dict(weighted), train, calib, threshold, members)


def build_virtual_profile(index: StatIndex, group: Group, tau: float = 0.1, calib_fraction: float = 0.25,
                          rng_seed=None, strategy: str = "hybrid", model: str = "am") -> VirtualProfile:
    """Weight the group's items, drop those at or below ``tau`` and split 75/25.

    ``strategy``: ``hybrid`` keeps weights of retained items, ``threshold``
    sets them to 1, ``weighted`` keeps every item regardless of ``tau``.
    """
    if strategy not in PROFILE_STRATEGIES:
        raise ConfigError(f"unknown profile strategy {strategy!r}")
    union = group.union_items()
    if not union:
        raise EmptyProfileError("group has no train items")
    weights = group_weights(index, group, union, model)
    cut = 0.0 if strategy == "weighted" else tau
    kept = {i: w for i, w in weights.items() if w > cut}
    if not kept:
        raise EmptyProfileError(f"no group item has weight above {tau}")
    if strategy == "threshold":
        kept = {i: 1.0 for i in kept}
    return split_virtual(kept, calib_fraction, rng_seed, cut, group.members)


def format_manifest_line(seed: int, members: Sequence[int], homogeneous: bool) -> str:
    return f"{seed}\t{','.join(map(str, members))}\t{int(bool(homogeneous))}"


def parse_manifest(text: str) -> list[tuple[int, tuple[int, ...], bool]]:
    out = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        seed, members, flag = line.split("\t")
        out.append((int(seed), tuple(int(m) for m in members.split(",")), flag == "1"))
    return out


def write_manifest(path: str | Path, rows: Iterable[tuple[int, Sequence[int], bool]], header: Sequence[str] = ()) -> None:
    lines = [f"# {h}" for h in header] + [format_manifest_line(*r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
