"""Interaction parsing, chronological user profiles and train/test splits.

Profile cache schema (one user per line, after a ``#`` version header)::

    user_id<TAB>item,item,...<TAB>ts,ts,...<TAB>n_train

Items are in chronological order.  The first two columns are enough to
rebuild item order; the trailing columns carry timestamps and the split point
so that a cache round-trips exactly.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import ConfigError, ContractError, ParseError

FORMATS = ("tab_data", "csv_ratings")
CACHE_HEADER = "# cgrs-profiles v1"


@dataclass(frozen=True)
class Interaction:
    user_id: int
    item_id: int
    rating: float
    timestamp: int

    def __post_init__(self):
        if self.user_id < 0 or self.item_id < 0:
            raise ValueError("user_id and item_id must be non-negative")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    items: tuple[int, ...]
    timestamps: tuple[int, ...]
    n_train: int = 0

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ContractError(f"user {self.user_id}: duplicate items in profile")
        if len(self.timestamps) != len(self.items):
            raise ContractError(f"user {self.user_id}: timestamps/items length mismatch")
        if not 0 <= self.n_train <= len(self.items):
            raise ContractError(f"user {self.user_id}: n_train out of range")

    @property
    def train_items(self) -> tuple[int, ...]:
        return self.items[: self.n_train]

    @property
    def test_items(self) -> tuple[int, ...]:
        return self.items[self.n_train :]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Dataset:
    profiles: Mapping[int, UserProfile]
    item_universe: frozenset[int] = field(default=frozenset())

    @property
    def n_users(self) -> int:
        return len(self.profiles)

    @property
    def n_items(self) -> int:
        return len(self.item_universe)

    @property
    def user_ids(self) -> list[int]:
        return sorted(self.profiles)

    def content_hash(self) -> str:
        return hashlib.sha256(dumps_profiles(self).encode()).hexdigest()


def _parse_row(fields: Sequence[str], line_no: int) -> Interaction:
    if len(fields) != 4:
        raise ParseError(line_no, f"expected 4 fields, got {len(fields)}")
    try:
        user, item, rating, ts = int(fields[0]), int(fields[1]), float(fields[2]), int(float(fields[3]))
    except ValueError as exc:
        raise ParseError(line_no, str(exc)) from None
    try:
        return Interaction(user, item, rating, ts)
    except ValueError as exc:
        raise ParseError(line_no, str(exc)) from None


def parse_interactions(source: IO[bytes] | bytes, format: str) -> list[Interaction]:
    """Parse a MovieLens ``u.data`` (``tab_data``) or ``ratings.csv`` (``csv_ratings``) stream.

    Line numbers in :class:`ParseError` are 1-based and count the csv header.
    """
    if format not in FORMATS:
        raise ConfigError(f"unknown format {format!r}; expected one of {FORMATS}")
    raw = source if isinstance(source, (bytes, bytearray)) else source.read()
    text = raw.decode("utf-8")
    out: list[Interaction] = []
    if format == "tab_data":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            out.append(_parse_row(line.split("\t"), line_no))
        return out

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return out
    if [h.strip() for h in header] != ["userId", "movieId", "rating", "timestamp"]:
        raise ParseError(1, f"unexpected csv header {header}")
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        out.append(_parse_row(row, line_no))
    return out


def read_interactions(path: str | Path, format: str) -> list[Interaction]:
    with open(path, "rb") as fh:
        return parse_interactions(fh, format)


def build_profiles(interactions: Iterable[Interaction], min_profile: int = 20) -> Dataset:
    """Group interactions into chronological per-user profiles.

    Repeated (user, item) events keep the earliest timestamp.  Users with fewer
    than ``min_profile`` distinct items are dropped.  Profiles come back
    unsplit (``n_train == 0``).
    """
    first_seen: dict[int, dict[int, int]] = {}
    for it in interactions:
        per_user = first_seen.setdefault(it.user_id, {})
        prev = per_user.get(it.item_id)
        if prev is None or it.timestamp < prev:
            per_user[it.item_id] = it.timestamp

    profiles: dict[int, UserProfile] = {}
    for user, seen in first_seen.items():
        if len(seen) < min_profile:
            continue
        ordered = sorted(seen.items(), key=lambda kv: (kv[1], kv[0]))
        profiles[user] = UserProfile(
            user_id=user,
            items=tuple(i for i, _ in ordered),
            timestamps=tuple(t for _, t in ordered),
        )
    universe = frozenset(i for p in profiles.values() for i in p.items)
    return Dataset(profiles=dict(sorted(profiles.items())), item_universe=universe)


def rebuild(dataset: Dataset, min_profile: int = 20) -> Dataset:
    """Run :func:`build_profiles` again over the interactions held in ``dataset``."""
    interactions = (
        Interaction(p.user_id, item, 0.0, ts)
        for p in dataset.profiles.values()
        for item, ts in zip(p.items, p.timestamps)
    )
    return build_profiles(interactions, min_profile=min_profile)


def split_profiles(dataset: Dataset, train_fraction: float = 0.6) -> Dataset:
    """Chronological split: the first ``floor(train_fraction * n)`` items train."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    profiles = {}
    for user, p in dataset.profiles.items():
        if len(p) < 2:
            raise ContractError(f"user {user}: profile of size {len(p)} cannot be split")
        n_train = math.floor(train_fraction * len(p))
        profiles[user] = UserProfile(p.user_id, p.items, p.timestamps, n_train)
    return Dataset(profiles=profiles, item_universe=dataset.item_universe)


def load_dataset(path: str | Path, format: str, min_profile: int = 20, train_fraction: float = 0.6) -> Dataset:
    """Parse, filter and split in one go.  ``format='profiles'`` reads a cache."""
    if format == "profiles":
        return load_profiles(path)
    return split_profiles(build_profiles(read_interactions(path, format), min_profile), train_fraction)


def dumps_profiles(dataset: Dataset) -> str:
    lines = [CACHE_HEADER]
    for user in sorted(dataset.profiles):
        p = dataset.profiles[user]
        lines.append(
            f"{user}\t{','.join(map(str, p.items))}\t{','.join(map(str, p.timestamps))}\t{p.n_train}"
        )
    return "\n".join(lines) + "\n"


def loads_profiles(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or lines[0] != CACHE_HEADER:
        raise ParseError(1, "missing profile cache header")
    profiles = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        try:
            user = int(cols[0])
            items = tuple(int(x) for x in cols[1].split(",")) if cols[1] else ()
            if len(cols) >= 4:
                stamps = tuple(int(x) for x in cols[2].split(",")) if cols[2] else ()
                n_train = int(cols[3])
            else:
                stamps = tuple(range(len(items)))
                n_train = 0
        except (ValueError, IndexError) as exc:
            raise ParseError(line_no, str(exc)) from None
        profiles[user] = UserProfile(user, items, stamps, n_train)
    universe = frozenset(i for p in profiles.values() for i in p.items)
    return Dataset(profiles=profiles, item_universe=universe)


def save_profiles(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_profiles(dataset))


def load_profiles(path: str | Path) -> Dataset:
    return loads_profiles(Path(path).read_text())
