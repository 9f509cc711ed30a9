"""Relevance of a candidate item to a (weighted) profile.

Both models multiply the candidate's popularity ``support(c) / n_users`` by one
factor per profile item ``l``:

* association mining (``am``): ``w_l * co_support(l, c) / support(c)``
* precedence mining (``pm``):  ``w_l * precedence(l, c) / support(c)``

Factors are multiplied in ascending item-id order so results do not depend on
how the profile was assembled.  Long profiles switch to log space, since
products over hundreds of factors underflow double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ContractError
from .stats import StatIndex

LOG_SPACE_THRESHOLD = 30
MODELS = ("am", "pm")
_CHUNK = 8192


@dataclass(frozen=True)
class WeightedProfile:
    entries: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for item, w in self.entries.items():
            if not 0.0 < w <= 1.0:
                raise ContractError(f"weight of item {item} is {w}, outside (0, 1]")

    @classmethod
    def uniform(cls, items: Iterable[int]) -> "WeightedProfile":
        return cls({int(i): 1.0 for i in items})

    def __contains__(self, item) -> bool:
        return item in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def sorted_items(self) -> list[int]:
        return sorted(self.entries)

    def weights_for(self, items) -> np.ndarray:
        return np.array([self.entries[i] for i in items], dtype=float)


@dataclass(frozen=True)
class RelevanceScore:
    item: int
    score: float
    log_score: float


def _pair_count(index: StatIndex, model: str, l: int, c: int) -> int:
    if model == "am":
        return index.co(l, c)
    if model == "pm":
        return index.prec(l, c)
    raise ContractError(f"unknown scoring model {model!r}")


def relevance(index: StatIndex, profile: WeightedProfile, candidate: int, model: str = "am") -> RelevanceScore:
    if candidate in profile:
        raise ContractError(f"candidate {candidate} is already in the profile")
    sc = index.support_of(candidate)
    if sc == 0:
        return RelevanceScore(candidate, 0.0, -math.inf)
    prior = sc / index.n_users
    factors = [profile.entries[l] * (_pair_count(index, model, l, candidate) / sc) for l in profile.sorted_items()]
    if any(f == 0.0 for f in factors):
        return RelevanceScore(candidate, 0.0, -math.inf)
    if len(factors) <= LOG_SPACE_THRESHOLD:
        score = prior
        for f in factors:
            score *= f
        return RelevanceScore(candidate, score, math.log(score) if score > 0 else -math.inf)
    log_score = math.fsum([math.log(prior)] + [math.log(f) for f in factors])
    return RelevanceScore(candidate, math.exp(log_score), log_score)


def am_score(index: StatIndex, profile: WeightedProfile, candidate: int) -> RelevanceScore:
    """Association-mining relevance of ``candidate`` for ``profile``."""
    return relevance(index, profile, candidate, "am")


def pm_score(index: StatIndex, profile: WeightedProfile, candidate: int) -> RelevanceScore:
    """Precedence-mining relevance of ``candidate`` for ``profile``."""
    return relevance(index, profile, candidate, "pm")


def log_scores(index: StatIndex, profile: WeightedProfile, candidates, model: str = "am") -> np.ndarray:
    """Vectorised log relevance for many candidate item ids (``-inf`` for zero scores).

    Candidates must not be in the profile.
    """
    if model not in MODELS:
        raise ContractError(f"unknown scoring model {model!r}")
    if model == "pm" and index.precedence is None:
        raise ContractError("index was built without precedence counts")
    cand = np.asarray(candidates, dtype=np.int64)
    items = profile.sorted_items()
    if items and np.isin(cand, items).any():
        raise ContractError("candidates overlap the profile")
    cpos = index.positions(cand)
    lpos = index.positions(items)
    log_w = np.log(profile.weights_for(items))
    matrix = index.co_support if model == "am" else index.precedence
    rows = matrix[lpos] if len(lpos) else None

    sc = index.support[cpos].astype(float)
    out = np.full(len(cand), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.log(sc / index.n_users)
        log_sc = np.log(sc)
        for start in range(0, len(cand), _CHUNK):
            sl = slice(start, start + _CHUNK)
            if rows is None:
                out[sl] = base[sl]
                continue
            counts = rows[:, cpos[sl]].toarray().astype(float)
            alive = (counts > 0).all(axis=0) & (sc[sl] > 0)
            terms = np.log(np.where(counts > 0, counts, 1.0)) + log_w[:, None]
            total = base[sl] + terms.sum(axis=0) - len(items) * log_sc[sl]
            out[sl] = np.where(alive, total, -np.inf)
    return out


def rank_by_score(index: StatIndex, candidates, log_score: np.ndarray) -> list[int]:
    """Order by score descending, then support descending, then item id ascending."""
    cand = np.asarray(candidates, dtype=np.int64)
    sup = index.support[index.positions(cand)]
    order = np.lexsort((cand, -sup, -log_score))
    return cand[order].tolist()
