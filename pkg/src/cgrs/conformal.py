"""Conformal layer: nonconformity scores, p-values and prediction regions.

For a calibration target ``t`` and the extended training bag
``O3 = train_part + {candidate: 1}``, the nonconformity of a bag member ``i``
is the relevance of ``t`` to the bag with ``i`` left out.  Leaving out a
member with a smaller weighted probability ``w_i * P(i | t)`` leaves a larger
product, so p-values only need those weighted probabilities: the p-value of
the candidate against ``t`` is the share of bag members whose weighted
probability does not exceed the candidate's.  Averaging over all calibration
targets gives the candidate's p-value.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ContractError, DegenerateProfileError
from .grouping import Group, VirtualProfile
from .scoring import LOG_SPACE_THRESHOLD, WeightedProfile, log_scores, rank_by_score
from .stats import StatIndex


@dataclass(frozen=True)
class NonconformityRow:
    target: int
    alpha: Mapping[int, float]
    weighted_prob: Mapping[int, float]

    @property
    def degenerate(self) -> bool:
        return not any(self.alpha.values())


def _extended_bag(train_part: WeightedProfile, new_item: int, target: int) -> dict[int, float]:
    if target in train_part:
        raise ContractError(f"target {target} is in the training part")
    if new_item in train_part:
        raise ContractError(f"new item {new_item} is in the training part")
    if new_item == target:
        raise ContractError("new item and target coincide")
    bag = dict(train_part.entries)
    bag[int(new_item)] = 1.0
    return bag


def weighted_probs(index: StatIndex, train_part: WeightedProfile, new_item: int, target: int) -> dict[int, float]:
    """``w_h * P(h | target)`` for every member of the extended bag."""
    bag = _extended_bag(train_part, new_item, target)
    st = index.support_of(target)
    if st == 0:
        return {h: 0.0 for h in sorted(bag)}
    return {h: bag[h] * (index.co(h, target) / st) for h in sorted(bag)}


def nonconformity(index: StatIndex, train_part: WeightedProfile, new_item: int, target: int,
                  exact: bool = False) -> dict:
    """Leave-one-out relevance of ``target`` for each member of the extended bag.

    Products run over ascending item ids.  With ``exact=True`` the values are
    :class:`fractions.Fraction` (weights converted exactly from their floats).
    """
    bag = _extended_bag(train_part, new_item, target)
    items = sorted(bag)
    st = index.support_of(target)
    if st == 0:
        return {i: (Fraction(0) if exact else 0.0) for i in items}

    if exact:
        prior = Fraction(st, index.n_users)
        factors = {l: Fraction(bag[l]) * Fraction(index.co(l, target), st) for l in items}
        out = {}
        for i in items:
            val = prior
            for l in items:
                if l != i:
                    val *= factors[l]
            out[i] = val
        return out

    prior = st / index.n_users
    factors = {l: bag[l] * (index.co(l, target) / st) for l in items}
    out = {}
    for i in items:
        rest = [factors[l] for l in items if l != i]
        if len(rest) <= LOG_SPACE_THRESHOLD:
            val = prior
            for f in rest:
                val *= f
        elif any(f == 0.0 for f in rest):
            val = 0.0
        else:
            val = math.exp(math.fsum([math.log(prior)] + [math.log(f) for f in rest]))
        out[i] = val
    return out


def nonconformity_row(index: StatIndex, train_part: WeightedProfile, new_item: int, target: int) -> NonconformityRow:
    return NonconformityRow(
        int(target),
        nonconformity(index, train_part, new_item, target),
        weighted_probs(index, train_part, new_item, target),
    )


def _pair_count(weighted_probs: Mapping[int, float], new_item: int) -> int:
    ref = weighted_probs[new_item]
    return sum(1 for v in weighted_probs.values() if v <= ref)


def p_value_pair(weighted_probs: Mapping[int, float], new_item: int) -> float:
    """Share of bag members whose weighted probability is ``<=`` the new item's."""
    return _pair_count(weighted_probs, new_item) / len(weighted_probs)


def p_value(index: StatIndex, virtual: VirtualProfile, candidate: int) -> float:
    """Candidate p-value averaged over the calibration targets (reference route)."""
    if candidate in virtual.weighted_items:
        raise ContractError(f"candidate {candidate} belongs to the virtual profile")
    if virtual.k == 0:
        raise DegenerateProfileError("calibration part is empty")
    # integer counts, one division: identical to the vectorised route
    total = sum(_pair_count(weighted_probs(index, virtual.train_part, candidate, t), candidate)
                for t in virtual.calib_part)
    return total / (virtual.k * (virtual.n + 1))


def p_values(index: StatIndex, virtual: VirtualProfile, candidates) -> np.ndarray:
    """Vectorised p-values for many candidates; matches :func:`p_value` item by item."""
    if virtual.k == 0:
        raise DegenerateProfileError("calibration part is empty")
    cand = np.asarray(candidates, dtype=np.int64)
    if np.isin(cand, list(virtual.weighted_items)).any():
        raise ContractError("candidates overlap the virtual profile")
    cpos = index.positions(cand)
    train_items = virtual.train_part.sorted_items()
    tpos = index.positions(train_items)
    w = virtual.train_part.weights_for(train_items)
    n1 = len(train_items) + 1

    acc = np.zeros(len(cand), dtype=np.int64)
    for t in virtual.calib_part:
        tp = index.position(t)
        st = index.support[tp]
        if st == 0:
            # every weighted probability is zero: all bag members tie
            acc += n1
            continue
        prob = index.co_rows([tp])[0] / st
        ref = np.sort(w * prob[tpos])
        acc += np.searchsorted(ref, 1.0 * prob[cpos], side="right") + 1
    return acc / (virtual.k * n1)


def candidate_pool(index: StatIndex, group: Group) -> np.ndarray:
    """Every indexed item that no group member has in its train profile."""
    consumed = np.asarray(group.union_items(), dtype=np.int64)
    return index.item_ids[~np.isin(index.item_ids, consumed)]


@dataclass(frozen=True, eq=False)
class ConformalOutput:
    candidates: np.ndarray
    pvalues: np.ndarray
    scores: np.ndarray
    epsilon: float
    ranking: list[int]

    @property
    def candidate_pvalues(self) -> dict[int, float]:
        return dict(zip(self.candidates.tolist(), self.pvalues.tolist()))

    def region_at(self, epsilon: float) -> frozenset[int]:
        return frozenset(self.candidates[self.pvalues > epsilon].tolist())

    @property
    def region(self) -> frozenset[int]:
        return self.region_at(self.epsilon)

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["candidate_id", "p_value", "am_score", "in_region"])
            for c, p, s in zip(self.candidates.tolist(), self.pvalues.tolist(), self.scores.tolist()):
                writer.writerow([c, f"{p:.5f}", f"{math.exp(s):.5e}", int(p > self.epsilon)])


def recommend_grs(index: StatIndex, virtual: VirtualProfile, candidates, model: str = "am") -> list[int]:
    """Plain group recommendation: rank by relevance to the full weighted profile."""
    cand = np.asarray(candidates, dtype=np.int64)
    return rank_by_score(index, cand, log_scores(index, virtual.profile, cand, model))


def recommend_cgrs(index: StatIndex, virtual: VirtualProfile, candidates, epsilon: float,
                   model: str = "am") -> ConformalOutput:
    """p-values for each candidate, the region ``{p > epsilon}`` and a ranking.

    Ranking: p-value descending, then relevance descending, then support
    descending, then item id ascending.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError("epsilon must lie in [0, 1]")
    cand = np.asarray(candidates, dtype=np.int64)
    pv = p_values(index, virtual, cand)
    scores = log_scores(index, virtual.profile, cand, model)
    sup = index.support[index.positions(cand)]
    order = np.lexsort((cand, -sup, -scores, -pv))
    return ConformalOutput(cand, pv, scores, float(epsilon), cand[order].tolist())
