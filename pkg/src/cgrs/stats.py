"""Sparse support, co-support and precedence counts over item pairs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Dataset
from .errors import ContractError, UndefinedConditionalError

INDEX_CACHE_VERSION = 1
_PAIR_CHUNK = 4_000_000


@dataclass(frozen=True, eq=False)
class StatIndex:
    """Item statistics keyed by position in the sorted ``item_ids`` array.

    ``co_support`` is symmetric with ``support`` on its diagonal.
    ``precedence[i, h]`` counts users who consumed ``i`` strictly before ``h``.
    """

    item_ids: np.ndarray
    support: np.ndarray
    co_support: sp.csr_matrix
    precedence: sp.csr_matrix | None
    n_users: int

    @classmethod
    def from_counts(cls, item_ids, co_support, n_users: int, precedence=None) -> "StatIndex":
        item_ids = np.asarray(item_ids, dtype=np.int64)
        if np.any(np.diff(item_ids) <= 0):
            raise ContractError("item_ids must be strictly increasing")
        co = sp.csr_matrix(co_support, dtype=np.int64)
        if (co != co.T).nnz:
            raise ContractError("co_support must be symmetric")
        prec = None if precedence is None else sp.csr_matrix(precedence, dtype=np.int64)
        return cls(item_ids, co.diagonal().astype(np.int64), co, prec, int(n_users))

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def positions(self, items) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        pos = np.searchsorted(self.item_ids, items)
        pos = np.minimum(pos, max(len(self.item_ids) - 1, 0))
        if items.size and (len(self.item_ids) == 0 or np.any(self.item_ids[pos] != items)):
            missing = items[self.item_ids[pos] != items] if len(self.item_ids) else items
            raise ContractError(f"items not in index: {missing[:5].tolist()}")
        return pos

    def position(self, item: int) -> int:
        return int(self.positions([item])[0])

    def support_of(self, item: int) -> int:
        return int(self.support[self.position(item)])

    def co(self, i: int, h: int) -> int:
        return int(self.co_support[self.position(i), self.position(h)])

    def prec(self, i: int, h: int) -> int:
        if self.precedence is None:
            raise ContractError("index was built without precedence counts")
        return int(self.precedence[self.position(i), self.position(h)])

    def co_rows(self, positions) -> np.ndarray:
        """Dense ``(len(positions), n_items)`` block of co-support rows."""
        return self.co_support[np.asarray(positions, dtype=np.int64)].toarray()


def _user_sequences(dataset: Dataset, use_train_only: bool):
    for user in sorted(dataset.profiles):
        p = dataset.profiles[user]
        yield p.train_items if use_train_only else p.items


def build_index(dataset: Dataset, use_train_only: bool = True, with_precedence: bool = True) -> StatIndex:
    """Count supports and pairwise statistics over each user's (train) sequence."""
    if dataset.n_users == 0:
        raise ContractError("cannot index an empty dataset")
    item_ids = np.array(sorted(dataset.item_universe), dtype=np.int64)
    n_items = len(item_ids)

    seqs = [np.searchsorted(item_ids, np.asarray(s, dtype=np.int64)) for s in _user_sequences(dataset, use_train_only)]
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    cols = np.concatenate(seqs) if seqs else np.zeros(0, dtype=np.int64)
    rows = np.repeat(np.arange(len(seqs)), lengths)
    x = sp.csr_matrix((np.ones(len(cols), dtype=np.int64), (rows, cols)), shape=(len(seqs), n_items))
    co = (x.T @ x).tocsr()
    co.sort_indices()

    prec = None
    if with_precedence:
        prec = sp.csr_matrix((n_items, n_items), dtype=np.int64)
        buf_r, buf_c, held = [], [], 0
        triu_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for s in seqs:
            n = len(s)
            if n < 2:
                continue
            if n not in triu_cache:
                triu_cache[n] = np.triu_indices(n, 1)
            a, b = triu_cache[n]
            buf_r.append(s[a])
            buf_c.append(s[b])
            held += len(a)
            if held >= _PAIR_CHUNK:
                prec = prec + _pairs_to_csr(buf_r, buf_c, n_items)
                buf_r, buf_c, held = [], [], 0
        if buf_r:
            prec = prec + _pairs_to_csr(buf_r, buf_c, n_items)
        prec = prec.tocsr()
        prec.sort_indices()

    return StatIndex(item_ids, co.diagonal().astype(np.int64), co, prec, dataset.n_users)


def _pairs_to_csr(rows, cols, n):
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return sp.coo_matrix((np.ones(len(r), dtype=np.int64), (r, c)), shape=(n, n)).tocsr()


def cond_prob(index: StatIndex, i: int, h: int) -> float:
    """``P(i | h) = co_support(i, h) / support(h)``."""
    sh = index.support_of(h)
    if sh == 0:
        raise UndefinedConditionalError(f"support({h}) is zero")
    return index.co(i, h) / sh


def precedence_prob(index: StatIndex, i: int, h: int) -> float:
    """``PP(i | h) = precedence(i, h) / support(h)``: share of h's consumers who took i first."""
    sh = index.support_of(h)
    if sh == 0:
        raise UndefinedConditionalError(f"support({h}) is zero")
    return index.prec(i, h) / sh


def save_index(index: StatIndex, path: str | Path, dataset_hash: str = "") -> None:
    payload = dict(
        version=np.int64(INDEX_CACHE_VERSION),
        dataset_hash=np.array(dataset_hash),
        item_ids=index.item_ids,
        n_users=np.int64(index.n_users),
        co_data=index.co_support.data,
        co_indices=index.co_support.indices,
        co_indptr=index.co_support.indptr,
    )
    if index.precedence is not None:
        payload.update(
            pr_data=index.precedence.data,
            pr_indices=index.precedence.indices,
            pr_indptr=index.precedence.indptr,
        )
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **payload)


def load_index(path: str | Path, dataset_hash: str | None = None) -> StatIndex | None:
    """Load a cached index; ``None`` when the cache is stale or from another version."""
    with np.load(path) as z:
        if int(z["version"]) != INDEX_CACHE_VERSION:
            return None
        if dataset_hash is not None and str(z["dataset_hash"]) != dataset_hash:
            return None
        n = len(z["item_ids"])
        co = sp.csr_matrix((z["co_data"], z["co_indices"], z["co_indptr"]), shape=(n, n))
        prec = None
        if "pr_data" in z:
            prec = sp.csr_matrix((z["pr_data"], z["pr_indices"], z["pr_indptr"]), shape=(n, n))
        return StatIndex(z["item_ids"].copy(), co.diagonal().astype(np.int64), co, prec, int(z["n_users"]))
