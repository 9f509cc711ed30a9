"""Ranking metrics with binary relevance."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Collection, Iterable, Sequence

import numpy as np

from .errors import ContractError, UndefinedMetricError


def _hits(ranking: Sequence[int], truth: Collection[int]) -> np.ndarray:
    truth = set(truth)
    return np.fromiter((1 if r in truth else 0 for r in ranking), dtype=np.int64, count=len(ranking))


def precision_recall_f1(ranking: Sequence[int], truth: Collection[int], k: int) -> tuple[float, float, float]:
    if k < 1:
        raise ContractError("K must be at least 1")
    if not truth:
        raise UndefinedMetricError("recall is undefined without relevant items")
    hits = int(_hits(ranking[:k], truth).sum())
    p = hits / k
    r = hits / len(truth)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def ndcg(ranking: Sequence[int], truth: Collection[int], k: int | None = None) -> float:
    """NDCG at ``k`` (whole ranking when ``k`` is None); 0 when nothing is relevant."""
    k = len(ranking) if k is None else k
    rel = _hits(ranking[:k], truth)
    discounts = 1.0 / np.log2(np.arange(2, len(rel) + 2))
    dcg = float(((2.0 ** rel - 1.0) * discounts).sum())
    ideal = min(k, len(truth))
    idcg = float((1.0 / np.log2(np.arange(2, ideal + 2))).sum())
    return 0.0 if idcg == 0 else dcg / idcg


def reciprocal_rank(ranking: Sequence[int], truth: Collection[int]) -> float:
    truth = set(truth)
    for rank, item in enumerate(ranking, start=1):
        if item in truth:
            return 1.0 / rank
    return 0.0


def average_precision(ranking: Sequence[int], truth: Collection[int], n: int | None = None) -> float:
    """``(1/m) * sum_k P(k) * rel(k)`` over the first ``n`` positions, ``m = |truth|``."""
    if not truth:
        raise UndefinedMetricError("average precision is undefined without relevant items")
    rel = _hits(ranking[: len(ranking) if n is None else n], truth)
    if not rel.any():
        return 0.0
    prec_at = np.cumsum(rel) / np.arange(1, len(rel) + 1)
    return float((prec_at * rel).sum() / len(truth))


def auc(ranking: Sequence[int], truth: Collection[int]) -> float:
    """Share of (relevant, irrelevant) pairs ordered correctly by the ranking."""
    rel = _hits(ranking, truth)
    n_rel = int(rel.sum())
    n_irr = len(rel) - n_rel
    if n_rel == 0 or n_irr == 0:
        raise UndefinedMetricError("AUC needs both relevant and irrelevant items")
    irrelevant_below = n_irr - np.cumsum(1 - rel)
    return float(irrelevant_below[rel == 1].sum() / (n_rel * n_irr))


@dataclass
class MetricReport:
    precision_at: dict[int, float] = field(default_factory=dict)
    recall_at: dict[int, float] = field(default_factory=dict)
    f1_at: dict[int, float] = field(default_factory=dict)
    ndcg: float = 0.0
    rr: float = 0.0
    ap: float = 0.0
    auc: float = 0.0

    def scalars(self) -> dict[str, float]:
        return {"ap": self.ap, "rr": self.rr, "auc": self.auc, "ndcg": self.ndcg}


def evaluate(ranking: Sequence[int], truth: Collection[int], ks: Iterable[int] = range(1, 21),
             ndcg_k: int | None = None) -> MetricReport:
    """All metrics for one ranked list; raises :class:`UndefinedMetricError` if any is undefined."""
    truth = set(truth)
    report = MetricReport(
        ndcg=ndcg(ranking, truth, ndcg_k),
        rr=reciprocal_rank(ranking, truth),
        ap=average_precision(ranking, truth),
        auc=auc(ranking, truth),
    )
    for k in ks:
        p, r, f = precision_recall_f1(ranking, truth, k)
        report.precision_at[k], report.recall_at[k], report.f1_at[k] = p, r, f
    return report


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Per-instance means (no pooling)."""
    if not reports:
        raise UndefinedMetricError("no reports to average")
    ks = sorted(reports[0].precision_at)
    return MetricReport(
        precision_at={k: math.fsum(r.precision_at[k] for r in reports) / len(reports) for k in ks},
        recall_at={k: math.fsum(r.recall_at[k] for r in reports) / len(reports) for k in ks},
        f1_at={k: math.fsum(r.f1_at[k] for r in reports) / len(reports) for k in ks},
        ndcg=math.fsum(r.ndcg for r in reports) / len(reports),
        rr=math.fsum(r.rr for r in reports) / len(reports),
        ap=math.fsum(r.ap for r in reports) / len(reports),
        auc=math.fsum(r.auc for r in reports) / len(reports),
    )
