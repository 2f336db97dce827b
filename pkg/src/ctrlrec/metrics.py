"""Controllability and ranking metrics."""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractViolation
from .recommend import RecommendationList
from .windows import BINARY, MaskVector


def complexity(mask: MaskVector, effective_length: int) -> float:
    """Fraction of real behaviors revoked: count(mask==1) / effective_length."""
    if mask.mode != BINARY:
        raise ContractViolation("complexity is defined on binary masks")
    if effective_length < 1:
        raise ContractViolation("effective_length must be >= 1")
    return float(np.count_nonzero(mask.values == 1.0)) / effective_length


def control_accuracy(original, counterfactual, undesired) -> float:
    """Jaccard overlap between removed items and intended removals."""
    orig = original.item_set() if isinstance(original, RecommendationList) else frozenset(original)
    ctf = (
        counterfactual.item_set()
        if isinstance(counterfactual, RecommendationList)
        else frozenset(counterfactual)
    )
    undesired = frozenset(undesired)
    if not undesired <= orig:
        raise ContractViolation("undesired items must come from the original list")
    removed = orig - ctf
    union = removed | undesired
    if not union:
        return 1.0
    return len(removed & undesired) / len(union)


def ndcg_at_k(ranked, held_out, k: int) -> float:
    """Single-relevant-item NDCG@K: 1/log2(rank+1) if ranked within K."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    ids = ranked.item_ids() if isinstance(ranked, RecommendationList) else list(ranked)
    for rank, item in enumerate(ids[:k], start=1):
        if item == held_out:
            return 1.0 / math.log2(rank + 1)
    return 0.0


def hit_rate_at_k(ranked, held_out, k: int) -> float:
    if k < 1:
        raise ContractViolation("k must be >= 1")
    ids = ranked.item_ids() if isinstance(ranked, RecommendationList) else list(ranked)
    return 1.0 if held_out in ids[:k] else 0.0


def ndcg_from_rank(rank: int, k: int) -> float:
    """NDCG@K given a 1-based rank (0 = not ranked)."""
    if 1 <= rank <= k:
        return 1.0 / math.log2(rank + 1)
    return 0.0
