"""Top-K recommendation over the full catalog."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scorers
from .errors import ContractViolation
from .windows import BINARY, PAD, MaskVector, SequenceWindow


@dataclass
class RecommendationList:
    entries: list[tuple[int, float]]
    k: int
    truncated: bool = False
    _items: frozenset = field(default=None, repr=False, compare=False)

    def item_ids(self) -> list[int]:
        return [item for item, _ in self.entries]

    def item_set(self) -> frozenset:
        if self._items is None:
            object.__setattr__(self, "_items", frozenset(i for i, _ in self.entries))
        return self._items

    def __contains__(self, item: int) -> bool:
        return item in self.item_set()

    def rank_of(self, item: int) -> int:
        """1-based rank, or 0 if absent."""
        for r, (it, _) in enumerate(self.entries, start=1):
            if it == item:
                return r
        return 0


def revoked_positions_of(mask: MaskVector, threshold: float = 0.5) -> list[int]:
    if mask.mode == BINARY:
        return mask.revoked_positions()
    return [int(i) for i in np.flatnonzero(mask.values > threshold)]


def eligible_mask(
    n_items: int,
    window: SequenceWindow,
    mask: MaskVector,
    exclude_history: bool = True,
) -> np.ndarray:
    """Boolean eligibility per catalog item.

    With history exclusion on, an item is ineligible while it still sits at
    some non-revoked window slot; revoking every slot holding it makes it
    recommendable again.
    """
    eligible = np.ones(n_items, dtype=bool)
    if not exclude_history:
        return eligible
    revoked = set(revoked_positions_of(mask))
    for pos, item in enumerate(window.items):
        if item != PAD and pos not in revoked:
            eligible[item] = False
    return eligible


def topk_from_scores(scores: np.ndarray, eligible: np.ndarray, k: int) -> RecommendationList:
    """K best eligible items; ties broken by ascending item id."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    ids = np.flatnonzero(eligible)
    sub = scores[ids]
    order = np.lexsort((ids, -sub))
    chosen = ids[order[:k]]
    entries = [(int(i), float(scores[i])) for i in chosen]
    return RecommendationList(entries, k=k, truncated=len(entries) < k)


def recommend_top_k(
    params: scorers.ScorerParams,
    window: SequenceWindow,
    mask: MaskVector,
    k: int,
    exclude_history: bool = True,
) -> RecommendationList:
    scores = scorers.all_scores(params, window, mask)
    eligible = eligible_mask(params.n_items, window, mask, exclude_history)
    return topk_from_scores(scores, eligible, k)


def rank_from_scores(scores: np.ndarray, eligible: np.ndarray, item: int) -> int:
    """1-based rank of ``item`` among eligible items under the list ordering."""
    if not eligible[item]:
        return 0
    s = scores[item]
    better = (scores > s) | ((scores == s) & (np.arange(len(scores)) < item))
    return int(np.count_nonzero(better & eligible)) + 1
