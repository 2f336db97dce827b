"""Prospective counterfactual explanations: what a new interaction adds."""

from __future__ import annotations

from .records import PROSPECTIVE, SUCCESS, ExplanationRecord
from .recommend import recommend_top_k
from .scorers import ScorerParams
from .windows import MaskVector, SequenceWindow


def append_with_mask(window: SequenceWindow, mask: MaskVector, item: int):
    """Window plus ``item``; the mask realigns when the oldest slot is evicted."""
    evicting = window.used >= window.capacity
    new_window = window.append(item)
    new_mask = mask.shifted_left() if evicting else mask.copy()
    return new_window, new_mask


def prospective_explanation(
    params: ScorerParams,
    window: SequenceWindow,
    new_item: int,
    k: int,
    mask: MaskVector | None = None,
    exclude_history: bool = True,
) -> ExplanationRecord:
    """Items that enter the top-K once ``new_item`` joins the history."""
    params.check_item(new_item)
    if mask is None:
        mask = MaskVector.zeros(window.capacity)
    before = recommend_top_k(params, window, mask, k, exclude_history)
    new_window, new_mask = append_with_mask(window, mask, new_item)
    after = recommend_top_k(params, new_window, new_mask, k, exclude_history)
    added = after.item_set() - before.item_set()
    return ExplanationRecord(
        kind=PROSPECTIVE,
        status=SUCCESS,
        added_items=frozenset(added),
        final_mask=new_mask,
        target_item=new_item,
    )
