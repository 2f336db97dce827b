"""Adapted baselines for retrospective explanation generation.

- random search: revoke uniformly random past behaviors until the target
  leaves the list (simulates manual trial-and-error feedback);
- similarity removal: repeatedly revoke the unrevoked behavior whose item
  embedding aligns best (inner product) with the target item's embedding.
"""

from __future__ import annotations

import numpy as np

from .records import METHOD_RANDOM, METHOD_SIMILARITY, ExplanationRecord
from .retrospective import RetroRequest, run_iterative_search
from .scorers import ScorerParams


def baseline_random(params: ScorerParams, req: RetroRequest, seed: int = 0) -> ExplanationRecord:
    rng = np.random.default_rng(seed)

    def choose(remaining, mask):
        return remaining[int(rng.integers(len(remaining)))]

    return run_iterative_search(params, req, METHOD_RANDOM, choose)


def baseline_similarity(params: ScorerParams, req: RetroRequest) -> ExplanationRecord:
    target_emb = params.embeddings[params.check_item(req.target_item)]
    window = req.window

    def choose(remaining, mask):
        sims = [params.embeddings[window.items[p]] @ target_emb for p in remaining]
        return remaining[int(np.argmax(sims))]

    return run_iterative_search(params, req, METHOD_SIMILARITY, choose)
