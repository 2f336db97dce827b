"""Retrospective counterfactual explanation generation.

Two generators answer "which past behaviors caused this recommendation":

- greedy search: revoke one behavior per iteration, picking the one whose
  removal best lowers the target's score while keeping the rest of the
  current list scoring high, until the target drops out of the top-K;
- continuous relaxation: optimize a [0,1] revocation vector by gradient
  descent on (mask size) + constraint hinge + retention terms, binarize at
  a threshold, then post-check by exact re-ranking.

Every success-status record is guaranteed sound: re-ranking under its final
mask excludes the target from the top-K.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import scorers
from .errors import ContractViolation
from .records import (
    FAILURE,
    METHOD_RELAX,
    METHOD_SEARCH,
    RETROSPECTIVE,
    SUCCESS,
    ExplanationRecord,
)
from .recommend import eligible_mask, recommend_top_k, topk_from_scores
from .windows import BINARY, PAD, MaskVector, SequenceWindow, keep_coefficients

log = logging.getLogger(__name__)


@dataclass
class RetroRequest:
    """Explanation request plus every generator hyperparameter."""

    window: SequenceWindow
    target_item: int
    k: int = 10
    exclude_history: bool = True
    greedy_retention_weight: float = 1.0
    relax_constraint_weight: float = 10.0
    relax_retention_weight: float = 1.0
    relax_margin: float = 0.1
    relax_learning_rate: float = 0.01
    relax_steps: int = 500
    relax_threshold: float = 0.5
    relax_check_every: int = 0
    relax_retention_penalty: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolation("k must be >= 1")
        if not (0.0 < self.relax_threshold < 1.0):
            raise ContractViolation("threshold must lie in (0, 1)")


def _original_list(params, req):
    zero = MaskVector.zeros(req.window.capacity)
    original = recommend_top_k(params, req.window, zero, req.k, req.exclude_history)
    if req.target_item not in original:
        raise ContractViolation(
            f"target {req.target_item} is not in the current top-{req.k}"
        )
    return original


def _batched_item_scores(params, window, keep_rows, item_ids):
    """Scores of ``item_ids`` under each keep-coefficient row; shape (B, k)."""
    batch = keep_rows.shape[0]
    ids = np.tile(window.ids_array(), (batch, 1))
    lengths = np.full(batch, window.used)
    final = scorers.forward_final(params, ids, keep_rows, lengths).data
    return final @ params.embeddings[np.asarray(item_ids, dtype=np.int64)].T


def run_iterative_search(params, req, method, choose) -> ExplanationRecord:
    """Shared revoke-one-at-a-time loop.

    ``choose(remaining, mask)`` picks the next slot to revoke. Stops as soon
    as re-ranking drops the target (success) or every real behavior has been
    revoked (failure).
    """
    original = _original_list(params, req)
    window = req.window
    mask = MaskVector.zeros(window.capacity)
    remaining = window.real_positions()
    revoked: list[tuple[int, int]] = []
    iterations = 0
    while remaining:
        pos = choose(remaining, mask)
        remaining.remove(pos)
        mask = mask.with_revoked(pos)
        revoked.append((pos, window.items[pos]))
        iterations += 1
        current = recommend_top_k(params, window, mask, req.k, req.exclude_history)
        if req.target_item not in current:
            return ExplanationRecord(
                kind=RETROSPECTIVE,
                status=SUCCESS,
                revoked=tuple(revoked),
                iterations=iterations,
                final_mask=mask,
                target_item=req.target_item,
                method=method,
            )
    return ExplanationRecord(
        kind=RETROSPECTIVE,
        status=FAILURE,
        revoked=(),
        iterations=iterations,
        final_mask=mask,
        target_item=req.target_item,
        method=method,
        note="window exhausted" if iterations else "empty window",
    )


def greedy_retrospective(params: scorers.ScorerParams, req: RetroRequest) -> ExplanationRecord:
    """Greedy search: each iteration revokes the behavior minimizing
    score(target) - retention_weight * sum(score(other current-list items)).
    """
    original = _original_list(params, req)
    others = [q for q in original.item_ids() if q != req.target_item]
    scored_items = [req.target_item] + others
    gamma = req.greedy_retention_weight

    def choose(remaining, mask):
        keep = keep_coefficients(req.window, mask)
        rows = np.tile(keep, (len(remaining), 1))
        rows[np.arange(len(remaining)), remaining] = 0.0
        item_scores = _batched_item_scores(params, req.window, rows, scored_items)
        h = item_scores[:, 0] - gamma * item_scores[:, 1:].sum(axis=1)
        return remaining[int(np.argmin(h))]

    return run_iterative_search(params, req, METHOD_SEARCH, choose)


# ------------------------------------------------------------- relaxation

def _kth_item(scores_row, eligible_row, target, k):
    """K-th ranked eligible item (target excluded); weakest eligible if fewer."""
    eligible = eligible_row.copy()
    eligible[target] = False
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return None
    sub = scores_row[idx]
    if idx.size > k:
        part = idx[np.argpartition(-sub, k - 1)[:k]]
    else:
        part = idx
    ps = scores_row[part]
    order = np.lexsort((part, ps))  # weakest score first, id ascending
    return int(part[order[0]])


def _eligibility_rows(n_items, window, mask_values, threshold, exclude_history):
    batch = mask_values.shape[0]
    eligible = np.ones((batch, n_items), dtype=bool)
    if not exclude_history:
        return eligible
    items = window.ids_array()
    real = items != PAD
    for b in range(batch):
        keep_slots = real & ~(mask_values[b] > threshold)
        eligible[b, items[keep_slots]] = False
    return eligible


def _rows_postcheck(params, window, bin_values, targets, k, exclude_history):
    """Exact re-ranking success check for each binarized mask row."""
    batch = bin_values.shape[0]
    real = (window.ids_array() != PAD).astype(np.float64)
    keep = (1.0 - bin_values) * real
    ids = np.tile(window.ids_array(), (batch, 1))
    lengths = np.full(batch, window.used)
    final = scorers.forward_final(params, ids, keep, lengths).data
    scores = final @ params.embeddings.T
    eligible = _eligibility_rows(params.n_items, window, bin_values, 0.5, exclude_history)
    ok = np.zeros(batch, dtype=bool)
    for b in range(batch):
        lst = topk_from_scores(scores[b], eligible[b], k)
        ok[b] = targets[b] not in lst
    return ok


def _relax_loss_from_final(final, mask_t, target_emb, kth_emb, list_emb,
                           weights, req: RetroRequest):
    """Per-row relaxation loss: mask size + constraint hinge + retention.

    ``final`` is the (B, d) representation under the relaxed mask; the K-th
    item per row is fixed by the caller (chosen outside the graph each step).
    """
    lam = req.relax_constraint_weight
    gamma2 = req.relax_retention_weight
    retention_sign = 1.0 if req.relax_retention_penalty else -1.0
    s_target = ad.tsum(ad.mul(final, ad.Tensor(target_emb)), axis=1)
    s_kth = ad.tsum(ad.mul(final, ad.Tensor(kth_emb)), axis=1)
    hinge = ad.relu(ad.add(ad.sub(s_target, s_kth), req.relax_margin))
    retention = ad.tsum(
        ad.mul(ad.matmul(final, ad.Tensor(list_emb.T)), ad.Tensor(weights)), axis=1
    )
    size_term = ad.tsum(mask_t, axis=1)
    return ad.add(
        size_term,
        ad.mul(ad.add(hinge, ad.mul(retention, retention_sign * gamma2)), lam),
    )


def relaxation_loss_gradient(params, window, target, req: RetroRequest,
                             mask_values, kth_item, list_items):
    """Loss value and its exact gradient w.r.t. one relaxed mask vector.

    The K-th ranked item and the retention list are given explicitly so the
    objective is a fixed differentiable function of the mask (matching one
    optimization step of the relaxation with those choices frozen).
    """
    ids = window.ids_array()[None, :]
    real = (window.ids_array() != PAD).astype(np.float64)[None, :]
    lengths = np.array([window.used])
    mask_t = ad.leaf(np.asarray(mask_values, dtype=np.float64)[None, :].copy())
    list_items = np.asarray(list_items, dtype=np.int64)
    weights = np.zeros((1, len(list_items)))
    others = list_items != target
    if others.sum() > 0:
        weights[0, others] = 1.0 / max(req.k - 1, 1)
    inv = ad.mul(ad.sub(1.0, mask_t), ad.Tensor(real))
    final = scorers.forward_final(params, ids, inv, lengths)
    loss_rows = _relax_loss_from_final(
        final, mask_t,
        params.embeddings[np.asarray([target])],
        params.embeddings[np.asarray([kth_item])],
        params.embeddings[list_items], weights, req,
    )
    total = ad.tsum(loss_rows)
    ad.backward(total)
    return float(total.data), mask_t.grad[0].copy()


def relax_many(params: scorers.ScorerParams, window: SequenceWindow, targets, req: RetroRequest):
    """Run the relaxation for several targets of one window at once.

    The per-target losses are separable, so stacking masks into one batch
    reproduces independent runs exactly; it only saves forward passes.
    """
    targets = [params.check_item(t) for t in targets]
    batch = len(targets)
    cap = window.capacity
    zero = MaskVector.zeros(cap)
    original = recommend_top_k(params, window, zero, req.k, req.exclude_history)
    for t in targets:
        if t not in original:
            raise ContractViolation(f"target {t} is not in the current top-{req.k}")

    list_items = np.asarray(original.item_ids(), dtype=np.int64)
    k = req.k

    # per-target retention weights over the original list (target excluded)
    weights = np.zeros((batch, len(list_items)))
    for b, t in enumerate(targets):
        others = list_items != t
        if others.sum() > 0:
            weights[b, others] = 1.0 / max(k - 1, 1)

    real = (window.ids_array() != PAD).astype(np.float64)[None, :]
    all_targets = np.asarray(targets, dtype=np.int64)
    list_emb = params.embeddings[list_items]

    # rows are dropped from the working batch once their binarized mask
    # passes the exact re-ranking check; their trajectories are unaffected
    # because the per-row losses never interact
    active = np.arange(batch)
    mask = ad.leaf(np.zeros((batch, cap)))
    opt = ad.Adam([mask], lr=req.relax_learning_rate)
    values = np.zeros((batch, cap))
    end_step = np.full(batch, req.relax_steps)
    note = ""
    steps_run = 0

    for step in range(req.relax_steps):
        if active.size == 0:
            break
        ids = np.tile(window.ids_array(), (active.size, 1))
        lengths = np.full(active.size, window.used)
        inv = ad.mul(ad.sub(1.0, mask), ad.Tensor(real))
        final = scorers.forward_final(params, ids, inv, lengths)

        detached = final.data @ params.embeddings.T
        eligible = _eligibility_rows(
            params.n_items, window, mask.data, req.relax_threshold, req.exclude_history
        )
        kth = np.empty(active.size, dtype=np.int64)
        for row, b in enumerate(active):
            bar = _kth_item(detached[row], eligible[row], targets[b], k)
            kth[row] = targets[b] if bar is None else bar

        loss_rows = _relax_loss_from_final(
            final, mask, params.embeddings[all_targets[active]],
            params.embeddings[kth], list_emb, weights[active], req
        )
        total = ad.tsum(loss_rows)
        if not np.isfinite(total.data):
            note = f"non-finite loss at step {step}"
            steps_run = step
            break

        ad.backward(total)
        opt.step()
        opt.zero_grad()
        np.clip(mask.data, 0.0, 1.0, out=mask.data)
        steps_run = step + 1

        if req.relax_check_every > 0 and steps_run % req.relax_check_every == 0:
            bin_rows = (mask.data > req.relax_threshold).astype(np.float64)
            ok = _rows_postcheck(
                params, window, bin_rows,
                [targets[b] for b in active], k, req.exclude_history,
            )
            if ok.any():
                done = np.flatnonzero(ok)
                for row in done:
                    b = active[row]
                    values[b] = mask.data[row]
                    end_step[b] = steps_run
                keep = ~ok
                active = active[keep]
                if active.size == 0:
                    break
                kept_mask = ad.leaf(mask.data[keep].copy())
                kept_opt = ad.Adam([kept_mask], lr=req.relax_learning_rate)
                kept_opt.t = opt.t
                kept_opt.m = [opt.m[0][keep].copy()]
                kept_opt.v = [opt.v[0][keep].copy()]
                mask, opt = kept_mask, kept_opt

    for row, b in enumerate(active):
        values[b] = mask.data[row]
        end_step[b] = steps_run
    bin_values = (values > req.relax_threshold).astype(np.float64)
    ok = _rows_postcheck(params, window, bin_values, targets, k, req.exclude_history)

    out = []
    for b, t in enumerate(targets):
        final_mask = MaskVector(bin_values[b], BINARY)
        iterations = int(end_step[b])
        if ok[b]:
            revoked = tuple(
                (int(p), window.items[int(p)]) for p in np.flatnonzero(bin_values[b])
            )
            out.append(ExplanationRecord(
                kind=RETROSPECTIVE, status=SUCCESS, revoked=revoked,
                iterations=iterations, final_mask=final_mask,
                target_item=t, method=METHOD_RELAX,
            ))
        else:
            out.append(ExplanationRecord(
                kind=RETROSPECTIVE, status=FAILURE, revoked=(),
                iterations=iterations, final_mask=final_mask,
                target_item=t, method=METHOD_RELAX,
                note=note or "post-check failed",
            ))
    return out


def relaxed_retrospective(params: scorers.ScorerParams, req: RetroRequest) -> ExplanationRecord:
    return relax_many(params, req.window, [req.target_item], req)[0]


def verify_record(params, window, record, k, exclude_history=True) -> bool:
    """Exact soundness re-check: does the record's mask remove its target?"""
    if record.final_mask is None:
        return False
    current = recommend_top_k(params, window, record.final_mask, k, exclude_history)
    return record.target_item not in current
