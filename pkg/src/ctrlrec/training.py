"""Next-item training with sampled negatives.

Every position of a user's train-span window predicts the following span
item; each positive step draws one uniform negative outside the user's span
and both feed a binary cross-entropy on the inner-product logits. Parameters
are snapshotted at the best validation ranking metric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import scorers
from .config import Config
from .errors import DataError
from .recommend import rank_from_scores
from .metrics import ndcg_from_rank
from .splits import SplitDataset
from .windows import PAD

log = logging.getLogger(__name__)


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)  # (epoch, loss, val_ndcg or None)
    best_epoch: int = -1
    best_val_ndcg: float = float("-inf")
    skipped_users: int = 0


def _training_arrays(dataset: SplitDataset, max_len: int):
    ids, labels, lengths = [], [], []
    skipped = 0
    for user in dataset.users:
        span = dataset.train_spans[user]
        if len(span) < 2:
            skipped += 1
            log.warning("user %s has %d interactions in the train span; skipped",
                        user, len(span))
            continue
        inputs = span[:-1][-max_len:]
        nexts = span[1:][-max_len:]
        row_ids = np.full(max_len, PAD, dtype=np.int64)
        row_labels = np.full(max_len, PAD, dtype=np.int64)
        row_ids[: len(inputs)] = inputs
        row_labels[: len(nexts)] = nexts
        ids.append(row_ids)
        labels.append(row_labels)
        lengths.append(len(inputs))
    if not ids:
        raise DataError("no user has enough interactions to train on")
    return np.stack(ids), np.stack(labels), np.asarray(lengths), skipped


def _sample_negatives(rng, batch_labels, n_items):
    """One uniform negative per positive step, never equal to the positive."""
    negs = rng.integers(0, n_items, size=batch_labels.shape)
    bad = (negs == batch_labels) & (batch_labels != PAD)
    while bad.any():
        negs[bad] = rng.integers(0, n_items, size=int(bad.sum()))
        bad = (negs == batch_labels) & (batch_labels != PAD)
    return negs


def validation_ndcg(params, dataset: SplitDataset, k: int = 10, chunk: int = 256):
    """Mean NDCG@k of each user's validation item, ranked over the catalog
    minus the input window (the held-out item always stays eligible)."""
    total, count = 0.0, 0
    users = [u for u in dataset.users if len(dataset.train_spans[u]) >= 2]
    for start in range(0, len(users), chunk):
        batch_users = users[start : start + chunk]
        ids = np.full((len(batch_users), params.max_len), PAD, dtype=np.int64)
        lengths = np.empty(len(batch_users), dtype=np.int64)
        for b, user in enumerate(batch_users):
            inputs = dataset.train_spans[user][:-1][-params.max_len :]
            ids[b, : len(inputs)] = inputs
            lengths[b] = len(inputs)
        inv = (ids != PAD).astype(np.float64)
        final = scorers.forward_final(params, ids, inv, lengths).data
        scores = final @ params.embeddings.T
        for b, user in enumerate(batch_users):
            held = dataset.validation_item(user)
            eligible = np.ones(params.n_items, dtype=bool)
            eligible[ids[b, : lengths[b]]] = False
            eligible[held] = True
            rank = rank_from_scores(scores[b], eligible, held)
            total += ndcg_from_rank(rank, k)
            count += 1
    return total / max(count, 1)


def train(dataset: SplitDataset, config: Config):
    """Returns (best_params, history). Deterministic for a fixed seed."""
    ids, labels, lengths, skipped = _training_arrays(dataset, config.max_len)
    n_users = ids.shape[0]
    params = scorers.init_params(
        config.scorer,
        n_items=dataset.n_items,
        dim=config.embedding_dim,
        max_len=config.max_len,
        dropout=config.dropout,
        seed=config.seed,
        readout_window=config.readout_window,
    )
    opt = ad.Adam(params.leaves(), lr=config.learning_rate)
    root = np.random.default_rng(config.seed)
    rng_data, rng_drop = root.spawn(2)

    history = TrainHistory(skipped_users=skipped)
    best = params.copy()
    label_weight_all = (labels != PAD).astype(np.float64)

    for epoch in range(config.epochs):
        order = rng_data.permutation(n_users)
        epoch_loss, epoch_weight = 0.0, 0.0
        for start in range(0, n_users, config.batch_size):
            rows = order[start : start + config.batch_size]
            negs = _sample_negatives(rng_data, labels[rows], dataset.n_items)
            batch_ids = ids[rows]
            inv = (batch_ids != PAD).astype(np.float64)
            states = scorers.forward_states(params, batch_ids, inv,
                                            train=True, rng=rng_drop)
            pos_emb = ad.gather_rows(params.weight("emb", train=True),
                                     np.maximum(labels[rows], 0))
            neg_emb = ad.gather_rows(params.weight("emb", train=True), negs)
            pos_logits = ad.tsum(ad.mul(states, pos_emb), axis=2)
            neg_logits = ad.tsum(ad.mul(states, neg_emb), axis=2)
            weight = ad.Tensor(label_weight_all[rows])
            step_losses = ad.add(ad.softplus(ad.mul(pos_logits, -1.0)),
                                 ad.softplus(neg_logits))
            wsum = float(label_weight_all[rows].sum())
            loss = ad.mul(ad.tsum(ad.mul(step_losses, weight)), 1.0 / wsum)
            ad.backward(loss)
            opt.step()
            opt.zero_grad()
            epoch_loss += float(loss.data) * wsum
            epoch_weight += wsum
        mean_loss = epoch_loss / max(epoch_weight, 1.0)

        val = None
        if (epoch + 1) % config.eval_every == 0 or epoch == config.epochs - 1:
            val = validation_ndcg(params, dataset)
            if val > history.best_val_ndcg:
                history.best_val_ndcg = val
                history.best_epoch = epoch
                best = params.copy()
        history.epochs.append((epoch, mean_loss, val))
        log.info("epoch %d loss %.4f%s", epoch, mean_loss,
                 f" val_ndcg@10 {val:.4f}" if val is not None else "")

    if history.best_epoch < 0:
        best = params.copy()
    return best, history
