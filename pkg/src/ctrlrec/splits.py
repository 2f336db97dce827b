"""Chronological per-user splits for training and the two evaluations.

Per user (needs at least sim_set_size + 3 interactions):

    [ train span ... includes the validation item as its last element ]
    [ simulation span of sim_set_size items ][ test item ]

Concatenating train span + simulation span + test item reproduces the user's
filtered chronological sequence exactly. Training windows are built from the
train span only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .errors import DataError
from .ingest import InteractionLog

log = logging.getLogger(__name__)


@dataclass
class SplitDataset:
    users: list
    train_spans: dict  # user -> [items...], last element is the validation item
    sim_sets: dict     # user -> [items...] of length m
    test_items: dict   # user -> item
    m: int
    max_len: int
    n_items: int
    n_users: int
    excluded_users: int = 0

    def validation_item(self, user) -> int:
        return self.train_spans[user][-1]

    def full_sequence(self, user) -> list:
        return list(self.train_spans[user]) + list(self.sim_sets[user]) + [
            self.test_items[user]
        ]

    def history_before_test(self, user) -> list:
        return list(self.train_spans[user]) + list(self.sim_sets[user])


def split(log_in: InteractionLog, m: int, max_len: int) -> SplitDataset:
    """Carve train/validation/simulation/test spans out of each user's tail."""
    if m < 0:
        raise DataError("simulation size must be >= 0")
    if max_len < 1:
        raise DataError("max_len must be >= 1")
    sequences = log_in.user_sequences()
    users = []
    train_spans, sim_sets, test_items = {}, {}, {}
    excluded = 0
    for user in sorted(sequences):
        seq = sequences[user]
        if len(seq) < m + 3:
            excluded += 1
            continue
        users.append(user)
        test_items[user] = seq[-1]
        sim_sets[user] = seq[len(seq) - 1 - m : len(seq) - 1]
        train_spans[user] = seq[: len(seq) - 1 - m]
    if not users:
        raise DataError("no user satisfies the split length floor")
    if excluded:
        log.warning("split excluded %d users below the %d-interaction floor",
                    excluded, m + 3)
    return SplitDataset(
        users=users,
        train_spans=train_spans,
        sim_sets=sim_sets,
        test_items=test_items,
        m=m,
        max_len=max_len,
        n_items=log_in.n_items,
        n_users=log_in.n_users,
        excluded_users=excluded,
    )


def save_split_manifest(dataset: SplitDataset, path) -> None:
    """Per-user span boundaries, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "m": dataset.m,
            "max_len": dataset.max_len,
            "n_items": dataset.n_items,
            "n_users": dataset.n_users,
            "excluded_users": dataset.excluded_users,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for user in dataset.users:
            row = {
                "user": user,
                "train_len": len(dataset.train_spans[user]),
                "sim_len": len(dataset.sim_sets[user]),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_split_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty manifest")
    return {"header": lines[0], "rows": lines[1:]}
