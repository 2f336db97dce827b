"""Deterministic synthetic interaction corpus with sequential structure.

Design goals, in order: (1) next items must be predictable from the window,
(2) the cause of any single recommendation should be a small number of
identifiable window slots, and (3) different recommendations in one list
should trace back to different slots. To get all three, every item carries
a few successor items (mostly in its latent group), and each new interaction
follows a successor of a uniformly chosen item among the last few — not
necessarily the latest one. Recommendation lists therefore blend successors
of many window slots, and revoking one slot mainly affects the list entries
it caused.

A popularity-skewed within-group pick plus uniform noise round out the mix.
Users never repeat an item. Output is the generic tab-separated
(user, item, timestamp) interchange format plus an item-name table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SynthSpec:
    n_users: int = 900
    n_items: int = 2000
    n_groups: int = 25
    n_successors: int = 3
    min_len: int = 40
    max_len: int = 130
    follow_prob: float = 0.65  # follow a successor of a recent item
    group_prob: float = 0.25   # popularity-skewed pick from a recent group
    influence_window: int = 12  # how far back "recent" reaches
    cross_group_quota: int = 1  # successors drawn outside the item's group
    seed: int = 7


def _popularity_weights(count):
    ranks = np.arange(1, count + 1)
    w = 1.0 / ranks**0.8
    return w / w.sum()


def build_graph(spec: SynthSpec, rng):
    """(groups, members, member_weights, successors)."""
    groups = np.arange(spec.n_items) % spec.n_groups
    rng.shuffle(groups)
    members = [np.flatnonzero(groups == g) for g in range(spec.n_groups)]
    member_weights = [_popularity_weights(len(m)) for m in members]

    successors = np.zeros((spec.n_items, spec.n_successors), dtype=np.int64)
    for item in range(spec.n_items):
        g = groups[item]
        inside = members[g][members[g] != item]
        n_cross = min(spec.cross_group_quota, spec.n_successors - 1)
        n_inside = spec.n_successors - n_cross
        chosen = list(rng.choice(inside, size=n_inside, replace=False))
        for _ in range(n_cross):
            og = int(rng.integers(spec.n_groups))
            chosen.append(int(rng.choice(members[og])))
        successors[item] = chosen
    return groups, members, member_weights, successors


def generate_interactions(spec: SynthSpec):
    """Returns (records, item_names) with records = [(user, item, ts), ...]."""
    rng = np.random.default_rng(spec.seed)
    groups, members, member_weights, successors = build_graph(spec, rng)

    records = []
    for user in range(spec.n_users):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        seen = set()
        history = []
        first = int(rng.integers(spec.n_items))
        seen.add(first)
        history.append(first)
        ts = 1_000_000 + user
        records.append((user, first, ts))
        while len(history) < length:
            ts += 60
            recent = history[-spec.influence_window:]
            u = rng.random()
            item = None
            if u < spec.follow_prob:
                for _ in range(6):
                    source = recent[int(rng.integers(len(recent)))]
                    cand = int(successors[source, int(rng.integers(spec.n_successors))])
                    if cand not in seen:
                        item = cand
                        break
            elif u < spec.follow_prob + spec.group_prob:
                source = recent[int(rng.integers(len(recent)))]
                g = groups[source]
                for _ in range(8):
                    cand = int(rng.choice(members[g], p=member_weights[g]))
                    if cand not in seen:
                        item = cand
                        break
            if item is None:
                for _ in range(12):
                    cand = int(rng.integers(spec.n_items))
                    if cand not in seen:
                        item = cand
                        break
            if item is None:
                break
            seen.add(item)
            history.append(item)
            records.append((user, item, ts))
    names = {
        int(i): f"G{groups[i]:02d} Item {int(i):04d}" for i in range(spec.n_items)
    }
    return records, names


def write_corpus(spec: SynthSpec, data_path, names_path=None) -> int:
    records, names = generate_interactions(spec)
    with open(data_path, "w", encoding="utf-8") as fh:
        for user, item, ts in records:
            fh.write(f"u{user}\ti{item}\t{ts}\n")
    if names_path is not None:
        with open(names_path, "w", encoding="utf-8") as fh:
            for item in sorted(names):
                fh.write(f"i{item}\t{names[item]}\n")
    return len(records)
