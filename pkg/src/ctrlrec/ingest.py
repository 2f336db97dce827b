"""Interaction log ingestion and support filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DataError

log = logging.getLogger(__name__)

FORMAT_MOVIELENS = "movielens"
FORMAT_TSV = "tsv"


@dataclass
class InteractionLog:
    """(user, item, timestamp) triples with dense ids.

    ``user_tokens[dense_id]`` / ``item_tokens[dense_id]`` recover the original
    identifiers. Records keep input order; per-user ordering is by timestamp
    with input order breaking ties.
    """

    records: list  # [(user, item, ts), ...] dense ids
    user_tokens: list
    item_tokens: list
    source: str = ""
    dedup_count: int = 0

    @property
    def n_users(self) -> int:
        return len(self.user_tokens)

    @property
    def n_items(self) -> int:
        return len(self.item_tokens)

    def user_sequences(self) -> dict:
        """Chronological item sequence per user (stable sort on timestamp)."""
        per_user = {}
        for user, item, ts in self.records:
            per_user.setdefault(user, []).append((ts, item))
        out = {}
        for user, pairs in per_user.items():
            pairs.sort(key=lambda p: p[0])  # stable: input order breaks ties
            out[user] = [item for _, item in pairs]
        return out


def _parse_line(line: str, fmt: str, lineno: int):
    if fmt == FORMAT_MOVIELENS:
        parts = line.split("::")
        if len(parts) != 4:
            raise DataError(f"line {lineno}: expected user::item::rating::timestamp")
        user, item, _rating, ts = parts
    else:
        parts = line.split("\t")
        if len(parts) == 3:
            user, item, ts = parts
        elif len(parts) == 4:
            user, item, _rating, ts = parts
        else:
            raise DataError(f"line {lineno}: expected 3 or 4 tab-separated columns")
    try:
        return user.strip(), item.strip(), int(ts.strip())
    except ValueError as exc:
        raise DataError(f"line {lineno}: bad timestamp {ts!r}") from exc


def ingest(path, fmt: str = FORMAT_TSV) -> InteractionLog:
    """Load a log file, dedup exact triples, and densify ids."""
    if fmt not in (FORMAT_MOVIELENS, FORMAT_TSV):
        raise DataError(f"unknown format {fmt!r}")
    triples = []
    seen = set()
    dedup = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            triple = _parse_line(line, fmt, lineno)
            if triple in seen:
                dedup += 1
                continue
            seen.add(triple)
            triples.append(triple)
    if not triples:
        raise DataError(f"{path}: no interactions found")

    user_tokens, item_tokens = [], []
    user_map, item_map = {}, {}
    records = []
    for user, item, ts in triples:
        if user not in user_map:
            user_map[user] = len(user_tokens)
            user_tokens.append(user)
        if item not in item_map:
            item_map[item] = len(item_tokens)
            item_tokens.append(item)
        records.append((user_map[user], item_map[item], ts))
    log.info("ingested %d interactions (%d users, %d items, %d duplicates dropped)",
             len(records), len(user_tokens), len(item_tokens), dedup)
    return InteractionLog(records, user_tokens, item_tokens, source=str(path),
                          dedup_count=dedup)


def filter_log(log_in: InteractionLog, min_user_interactions: int,
               min_item_interactions: int) -> InteractionLog:
    """Drop users/items below the support thresholds, to a fixed point."""
    if min_user_interactions < 0 or min_item_interactions < 0:
        raise DataError("thresholds must be >= 0")
    records = log_in.records
    while True:
        user_counts, item_counts = {}, {}
        for user, item, _ in records:
            user_counts[user] = user_counts.get(user, 0) + 1
            item_counts[item] = item_counts.get(item, 0) + 1
        bad_users = {u for u, c in user_counts.items() if c < min_user_interactions}
        bad_items = {i for i, c in item_counts.items() if c < min_item_interactions}
        if not bad_users and not bad_items:
            break
        records = [
            (u, i, ts) for u, i, ts in records
            if u not in bad_users and i not in bad_items
        ]
        if not records:
            raise DataError("filtering removed every interaction")

    kept_users = sorted({u for u, _, _ in records})
    kept_items = sorted({i for _, i, _ in records})
    user_remap = {old: new for new, old in enumerate(kept_users)}
    item_remap = {old: new for new, old in enumerate(kept_items)}
    out = InteractionLog(
        records=[(user_remap[u], item_remap[i], ts) for u, i, ts in records],
        user_tokens=[log_in.user_tokens[u] for u in kept_users],
        item_tokens=[log_in.item_tokens[i] for i in kept_items],
        source=log_in.source,
        dedup_count=log_in.dedup_count,
    )
    log.info("filter kept %d/%d users, %d/%d items, %d/%d interactions",
             out.n_users, log_in.n_users, out.n_items, log_in.n_items,
             len(out.records), len(log_in.records))
    return out
