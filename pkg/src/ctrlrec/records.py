"""Explanation records and their line-delimited report format."""

from __future__ import annotations

from dataclasses import dataclass, field

from .windows import MaskVector

RETROSPECTIVE = "retrospective"
PROSPECTIVE = "prospective"

SUCCESS = "success"
FAILURE = "failure"

METHOD_SEARCH = "search"
METHOD_RELAX = "relax"
METHOD_RANDOM = "random"
METHOD_SIMILARITY = "similarity"
METHODS = (METHOD_SEARCH, METHOD_RELAX, METHOD_RANDOM, METHOD_SIMILARITY)


@dataclass
class ExplanationRecord:
    kind: str
    status: str
    revoked: tuple = ()  # ((position, item_id), ...) for retrospective records
    added_items: frozenset = frozenset()  # prospective records
    iterations: int = 0
    final_mask: MaskVector | None = None
    user_id: int | None = None
    target_item: int | None = None
    method: str | None = None
    note: str = ""

    @property
    def succeeded(self) -> bool:
        return self.status == SUCCESS

    def revoked_items(self) -> list[int]:
        return [item for _, item in self.revoked]

    def revoked_positions(self) -> list[int]:
        return [pos for pos, _ in self.revoked]


def to_report_line(record: ExplanationRecord) -> str:
    """One tab-separated report line: user, target, method, status, revoked item ids, iterations."""
    revoked = ",".join(str(i) for i in record.revoked_items())
    cols = (
        "" if record.user_id is None else str(record.user_id),
        "" if record.target_item is None else str(record.target_item),
        record.method or "",
        record.status,
        revoked,
        str(record.iterations),
    )
    return "\t".join(cols)


def parse_report_line(line: str) -> dict:
    cols = line.rstrip("\n").split("\t")
    if len(cols) != 6:
        raise ValueError(f"expected 6 columns, got {len(cols)}")
    user, target, method, status, revoked, iterations = cols
    return {
        "user_id": int(user) if user else None,
        "target_item": int(target) if target else None,
        "method": method or None,
        "status": status,
        "revoked_items": [int(x) for x in revoked.split(",") if x],
        "iterations": int(iterations),
    }
