"""Fill explanation records into user-facing text."""

from __future__ import annotations

from .records import PROSPECTIVE, RETROSPECTIVE, ExplanationRecord

RETRO_TEMPLATE = (
    "We recommend this item because you {verb} {items}. "
    "Revoke these behaviors to stop its recommendation."
)
PRO_TEMPLATE = (
    "With the current interaction, {items} will be added to future "
    "recommendations. Revoke this behavior to prevent their recommendation."
)
PRO_EMPTY = (
    "With the current interaction, there will be "
    "no change to future recommendations."
)
RETRO_FAILURE = (
    "No sufficient set of past behaviors was found: revoking the entire "
    "history still leaves this item recommended."
)


def _join(names) -> str:
    return ", ".join(names)


def render_explanation(
    record: ExplanationRecord,
    item_names,
    verb: str = "interacted with",
) -> str:
    """``item_names`` maps item id -> display name (callable or mapping)."""
    name = item_names if callable(item_names) else lambda i: item_names[i]
    if record.kind == RETROSPECTIVE:
        if not record.succeeded:
            return RETRO_FAILURE
        names = [name(i) for i in record.revoked_items()]
        return RETRO_TEMPLATE.format(verb=verb, items=_join(names))
    if record.kind == PROSPECTIVE:
        if not record.added_items:
            return PRO_EMPTY
        names = [name(i) for i in sorted(record.added_items)]
        return PRO_TEMPLATE.format(items=_join(names))
    raise ValueError(f"unknown record kind {record.kind!r}")
