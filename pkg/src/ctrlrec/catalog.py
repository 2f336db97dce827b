"""Catalog of dense item/user ids and optional display names."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidItemError


@dataclass(frozen=True)
class Catalog:
    n_items: int
    n_users: int
    item_names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_items < 1 or self.n_users < 1:
            raise ValueError("catalog needs at least one item and one user")

    def check_item(self, item: int) -> int:
        if not (0 <= item < self.n_items):
            raise InvalidItemError(f"item {item} outside catalog of {self.n_items}")
        return item

    def name_of(self, item: int) -> str:
        return self.item_names.get(item, f"Item {item}")
