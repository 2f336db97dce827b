"""Interaction windows and per-position revocation masks.

A window holds a user's chronological tail of item ids, at most ``capacity``
of them. Slots are indexed 0..used-1 in history order; the sentinel ``PAD``
marks an absent behavior. Masks are always ``capacity`` long and aligned with
window slots: mask value 1 revokes the behavior at that slot by zeroing its
embedding, which is exactly what a padding slot contributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

PAD = -1

BINARY = "binary"
RELAXED = "relaxed"


@dataclass(frozen=True)
class SequenceWindow:
    items: tuple[int, ...]
    capacity: int

    def __post_init__(self):
        if len(self.items) > self.capacity:
            raise ContractViolation(
                f"window holds {len(self.items)} items, capacity {self.capacity}"
            )
        for it in self.items:
            if it != PAD and it < 0:
                raise ContractViolation(f"negative item id {it}")

    @property
    def used(self) -> int:
        """Number of occupied slots, padding entries included."""
        return len(self.items)

    @property
    def effective_length(self) -> int:
        """Number of real (non-padding) behaviors."""
        return sum(1 for it in self.items if it != PAD)

    def real_positions(self) -> list[int]:
        return [i for i, it in enumerate(self.items) if it != PAD]

    def ids_array(self) -> np.ndarray:
        """Slot ids padded with PAD up to capacity; shape (capacity,)."""
        arr = np.full(self.capacity, PAD, dtype=np.int64)
        if self.items:
            arr[: len(self.items)] = self.items
        return arr

    def append(self, item: int) -> "SequenceWindow":
        """New window with ``item`` appended; oldest slot evicted when full."""
        if len(self.items) < self.capacity:
            return SequenceWindow(self.items + (item,), self.capacity)
        return SequenceWindow(self.items[1:] + (item,), self.capacity)

    def with_item(self, position: int, item: int) -> "SequenceWindow":
        if not (0 <= position < len(self.items)):
            raise ContractViolation(f"position {position} out of range")
        items = list(self.items)
        items[position] = item
        return SequenceWindow(tuple(items), self.capacity)


@dataclass
class MaskVector:
    values: np.ndarray
    mode: str = BINARY

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ContractViolation("mask must be one-dimensional")
        if self.mode == BINARY:
            if not np.all(np.isin(self.values, (0.0, 1.0))):
                raise ContractViolation("binary mask may contain only 0/1")
        elif self.mode == RELAXED:
            if np.any(self.values < 0.0) or np.any(self.values > 1.0):
                raise ContractViolation("relaxed mask must lie in [0, 1]")
        else:
            raise ContractViolation(f"unknown mask mode {self.mode!r}")

    def __len__(self):
        return len(self.values)

    @classmethod
    def zeros(cls, length: int, mode: str = BINARY) -> "MaskVector":
        return cls(np.zeros(length), mode)

    @classmethod
    def from_positions(cls, length: int, positions) -> "MaskVector":
        values = np.zeros(length)
        for p in positions:
            if not (0 <= p < length):
                raise ContractViolation(f"mask position {p} out of range")
            values[p] = 1.0
        return cls(values, BINARY)

    def revoked_positions(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.values == 1.0)]

    def with_revoked(self, position: int) -> "MaskVector":
        values = self.values.copy()
        values[position] = 1.0
        return MaskVector(values, BINARY)

    def shifted_left(self) -> "MaskVector":
        """Mask realigned after the oldest window slot is evicted."""
        values = np.concatenate([self.values[1:], [0.0]])
        return MaskVector(values, self.mode)

    def binarized(self, threshold: float) -> "MaskVector":
        return MaskVector((self.values > threshold).astype(np.float64), BINARY)

    def copy(self) -> "MaskVector":
        return MaskVector(self.values.copy(), self.mode)


def check_mask(window: SequenceWindow, mask: MaskVector) -> None:
    if len(mask) != window.capacity:
        raise ContractViolation(
            f"mask length {len(mask)} != window capacity {window.capacity}"
        )


def keep_coefficients(window: SequenceWindow, mask: MaskVector) -> np.ndarray:
    """Per-slot multiplier (1 - mask) with padding slots forced to zero."""
    check_mask(window, mask)
    real = (window.ids_array() != PAD).astype(np.float64)
    return (1.0 - mask.values) * real


def apply_mask(window: SequenceWindow, mask: MaskVector, embeddings: np.ndarray) -> np.ndarray:
    """Masked embedding sequence, shape (capacity, d).

    Slot t carries (1 - mask[t]) * e(item_t); padding slots and fully revoked
    slots are the zero vector.
    """
    coeff = keep_coefficients(window, mask)
    ids = np.maximum(window.ids_array(), 0)
    return embeddings[ids] * coeff[:, None]
