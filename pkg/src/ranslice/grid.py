"""Time-frequency resource grid and the CQI to capacity mapping."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

TTI_US = 1000
RE_PER_RB = 168  # 12 subcarriers x 14 symbols, no control overhead
VALID_NUM_RBS = (6, 15, 25, 50, 75, 100)

# LTE 4-bit CQI table, bits per resource element for CQI 1..15.
CQI_EFFICIENCY = (
    "0.1523", "0.2344", "0.3770", "0.6016", "0.8770",
    "1.1758", "1.4766", "1.9141", "2.4063", "2.7305",
    "3.3223", "3.9023", "4.5234", "5.1152", "5.5547",
)

_BITS_PER_RB = tuple(int(Fraction(e) * RE_PER_RB) for e in CQI_EFFICIENCY)


class GridError(Exception):
    pass


class ConflictError(GridError):
    pass


class BoundsError(GridError):
    pass


def bits_per_rb(cqi: int) -> int:
    """Bits one resource block carries in one TTI at the given CQI."""
    if not isinstance(cqi, int) or isinstance(cqi, bool) or not 1 <= cqi <= 15:
        raise ValueError(f"cqi must be an integer in 1..15, got {cqi!r}")
    return _BITS_PER_RB[cqi - 1]


@dataclass(frozen=True)
class ResourceGrid:
    num_rbs: int = 25
    tti_us: int = TTI_US

    def __post_init__(self):
        if self.num_rbs not in VALID_NUM_RBS:
            raise ValueError(f"num_rbs must be one of {VALID_NUM_RBS}, got {self.num_rbs}")
        if self.tti_us != TTI_US:
            raise ValueError("tti_us is fixed at 1000")


class Owner(NamedTuple):
    tenant_id: int
    subslice_id: int
    ue_id: int


@dataclass
class RbMap:
    """Ownership of every RB in one TTI; ``None`` marks an unassigned RB."""

    tti: int
    num_rbs: int
    slots: list = field(default=None)

    def __post_init__(self):
        if self.slots is None:
            self.slots = [None] * self.num_rbs
        elif len(self.slots) != self.num_rbs:
            raise ValueError("slots length must equal num_rbs")

    def assign_range(self, owner: Owner, start: int, length: int) -> "RbMap":
        if start < 0 or length < 0 or start + length > self.num_rbs:
            raise BoundsError(
                f"range [{start}, {start + length}) exceeds grid of {self.num_rbs} RBs"
            )
        taken = [i for i in range(start, start + length) if self.slots[i] is not None]
        if taken:
            raise ConflictError(f"RBs {taken} already assigned in TTI {self.tti}")
        owner = Owner(*owner)
        for i in range(start, start + length):
            self.slots[i] = owner
        return self

    def owner_of(self, rb: int) -> Optional[Owner]:
        return self.slots[rb]

    @property
    def assigned(self) -> int:
        return sum(1 for s in self.slots if s is not None)

    def utilization(self) -> float:
        return self.assigned / self.num_rbs


def utilization(rb_map: RbMap) -> float:
    return rb_map.utilization()
