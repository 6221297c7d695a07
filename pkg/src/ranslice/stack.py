"""Downlink packet path: slice coordinator routing into per-tenant MAC buffers.

RLC runs lossless and unacknowledged; an SDU is queued as one segment and
is only cut when a transmission budget ends inside it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


class RoutingError(LookupError):
    pass


@dataclass(eq=False)
class Sdu:
    size_bits: int
    ue_id: int
    arrival_tti: int

    def __post_init__(self):
        if self.size_bits <= 0:
            raise ValueError(f"SDU size must be positive, got {self.size_bits}")


@dataclass(eq=False)
class Segment:
    parent: Sdu
    size_bits: int
    is_last: bool = True


@dataclass
class Pdu:
    ue_id: int
    carried: list = field(default_factory=list)  # (Sdu, bits) pairs

    @property
    def size_bits(self) -> int:
        return sum(bits for _, bits in self.carried)


class MacBuffer:
    """FIFO segment queue for one (tenant, sub-slice, UE) with cached backlog."""

    def __init__(self):
        self.queue = deque()
        self.backlog_bits = 0
        self.delivered_bits = 0
        self.served_bits = 0

    def push(self, sdu: Sdu):
        self.queue.append(Segment(sdu, sdu.size_bits, True))
        self.backlog_bits += sdu.size_bits
        self.delivered_bits += sdu.size_bits

    def head_arrival(self):
        return self.queue[0].parent.arrival_tti if self.queue else None

    def pop_bits(self, budget_bits: int, tti: int, completions: list, key) -> list:
        if budget_bits <= 0 or not self.queue:
            return []
        pdu = Pdu(key[-1])
        left = budget_bits
        while left > 0 and self.queue:
            head = self.queue[0]
            if head.size_bits <= left:
                self.queue.popleft()
                pdu.carried.append((head.parent, head.size_bits))
                left -= head.size_bits
                completions.append((key, tti - head.parent.arrival_tti + 1))
            else:
                # split: transmitted part leaves, remainder keeps its place at the head
                pdu.carried.append((head.parent, left))
                self.queue[0] = Segment(head.parent, head.size_bits - left, True)
                left = 0
        sent = budget_bits - left
        self.backlog_bits -= sent
        self.served_bits += sent
        return [pdu]


class TenantMac:
    """One tenant's MAC: buffers for each of its (sub-slice, UE) pairs."""

    def __init__(self, tenant_id: int, subslice_ids, members):
        self.tenant_id = tenant_id
        self.subslice_ids = tuple(subslice_ids)
        self.buffers = {(sid, uid): MacBuffer() for sid, uid in members}
        self.completions = []  # ((subslice_id, ue_id), delay_ms) for SDUs finished

    def buffer(self, subslice_id: int, ue_id: int) -> MacBuffer:
        try:
            return self.buffers[(subslice_id, ue_id)]
        except KeyError:
            raise KeyError(
                f"tenant {self.tenant_id} has no queue for subslice {subslice_id}, ue {ue_id}"
            ) from None

    def backlog_bits(self, subslice_id: int) -> int:
        if subslice_id not in self.subslice_ids:
            raise KeyError(f"tenant {self.tenant_id} has no subslice {subslice_id}")
        return sum(b.backlog_bits for k, b in self.buffers.items() if k[0] == subslice_id)

    def serve(self, subslice_id: int, ue_id: int, budget_bits: int, tti: int = 0) -> list:
        if budget_bits < 0:
            raise ValueError("budget_bits must be non-negative")
        buf = self.buffer(subslice_id, ue_id)
        return buf.pop_bits(budget_bits, tti, self.completions, (subslice_id, ue_id))

    def drain_completions(self) -> list:
        done, self.completions = self.completions, []
        return done


class SliceCoordinator:
    """Routes SDUs by destination UE to the owning tenant MAC and sub-slice.

    MACs never see each other; every cross-tenant effect goes through here.
    """

    def __init__(self, registry):
        self.registry = registry
        members = {tid: [] for tid in registry.subslices}
        for ue_id, (tid, sid) in registry.items():
            members[tid].append((sid, ue_id))
        self.macs = {
            tid: TenantMac(tid, registry.subslices[tid], sorted(members[tid]))
            for tid in sorted(members)
        }
        self.misrouted = 0
        self.misrouted_bits = 0

    def classify(self, ue_id: int):
        return self.registry.classify(ue_id)

    def deliver(self, sdu: Sdu) -> bool:
        """Queue ``sdu``; returns False when it was dropped as misrouted."""
        try:
            tid, sid = self.classify(sdu.ue_id)
        except RoutingError:
            self.misrouted += 1
            self.misrouted_bits += sdu.size_bits
            return False
        self.macs[tid].buffer(sid, sdu.ue_id).push(sdu)
        return True

    def mac(self, tenant_id: int) -> TenantMac:
        try:
            return self.macs[tenant_id]
        except KeyError:
            raise KeyError(f"unknown tenant {tenant_id}") from None

    def backlog_bits(self, tenant_id: int, subslice_id: int) -> int:
        return self.mac(tenant_id).backlog_bits(subslice_id)

    def serve(self, tenant_id: int, subslice_id: int, ue_id: int, budget_bits: int,
              tti: int = 0) -> list:
        return self.mac(tenant_id).serve(subslice_id, ue_id, budget_bits, tti)
