"""Per-tenant MAC scheduling.

Multi-level mode serves GBR sub-slices first, up to what their credit
allows, then shares the rest of the tenant's grant among NonGBR
sub-slices by weight.  Single-level mode is a plain RB-by-RB round robin
over every backlogged UE of the tenant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Tuple

from .grid import bits_per_rb

GBR_CAP_TTIS = 20


@dataclass
class GbrBucket:
    cap_bits: float
    credit_bits: float = 0.0

    def __post_init__(self):
        if not self.cap_bits > 0:
            raise ValueError("cap_bits must be positive")
        if not 0 <= self.credit_bits <= self.cap_bits:
            raise ValueError("credit must lie in [0, cap]")

    @classmethod
    def for_rate(cls, gbr_bps: float) -> "GbrBucket":
        cap = gbr_bps * GBR_CAP_TTIS / 1000
        return cls(cap_bits=cap, credit_bits=cap)

    def consume(self, bits: float):
        self.credit_bits = max(0.0, self.credit_bits - bits)


def accrue_gbr(bucket: GbrBucket, gbr_bps: float) -> GbrBucket:
    bucket.credit_bits = min(bucket.cap_bits, bucket.credit_bits + gbr_bps / 1000)
    return bucket


@dataclass
class DemandReport:
    tenant_id: int
    demand_rbs: Dict[int, int]  # per sub-slice
    gbr_subslices: Tuple[int, ...] = ()
    ue_rbs: Dict[tuple, int] = field(default_factory=dict)  # (subslice, ue) -> RBs
    ue_bits: Dict[tuple, int] = field(default_factory=dict)  # (subslice, ue) -> eligible bits
    gbr_eligible_bits: Dict[int, int] = field(default_factory=dict)

    @property
    def gbr_demand_rbs(self) -> int:
        return sum(self.demand_rbs[s] for s in self.gbr_subslices)

    @property
    def total_demand_rbs(self) -> int:
        return sum(self.demand_rbs.values())


@dataclass(frozen=True)
class ScheduleEntry:
    ue_id: int
    subslice_id: int
    rb_count: int
    bits: int  # RB capacity at the UE's CQI
    budget_bits: int  # what may actually be sent; below ``bits`` when GBR credit binds


class ScheduleList(list):
    @property
    def total_rbs(self) -> int:
        return sum(e.rb_count for e in self)

    def rbs_by_subslice(self) -> Dict[int, int]:
        out = {}
        for e in self:
            out[e.subslice_id] = out.get(e.subslice_id, 0) + e.rb_count
        return out


def _rbs_for(bits: int, cqi: int) -> int:
    return -(-bits // bits_per_rb(cqi)) if bits > 0 else 0


class TenantScheduler:
    """Scheduling state of one tenant MAC; round-robin positions persist across TTIs."""

    def __init__(self, tenant, ue_ids: Mapping[int, List[int]]):
        self.tenant = tenant
        self.subslices = {s.subslice_id: s for s in tenant.subslices}
        self.ues = {sid: sorted(ue_ids.get(sid, ())) for sid in self.subslices}
        self.all_ues = sorted((uid, sid) for sid, us in self.ues.items() for uid in us)
        self.buckets = {s.subslice_id: GbrBucket.for_rate(s.gbr_bps)
                        for s in tenant.subslices if s.is_gbr}
        self.pos = {sid: 0 for sid in self.subslices}
        self.single_pos = 0
        self.deficit = {sid: Fraction(0) for sid, s in self.subslices.items() if not s.is_gbr}

    @property
    def tenant_id(self) -> int:
        return self.tenant.tenant_id

    def accrue(self):
        for sid, bucket in self.buckets.items():
            accrue_gbr(bucket, self.subslices[sid].gbr_bps)

    def consume(self, subslice_id: int, bits: int):
        self.buckets[subslice_id].consume(bits)

    def compute_demand(self, mac, cqi: Mapping[int, int], class_aware: bool = True) -> DemandReport:
        report = DemandReport(self.tenant_id, {}, tuple(self.buckets))
        for sid, sub in self.subslices.items():
            backlog = {uid: mac.buffer(sid, uid).backlog_bits for uid in self.ues[sid]}
            if sub.is_gbr:
                credit = int(math.floor(self.buckets[sid].credit_bits))
                report.gbr_eligible_bits[sid] = min(sum(backlog.values()), credit)
            if sub.is_gbr and class_aware:
                # credit goes to the oldest head-of-line SDU first
                order = sorted((u for u in backlog if backlog[u] > 0),
                               key=lambda u: (mac.buffer(sid, u).head_arrival(), u))
                eligible = dict.fromkeys(backlog, 0)
                for uid in order:
                    eligible[uid] = min(backlog[uid], credit)
                    credit -= eligible[uid]
            else:
                eligible = backlog
            total = 0
            for uid in self.ues[sid]:
                rbs = _rbs_for(eligible[uid], cqi[uid])
                report.ue_rbs[(sid, uid)] = rbs
                report.ue_bits[(sid, uid)] = eligible[uid]
                total += rbs
            report.demand_rbs[sid] = total
        return report

    def _next_ue(self, sid: int, wants) -> int:
        ues = self.ues[sid]
        n = len(ues)
        start = self.pos[sid]
        for k in range(n):
            i = (start + k) % n
            if wants(ues[i]):
                self.pos[sid] = (i + 1) % n
                return ues[i]
        raise RuntimeError(f"sub-slice {sid} has no UE to serve")

    def _entries(self, alloc, report: DemandReport, cqi, capped) -> ScheduleList:
        out = ScheduleList()
        for (sid, uid), rbs in alloc.items():
            cap = rbs * bits_per_rb(cqi[uid])
            budget = min(cap, report.ue_bits[(sid, uid)]) if sid in capped else cap
            out.append(ScheduleEntry(uid, sid, rbs, cap, budget))
        return out

    def schedule_multi(self, report: DemandReport, granted_rbs: int, cqi) -> ScheduleList:
        if granted_rbs < 0:
            raise ValueError("granted_rbs must be non-negative")
        left = granted_rbs
        alloc = {}

        gbr_left = {s: report.demand_rbs[s] for s in report.gbr_subslices
                    if report.demand_rbs[s] > 0}
        ue_left = dict(report.ue_rbs)
        gbr_served = dict.fromkeys(gbr_left, 0)
        while left > 0 and gbr_left:
            sid = min(gbr_left, key=lambda s: (gbr_served[s], s))
            uid = self._next_ue(sid, lambda u: ue_left[(sid, u)] > 0)
            alloc[(sid, uid)] = alloc.get((sid, uid), 0) + 1
            ue_left[(sid, uid)] -= 1
            gbr_served[sid] += 1
            gbr_left[sid] -= 1
            if gbr_left[sid] == 0:
                del gbr_left[sid]
            left -= 1

        bits_left = {k: v for k, v in report.ue_bits.items() if k[0] in self.deficit}
        active = [s for s in sorted(self.deficit)
                  if any(bits_left[(s, u)] > 0 for u in self.ues[s])]
        served = dict.fromkeys(active, 0)
        pending = set(active)
        while left > 0 and pending:
            sid = min(pending, key=lambda s: ((self.deficit[s] + served[s])
                                              / self.subslices[s].weight, s))
            uid = self._next_ue(sid, lambda u: bits_left[(sid, u)] > 0)
            alloc[(sid, uid)] = alloc.get((sid, uid), 0) + 1
            bits_left[(sid, uid)] -= bits_per_rb(cqi[uid])
            served[sid] += 1
            left -= 1
            if all(bits_left[(sid, u)] <= 0 for u in self.ues[sid]):
                pending.discard(sid)
        self._settle_deficits(active, served)
        return self._entries(alloc, report, cqi, capped=set(report.gbr_subslices))

    def _settle_deficits(self, active, served):
        # carry service across TTIs, re-based so the least-served active sub-slice sits at 0
        for sid in self.deficit:
            self.deficit[sid] = self.deficit[sid] + served[sid] if sid in served else Fraction(0)
        if active:
            level = min(self.deficit[s] / self.subslices[s].weight for s in active)
            for sid in active:
                self.deficit[sid] -= level * self.subslices[sid].weight

    def schedule_single(self, report: DemandReport, granted_rbs: int, cqi) -> ScheduleList:
        if granted_rbs < 0:
            raise ValueError("granted_rbs must be non-negative")
        need = {uid: report.ue_rbs[(sid, uid)] for uid, sid in self.all_ues}
        sid_of = dict(self.all_ues)
        order = [uid for uid, _ in self.all_ues]
        alloc = {}
        left = granted_rbs
        while left > 0 and any(need.values()):
            n = len(order)
            for k in range(n):
                i = (self.single_pos + k) % n
                if need[order[i]] > 0:
                    break
            uid = order[i]
            self.single_pos = (i + 1) % n
            key = (sid_of[uid], uid)
            alloc[key] = alloc.get(key, 0) + 1
            need[uid] -= 1
            left -= 1
        return self._entries(alloc, report, cqi, capped=set())


def compute_demand(sched: TenantScheduler, mac, cqi, class_aware: bool = True) -> DemandReport:
    return sched.compute_demand(mac, cqi, class_aware)


def schedule_tenant_multi(sched: TenantScheduler, report: DemandReport, granted_rbs: int,
                          cqi) -> ScheduleList:
    return sched.schedule_multi(report, granted_rbs, cqi)


def schedule_tenant_single(sched: TenantScheduler, report: DemandReport, granted_rbs: int,
                           cqi) -> ScheduleList:
    return sched.schedule_single(report, granted_rbs, cqi)
