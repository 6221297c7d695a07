"""TTI-stepped simulation loop, per-TTI metrics, and run summaries."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .controller import MULTI, Controller, SharingPolicy
from .grid import Owner, RbMap, ResourceGrid, GridError, bits_per_rb
from .model import Scenario, validate_scenario
from .scheduler import TenantScheduler
from .stack import SliceCoordinator
from .traffic import ChannelSource, TrafficSource


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubsliceRecord:
    demand_rbs: int
    granted_rbs: int
    served_bits: int
    backlog_bits: int
    gbr_credit_bits: Optional[float] = None
    eligible_bits: Optional[int] = None  # GBR only: min(backlog, credit) before service
    delays_ms: tuple = ()


@dataclass(frozen=True)
class TenantRecord:
    reported_demand_rbs: int
    demand_rbs: int  # what the controller acted on
    grant_rbs: int
    used_rbs: int


@dataclass(frozen=True)
class MetricsRecord:
    tti: int
    num_rbs: int
    subslices: Dict[tuple, SubsliceRecord]
    tenants: Dict[int, TenantRecord]
    assigned_rbs: int

    @property
    def utilization(self) -> float:
        return self.assigned_rbs / self.num_rbs


@dataclass
class SubsliceSummary:
    throughput_bps: float
    mean_delay_ms: Optional[float]
    p95_delay_ms: Optional[int]
    gbr_satisfaction: Optional[float]
    mean_grant_rbs: float
    served_bits: int
    completed_sdus: int


@dataclass
class Summary:
    total_ttis: int
    seed: Optional[int] = None
    policy: Optional[str] = None
    subslices: Dict[tuple, SubsliceSummary] = field(default_factory=dict)
    tenant_mean_grant: Dict[int, float] = field(default_factory=dict)
    cell: Optional[SubsliceSummary] = None
    mean_utilization: Optional[float] = None


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    records: List[MetricsRecord]
    summary: Summary


def p95(values) -> Optional[int]:
    """Nearest-rank 95th percentile."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[math.ceil(0.95 * len(ordered)) - 1]


def _summarize_stream(served, grants, delays, eligible, served_when_eligible,
                      duration_s) -> SubsliceSummary:
    n = len(grants)
    total = sum(served)
    sat = None
    if eligible:
        sat = sum(1 for e, s in zip(eligible, served_when_eligible) if s >= e) / len(eligible)
    return SubsliceSummary(
        throughput_bps=total / duration_s,
        mean_delay_ms=sum(delays) / len(delays) if delays else None,
        p95_delay_ms=p95(delays),
        gbr_satisfaction=sat,
        mean_grant_rbs=sum(grants) / n,
        served_bits=total,
        completed_sdus=len(delays),
    )


def summarize(records, seed=None, policy=None) -> Summary:
    records = list(records)
    summary = Summary(total_ttis=len(records), seed=seed,
                      policy=str(policy) if policy is not None else None)
    if not records:
        return summary
    duration_s = len(records) / 1000
    for key in sorted(records[0].subslices):
        rows = [r.subslices[key] for r in records]
        delays = [d for row in rows for d in row.delays_ms]
        gbr = [row for row in rows if row.eligible_bits]
        summary.subslices[key] = _summarize_stream(
            [row.served_bits for row in rows], [row.granted_rbs for row in rows], delays,
            [row.eligible_bits for row in gbr], [row.served_bits for row in gbr], duration_s)
    for tid in sorted(records[0].tenants):
        summary.tenant_mean_grant[tid] = sum(r.tenants[tid].grant_rbs for r in records) / len(records)
    summary.cell = _summarize_stream(
        [sum(s.served_bits for s in r.subslices.values()) for r in records],
        [r.assigned_rbs for r in records],
        [d for r in records for s in r.subslices.values() for d in s.delays_ms],
        [], [], duration_s)
    summary.mean_utilization = sum(r.utilization for r in records) / len(records)
    return summary


class Simulation:
    """One deterministic run; :meth:`step` advances exactly one TTI."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = validate_scenario(scenario)
        self.seed = self.scenario.seed if seed is None else seed
        self.policy: SharingPolicy = self.scenario.policy
        self.grid = ResourceGrid(self.scenario.num_rbs)
        self.registry = self.scenario.registry
        self.coordinator = SliceCoordinator(self.registry)
        self.schedulers = {}
        for t in self.scenario.tenants:
            members = {}
            for u in self.scenario.ues:
                if u.tenant_id == t.tenant_id:
                    members.setdefault(u.subslice_id, []).append(u.ue_id)
            self.schedulers[t.tenant_id] = TenantScheduler(t, members)
        self.controller = Controller({t.tenant_id: t.dedicated_rbs for t in self.scenario.tenants},
                                     self.grid.num_rbs, self.policy)
        self.sources = [(u, TrafficSource(u.traffic, u.ue_id, self.seed),
                         ChannelSource(u.channel, u.ue_id, self.seed)) for u in self.scenario.ues]
        self.clock = 0
        self.last_map: Optional[RbMap] = None
        self.last_decision = None

    @property
    def multi_level(self) -> bool:
        return self.policy.slicing == MULTI

    def _digest(self) -> str:
        h = hashlib.sha256()
        for tid, mac in self.coordinator.macs.items():
            for key, buf in sorted(mac.buffers.items()):
                h.update(f"{tid}:{key}:{buf.backlog_bits}:{buf.served_bits};".encode())
        return h.hexdigest()[:16]

    def _abort(self, msg: str):
        raise SimulationError(f"TTI {self.clock}: {msg} [state {self._digest()}]")

    def step(self) -> MetricsRecord:
        tti = self.clock
        coord = self.coordinator
        multi = self.multi_level

        for ue, traffic, _ in self.sources:
            tid, sid = self.registry[ue.ue_id]
            backlog = coord.mac(tid).buffer(sid, ue.ue_id).backlog_bits
            for sdu in traffic.arrivals(tti, backlog):
                coord.deliver(sdu)

        cqi = {ue.ue_id: channel.cqi_at(tti) for ue, _, channel in self.sources}

        for sched in self.schedulers.values():
            sched.accrue()

        reports = {tid: s.compute_demand(coord.mac(tid), cqi, class_aware=multi)
                   for tid, s in self.schedulers.items()}

        totals = {tid: r.total_demand_rbs for tid, r in reports.items()}
        demands, decision = self.controller.decide(tti, totals)
        if decision.granted > self.grid.num_rbs:
            self._abort(f"grants {decision.grants} exceed {self.grid.num_rbs} RBs")

        rb_map = RbMap(tti, self.grid.num_rbs)
        served = {}
        granted_ss = {}
        used = {}
        for tid, sched in self.schedulers.items():
            grant = decision.grants[tid]
            report = reports[tid]
            if multi:
                schedule = sched.schedule_multi(report, grant, cqi)
            else:
                schedule = sched.schedule_single(report, grant, cqi)
            if schedule.total_rbs > grant:
                self._abort(f"tenant {tid} scheduled {schedule.total_rbs} RBs on a grant of {grant}")
            used[tid] = schedule.total_rbs
            pos, _ = decision.ranges[tid]
            for entry in schedule:
                try:
                    rb_map.assign_range(Owner(tid, entry.subslice_id, entry.ue_id), pos, entry.rb_count)
                except GridError as exc:
                    self._abort(str(exc))
                pos += entry.rb_count
                pdus = coord.serve(tid, entry.subslice_id, entry.ue_id, entry.budget_bits, tti)
                sent = sum(p.size_bits for p in pdus)
                if sent > entry.rb_count * bits_per_rb(cqi[entry.ue_id]):
                    self._abort(f"ue {entry.ue_id} sent {sent} bits beyond its RB capacity")
                if multi and entry.subslice_id in sched.buckets:
                    sched.consume(entry.subslice_id, sent)
                key = (tid, entry.subslice_id)
                served[key] = served.get(key, 0) + sent
                granted_ss[key] = granted_ss.get(key, 0) + entry.rb_count

        subslices = {}
        tenants = {}
        for tid, sched in self.schedulers.items():
            mac = coord.mac(tid)
            delays = {}
            for (sid, _), d in mac.drain_completions():
                delays.setdefault(sid, []).append(d)
            for key, buf in mac.buffers.items():
                if buf.delivered_bits != buf.served_bits + buf.backlog_bits:
                    self._abort(f"bit conservation broken for tenant {tid} queue {key}")
            for sid in sched.subslices:
                bucket = sched.buckets.get(sid)
                subslices[(tid, sid)] = SubsliceRecord(
                    demand_rbs=reports[tid].demand_rbs[sid],
                    granted_rbs=granted_ss.get((tid, sid), 0),
                    served_bits=served.get((tid, sid), 0),
                    backlog_bits=mac.backlog_bits(sid),
                    gbr_credit_bits=bucket.credit_bits if bucket else None,
                    eligible_bits=reports[tid].gbr_eligible_bits.get(sid),
                    delays_ms=tuple(delays.get(sid, ())),
                )
            tenants[tid] = TenantRecord(totals[tid], demands[tid], decision.grants[tid], used[tid])

        self.last_map = rb_map
        self.last_decision = decision
        self.clock += 1
        return MetricsRecord(tti, self.grid.num_rbs, subslices, tenants, rb_map.assigned)


def run(scenario: Scenario, seed: Optional[int] = None,
        duration_ttis: Optional[int] = None) -> RunResult:
    sim = Simulation(scenario, seed)
    duration = sim.scenario.duration_ttis if duration_ttis is None else duration_ttis
    records = [sim.step() for _ in range(duration)]
    return RunResult(sim.scenario, sim.seed, records,
                     summarize(records, seed=sim.seed, policy=sim.policy.name))
