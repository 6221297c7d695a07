"""Exit criteria for the simulator, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import itertools

import numpy as np
import pytest

from ranslice.cli import main
from ranslice.controller import POLICY_STRINGS, SharingPolicy, apportion, parse_policy
from ranslice.engine import Simulation, run
from ranslice.model import validate_scenario

from conftest import ACCEPTANCE_LINES, shipped
from oracles import brute_force_grants, compositions
from test_engine import miniature


def check(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def test_c01_audio_video_split_exact():
    res = run(shipped("audio_video_split"))
    steady = res.records[100:]
    seen = {(r.subslices[(1, 1)].granted_rbs, r.subslices[(1, 2)].granted_rbs, r.utilization)
            for r in steady}
    check("C1 audio 10 / video 15 on 25 RBs", seen == {(10, 15, 1.0)},
          f"steady-state (audio, video, utilization) set = {sorted(seen)}")


def test_c02_voip_joins_video():
    res = run(shipped("voip_joins_video"))
    video, voip = (1, 1), (1, 2)
    recs = res.records
    before = {r.subslices[video].granted_rbs for r in recs[10:1000]}
    window = recs[1000:2000]
    drops_exact = all(
        r.subslices[video].granted_rbs == 25 - r.subslices[voip].demand_rbs
        and r.subslices[voip].granted_rbs == r.subslices[voip].demand_rbs
        for r in window)
    voip_served = any(r.subslices[voip].granted_rbs for r in window)
    eligible = [r.subslices[voip] for r in window if r.subslices[voip].eligible_bits]
    satisfaction = sum(s.served_bits >= s.eligible_bits for s in eligible) / len(eligible)
    last = max(r.tti for r in window if r.subslices[voip].granted_rbs)
    after = {r.subslices[video].granted_rbs for r in recs[last + 1:]}
    ok = (before == {25} and drops_exact and voip_served and satisfaction == 1.0
          and after == {25} and res.summary.subslices[voip].gbr_satisfaction == 1.0)
    check("C2 VoIP joins video", ok,
          f"video before={sorted(before)}, drop==VoIP demand: {drops_exact}, "
          f"VoIP GBR satisfaction={satisfaction:.3f}, video after TTI {last}={sorted(after)}")


def test_c03_sharing_benefit():
    sc = shipped("sharing_benefit")
    shared = run(sc.with_policy(parse_policy("shared-multi"))).summary.cell.throughput_bps
    static = run(sc.with_policy(parse_policy("static-multi"))).summary.cell.throughput_bps
    ratio = shared / static
    check("C3 shared/static throughput = 2.00 +-2%", abs(ratio - 2.0) <= 0.02 * 2.0,
          f"ratio={ratio:.6f} ({shared:.0f} / {static:.0f} bps)")


def test_c04_closed_form_peak_rate():
    tp = run(shipped("single_ue_peak"), duration_ttis=10_000).summary.subslices[(1, 1)].throughput_bps
    check("C4 single full-buffer UE at CQI 15", tp == 23_325_000, f"throughput={tp} bps")


def random_scenario(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.choice([6, 15, 25, 50]))
    T = int(rng.integers(1, 4))
    cuts = sorted(rng.integers(0, N + 1, size=T - 1).tolist())
    D = [b - a for a, b in zip([0] + cuts, cuts + [N])]
    tenants, ues = [], []
    uid = 0
    for t in range(T):
        subs = []
        for s in range(int(rng.integers(1, 4))):
            if rng.random() < 0.4:
                subs.append({"subslice_id": s, "service_class": "GBR",
                             "gbr_bps": int(rng.choice([16000, 32000, 64000, 500000]))})
            else:
                subs.append({"subslice_id": s, "service_class": "NonGBR",
                             "weight": int(rng.integers(1, 4))})
            for _ in range(int(rng.integers(0, 4))):
                kind = rng.choice(["voip", "cbr_video", "full_buffer"])
                if kind == "voip":
                    traffic = {"type": "voip", "on_mean_s": float(rng.uniform(0.01, 0.5)),
                               "off_mean_s": float(rng.uniform(0.01, 0.5)),
                               "pkt_bits": int(rng.choice([320, 2000, 8000])),
                               "period_ttis": int(rng.integers(1, 21))}
                elif kind == "cbr_video":
                    traffic = {"type": "cbr_video", "rate_bps": float(rng.uniform(1e5, 8e6)),
                               "frame_period_ttis": int(rng.integers(1, 40))}
                else:
                    traffic = {"type": "full_buffer",
                               "target_backlog_bits": int(rng.integers(1000, 500_000))}
                if rng.random() < 0.5:
                    channel = {"type": "fixed", "cqi": int(rng.integers(1, 16))}
                else:
                    channel = {"type": "random_walk", "start_cqi": int(rng.integers(1, 16)),
                               "step_period_ttis": int(rng.integers(1, 30))}
                ues.append({"ue_id": uid, "tenant": t, "subslice": s,
                            "traffic": traffic, "channel": channel})
                uid += 1
        tenants.append({"tenant_id": t, "dedicated_rbs": D[t], "subslice": subs})
    policy = str(rng.choice(POLICY_STRINGS))
    period = int(rng.choice([1, 1, 2, 5, 8]))
    return validate_scenario({
        "cell": {"num_rbs": N}, "sim": {"duration_ttis": 150, "seed": seed},
        "policy": {"mode": policy, "decision_period": period},
        "tenant": tenants, "ue": ues,
    })


def test_c05_property_suite():
    violations = {k: 0 for k in ("isolation", "work_conservation", "never_exceed",
                                 "double_assignment", "bit_conservation")}
    n_scenarios = 120
    for seed in range(n_scenarios):
        sc = random_scenario(seed)
        sim = Simulation(sc)
        D = {t.tenant_id: t.dedicated_rbs for t in sc.tenants}
        records = []
        for _ in range(sc.duration_ttis):
            rec = sim.step()
            records.append(rec)
            d = {t: r.demand_rbs for t, r in rec.tenants.items()}
            g = {t: r.grant_rbs for t, r in rec.tenants.items()}
            violations["isolation"] += sum(g[t] < min(d[t], D[t]) for t in g)
            violations["never_exceed"] += sum(g[t] > d[t] for t in g)
            if sc.policy.mode == "shared" and sum(d.values()) >= sc.num_rbs:
                violations["work_conservation"] += sum(g.values()) != sc.num_rbs
            slots = sim.last_map.slots
            ranges = sim.last_decision.ranges
            owned = [(i, o) for i, o in enumerate(slots) if o is not None]
            in_range = all(ranges[o.tenant_id][0] <= i < sum(ranges[o.tenant_id]) for i, o in owned)
            spans = sorted((s, s + n) for s, n in ranges.values() if n)
            disjoint = all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
            counted = sum(r.granted_rbs for r in rec.subslices.values())
            violations["double_assignment"] += not (in_range and disjoint
                                                     and counted == len(owned))
        for tid, mac in sim.coordinator.macs.items():
            for sid in mac.subslice_ids:
                delivered = sum(b.delivered_bits for k, b in mac.buffers.items() if k[0] == sid)
                served = sum(r.subslices[(tid, sid)].served_bits for r in records)
                backlog = records[-1].subslices[(tid, sid)].backlog_bits if records else 0
                violations["bit_conservation"] += delivered != served + backlog
    check("C5 property suite", not any(violations.values()),
          f"{n_scenarios} random scenarios, violations={violations}")


def test_c06_apportion_matches_brute_force():
    shared = SharingPolicy("shared", "multi")
    cases = mismatches = 0
    for N in range(1, 9):
        for T in (1, 2, 3):
            demand_rows = list(itertools.product(range(N + 2), repeat=T))
            for D in compositions(N, T):
                expected = brute_force_grants(demand_rows, D, N)
                for d, e in zip(demand_rows, expected):
                    g = apportion(dict(enumerate(d)), dict(enumerate(D)), N, shared)
                    cases += 1
                    mismatches += [g[t] for t in range(T)] != e.tolist()
    check("C6 apportion == brute force (N<=8, <=3 tenants)", mismatches == 0,
          f"{cases} exhaustive cases, {mismatches} mismatches")


def test_c07_fine_vs_coarse():
    fine_mini, coarse_mini = miniature(1), miniature(2)
    mini_ok = (fine_mini.summary.mean_utilization == 1.0
               and coarse_mini.summary.mean_utilization == pytest.approx(11 / 12))
    sc = shipped("fine_vs_coarse")
    fine = run(sc.with_policy(parse_policy("shared-multi", 1))).summary.mean_utilization
    coarse = run(sc.with_policy(parse_policy("shared-multi", 200))).summary.mean_utilization
    check("C7 per-TTI vs 200-TTI sharing", mini_ok and fine - coarse >= 0.05,
          f"miniature hand trace ok={mini_ok}; utilization period 1={fine:.4f}, "
          f"period 200={coarse:.4f}, gap={100 * (fine - coarse):.2f} pp")


def test_c08_gbr_protection():
    sc = shipped("gbr_protection")
    multi = run(sc.with_policy(parse_policy("shared-multi"))).summary.subslices[(1, 1)]
    single = run(sc.with_policy(parse_policy("shared-single"))).summary.subslices[(1, 1)]
    ok = (multi.gbr_satisfaction == 1.0 and multi.p95_delay_ms <= 20
          and single.p95_delay_ms >= 2 * multi.p95_delay_ms)
    check("C8 GBR protection", ok,
          f"multi satisfaction={multi.gbr_satisfaction}, multi p95={multi.p95_delay_ms} ms, "
          f"single p95={single.p95_delay_ms} ms")


def test_c09_cli_determinism(tmp_path, scenario_file):
    path = str(scenario_file("two_operators"))
    for d in ("a", "b"):
        assert main(["run", "--scenario", path, "--seed", "17", "--duration", "3000",
                     "--out", str(tmp_path / d)]) == 0
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("summary.csv", "timeline.csv"))
    check("C9 byte-identical outputs", same, "summary.csv and timeline.csv compared bytewise")


def test_c10_weighted_fairness():
    res = run(shipped("weighted_fairness"), duration_ttis=10_000)
    a = sum(r.subslices[(1, 1)].granted_rbs for r in res.records)
    b = sum(r.subslices[(1, 2)].granted_rbs for r in res.records)
    ratio = a / b
    check("C10 weighted fairness 2:1", abs(ratio - 2.0) <= 0.01 * 2.0,
          f"served RBs {a}:{b}, ratio={ratio:.6f}")
