"""Command line front end: ``run``, ``compare`` and ``validate``.

Scenario files are TOML::

    [cell]
    num_rbs = 25

    [sim]
    duration_ttis = 10000
    seed = 1

    [policy]
    mode = "shared"          # or a full policy string such as "shared-multi"
    slicing = "multi"
    decision_period = 1

    [[tenant]]
    tenant_id = 1
    dedicated_rbs = 25
      [[tenant.subslice]]
      subslice_id = 1
      service_class = "GBR"
      gbr_bps = 16000

    [[ue]]
    ue_id = 1
    tenant = 1
    subslice = 1
    traffic = { type = "voip", on_mean_s = 1.0, off_mean_s = 1.0 }
    channel = { type = "fixed", cqi = 7 }
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .controller import POLICY_STRINGS, parse_policy
from .engine import RunResult, run
from .model import Scenario, ScenarioError, validate_scenario

SEED_ENV = "RANSLICE_SEED"

SUMMARY_COLUMNS = ("tenant", "subslice", "throughput_bps", "mean_delay_ms", "p95_delay_ms",
                   "gbr_satisfaction", "mean_grant_rbs", "utilization")
TIMELINE_COLUMNS = ("tti", "tenant", "subslice", "demand_rbs", "granted_rbs", "served_bits",
                    "backlog_bits", "utilization")


def parse_scenario(path) -> dict:
    """Read and check a scenario file, returning its plain-data form."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError([f"{path}: cannot read: {exc.strerror or exc}"]) from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"{path}: syntax error: {exc}"]) from None
    validate_scenario(raw)
    return raw


def load_scenario(path) -> Scenario:
    return validate_scenario(parse_scenario(path))


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def summary_rows(result: RunResult) -> List[list]:
    s = result.summary
    rows = []
    for (tid, sid), sub in s.subslices.items():
        rows.append([tid, sid, sub.throughput_bps, sub.mean_delay_ms, sub.p95_delay_ms,
                     sub.gbr_satisfaction, sub.mean_grant_rbs, None])
    if s.cell is not None:
        c = s.cell
        rows.append(["cell", "-", c.throughput_bps, c.mean_delay_ms, c.p95_delay_ms,
                     None, c.mean_grant_rbs, s.mean_utilization])
    return [[fmt(v) for v in row] for row in rows]


def timeline_rows(result: RunResult):
    for rec in result.records:
        for (tid, sid), row in rec.subslices.items():
            yield [rec.tti, tid, sid, row.demand_rbs, row.granted_rbs, row.served_bits,
                   row.backlog_bits, ""]
        yield [rec.tti, "cell", "-",
               sum(t.reported_demand_rbs for t in rec.tenants.values()),
               rec.assigned_rbs,
               sum(r.served_bits for r in rec.subslices.values()),
               sum(r.backlog_bits for r in rec.subslices.values()),
               fmt(rec.utilization)]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_bundle(result: RunResult, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(result))
    _write_csv(out / "timeline.csv", TIMELINE_COLUMNS, timeline_rows(result))
    s = result.summary
    meta = {
        "version": __version__,
        "seed": result.seed,
        "policy": result.scenario.policy.name,
        "decision_period": result.scenario.policy.decision_period_ttis,
        "duration_ttis": s.total_ttis,
        "scenario": result.scenario.to_raw(),
        "tenant_mean_grant_rbs": {str(t): v for t, v in s.tenant_mean_grant.items()},
        "mean_utilization": s.mean_utilization,
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")


def resolve_seed(cli_seed: Optional[int], scenario: Scenario) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ScenarioError([f"{SEED_ENV}: expected an integer, got {env!r}"]) from None
    return scenario.seed


def _cmd_validate(args) -> int:
    load_scenario(args.scenario)
    print(f"{args.scenario}: ok")
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run(scenario, resolve_seed(args.seed, scenario), args.duration)
    write_bundle(result, Path(args.out))
    return 0


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in names if p not in POLICY_STRINGS]
    if bad or not names:
        raise ScenarioError([f"--policies: unknown policy {p!r}; valid policies: "
                             f"{', '.join(POLICY_STRINGS)}" for p in bad] or
                            ["--policies: at least one policy is required"])
    seed = resolve_seed(args.seed, scenario)
    out = Path(args.out)
    table = []
    for name in names:
        policy = parse_policy(name, scenario.policy.decision_period_ttis)
        result = run(scenario.with_policy(policy), seed, args.duration)
        write_bundle(result, out / name)
        table.extend([name, seed] + row for row in summary_rows(result))
    _write_csv(out / "compare.csv", ("policy", "seed") + SUMMARY_COLUMNS, table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ranslice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--duration", type=int, help="override sim.duration_ttis")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run one scenario under several policies")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policies", required=True, help=",".join(POLICY_STRINGS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=int, help="override sim.duration_ttis")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure of a valid scenario
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
