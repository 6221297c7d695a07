"""Central controller: turns per-tenant demand into per-tenant RB grants.

Grants are recomputed every TTI.  With ``decision_period_ttis > 1`` the
demand fed into the grant rule is a held window average, which models a
controller that only observes tenants over long periods.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Mapping

STATIC = "static"
SHARED = "shared"
SINGLE = "single"
MULTI = "multi"

POLICY_STRINGS = ("static-single", "static-multi", "shared-single", "shared-multi")


class ConfigurationError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class SharingPolicy:
    mode: str = SHARED
    slicing: str = MULTI
    decision_period_ttis: int = 1

    def __post_init__(self):
        if self.mode not in (STATIC, SHARED):
            raise ValueError(f"mode must be 'static' or 'shared', got {self.mode!r}")
        if self.slicing not in (SINGLE, MULTI):
            raise ValueError(f"slicing must be 'single' or 'multi', got {self.slicing!r}")
        if self.decision_period_ttis < 1:
            raise ValueError("decision_period_ttis must be >= 1")

    @property
    def name(self) -> str:
        return f"{self.mode}-{self.slicing}"

    def __str__(self):
        return self.name


def parse_policy(name: str, decision_period_ttis: int = 1) -> SharingPolicy:
    if name not in POLICY_STRINGS:
        raise ValueError(f"unknown policy {name!r}; valid policies: {', '.join(POLICY_STRINGS)}")
    mode, slicing = name.split("-")
    return SharingPolicy(mode, slicing, decision_period_ttis)


@dataclass(frozen=True)
class SharingDecision:
    tti: int
    grants: Dict[int, int]
    ranges: Dict[int, tuple]  # tenant_id -> (start, length)

    @property
    def granted(self) -> int:
        return sum(self.grants.values())


class DemandWindow:
    """Per-tenant ring of the most recent total demands, plus the held decision."""

    def __init__(self, tenant_ids, period: int):
        self.period = period
        self.rings = {t: deque(maxlen=period) for t in tenant_ids}
        self.held = {t: 0 for t in tenant_ids}


def effective_demands(window: DemandWindow, reports: Mapping[int, int], tti: int) -> Dict[int, int]:
    """Record this TTI's demands and return the demand the controller acts on.

    ``reports`` maps tenant id to that tenant's total demand in RBs.
    """
    if set(reports) != set(window.rings):
        raise ValueError("need exactly one demand report per tenant")
    for tid, total in reports.items():
        window.rings[tid].append(total)
    if window.period == 1:
        window.held = dict(reports)
    elif tti % window.period == 0:
        window.held = {tid: -(-sum(r) // len(r)) for tid, r in window.rings.items()}
    return dict(window.held)


def _largest_remainder(surplus: int, claims: Mapping[int, int]) -> Dict[int, int]:
    """Split ``surplus`` RBs in proportion to ``claims``, each share capped at its claim.

    Quotas are floored, leftovers go by descending remainder with ties to the
    lower tenant id, and any share that hits its cap hands the overflow back
    to the still-uncapped tenants under the same rule.
    """
    extra = {t: 0 for t in claims}
    open_ = {t: c for t, c in claims.items() if c > 0}
    while surplus > 0 and open_:
        total = sum(open_.values())
        quotas = {t: Fraction(surplus * c, total) for t, c in open_.items()}
        share = {t: int(q) for t, q in quotas.items()}
        left = surplus - sum(share.values())
        for t in sorted(open_, key=lambda t: (-(quotas[t] - share[t]), t))[:left]:
            share[t] += 1
        overflow = 0
        capped = []
        for t, s in share.items():
            if s >= open_[t]:
                overflow += s - open_[t]
                s = open_[t]
                capped.append(t)
            extra[t] += s
        for t in capped:
            del open_[t]
        if not capped:
            break
        for t in open_:
            open_[t] -= share[t]
        surplus = overflow
    return extra


def apportion(d: Mapping[int, int], D: Mapping[int, int], N: int, policy) -> Dict[int, int]:
    """Per-tenant RB grants for demands ``d`` and dedicated shares ``D``."""
    mode = policy.mode if isinstance(policy, SharingPolicy) else policy
    if sum(D.values()) != N:
        raise ConfigurationError(f"dedicated shares sum {sum(D.values())} != {N}")
    if set(d) != set(D):
        raise ConfigurationError("demand and dedicated share tenants differ")
    base = {t: min(d[t], D[t]) for t in sorted(D)}
    if mode == STATIC:
        return base
    surplus = N - sum(base.values())
    residual = {t: d[t] - base[t] for t in base}
    extra = _largest_remainder(surplus, residual)
    return {t: base[t] + extra[t] for t in base}


def assign_ranges(grants: Mapping[int, int], N: int, tti: int = 0) -> SharingDecision:
    """Pack grants into contiguous ranges from RB 0 in ascending tenant id order."""
    if sum(grants.values()) > N:
        raise InvariantViolation(f"grants {dict(grants)} exceed {N} RBs")
    ranges = {}
    start = 0
    for t in sorted(grants):
        ranges[t] = (start, grants[t])
        start += grants[t]
    return SharingDecision(tti, dict(grants), ranges)


class Controller:
    def __init__(self, dedicated: Mapping[int, int], num_rbs: int, policy: SharingPolicy):
        self.dedicated = dict(dedicated)
        self.num_rbs = num_rbs
        self.policy = policy
        self.window = DemandWindow(sorted(self.dedicated), policy.decision_period_ttis)

    def decide(self, tti: int, totals: Mapping[int, int]):
        demands = effective_demands(self.window, totals, tti)
        grants = apportion(demands, self.dedicated, self.num_rbs, self.policy)
        return demands, assign_ranges(grants, self.num_rbs, tti)
