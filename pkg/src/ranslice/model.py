"""Scenario object model: tenants, sub-slices, UEs, and the routing registry."""

from __future__ import annotations

import enum
from dataclasses import MISSING, dataclass, fields
from typing import Mapping, Optional

from .controller import POLICY_STRINGS, SharingPolicy, parse_policy
from .grid import VALID_NUM_RBS
from .stack import RoutingError
from .traffic import CHANNEL_TYPES, TRAFFIC_TYPES, CqiProcess, TrafficModel

DEFAULT_DURATION_TTIS = 10_000
DEFAULT_SEED = 0


class ScenarioError(ValueError):
    """Invalid scenario; ``violations`` lists every problem with its config path."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


class ServiceClass(enum.Enum):
    GBR = "GBR"
    NON_GBR = "NonGBR"


@dataclass(frozen=True)
class SubSliceConfig:
    subslice_id: int
    service_class: ServiceClass
    gbr_bps: Optional[float] = None
    weight: Optional[int] = None
    name: str = ""

    @property
    def is_gbr(self) -> bool:
        return self.service_class is ServiceClass.GBR


@dataclass(frozen=True)
class TenantConfig:
    tenant_id: int
    dedicated_rbs: int
    subslices: tuple
    name: str = ""

    def subslice(self, subslice_id: int) -> SubSliceConfig:
        for s in self.subslices:
            if s.subslice_id == subslice_id:
                return s
        raise KeyError(f"tenant {self.tenant_id} has no subslice {subslice_id}")


@dataclass(frozen=True)
class Ue:
    ue_id: int
    tenant_id: int
    subslice_id: int
    traffic: TrafficModel
    channel: CqiProcess


class Registry(Mapping):
    """Exact lookup from destination UE to its (tenant, sub-slice)."""

    def __init__(self, tenants, ues):
        self._map = {u.ue_id: (u.tenant_id, u.subslice_id) for u in ues}
        self.subslices = {t.tenant_id: tuple(s.subslice_id for s in t.subslices) for t in tenants}

    def classify(self, ue_id: int):
        try:
            return self._map[ue_id]
        except KeyError:
            raise RoutingError(f"no tenant MAC serves ue {ue_id}") from None

    def __getitem__(self, ue_id):
        return self._map[ue_id]

    def __iter__(self):
        return iter(sorted(self._map))

    def __len__(self):
        return len(self._map)


def classify(reg: Registry, ue_id: int):
    return reg.classify(ue_id)


@dataclass(frozen=True)
class Scenario:
    num_rbs: int
    tenants: tuple
    ues: tuple
    policy: SharingPolicy
    duration_ttis: int = DEFAULT_DURATION_TTIS
    seed: int = DEFAULT_SEED

    @property
    def registry(self) -> Registry:
        return Registry(self.tenants, self.ues)

    def tenant(self, tenant_id: int) -> TenantConfig:
        for t in self.tenants:
            if t.tenant_id == tenant_id:
                return t
        raise KeyError(f"unknown tenant {tenant_id}")

    def with_policy(self, policy: SharingPolicy) -> "Scenario":
        return Scenario(self.num_rbs, self.tenants, self.ues, policy,
                        self.duration_ttis, self.seed)

    def to_raw(self) -> dict:
        """Plain-data form accepted back by :func:`validate_scenario`."""
        raw = {
            "cell": {"num_rbs": self.num_rbs},
            "sim": {"duration_ttis": self.duration_ttis, "seed": self.seed},
            "policy": {
                "mode": self.policy.mode,
                "slicing": self.policy.slicing,
                "decision_period": self.policy.decision_period_ttis,
            },
            "tenant": [],
            "ue": [],
        }
        for t in self.tenants:
            subs = []
            for s in t.subslices:
                d = {"subslice_id": s.subslice_id, "service_class": s.service_class.value}
                if s.name:
                    d["name"] = s.name
                if s.is_gbr:
                    d["gbr_bps"] = s.gbr_bps
                else:
                    d["weight"] = s.weight
                subs.append(d)
            td = {"tenant_id": t.tenant_id, "dedicated_rbs": t.dedicated_rbs, "subslice": subs}
            if t.name:
                td["name"] = t.name
            raw["tenant"].append(td)
        for u in self.ues:
            raw["ue"].append({
                "ue_id": u.ue_id,
                "tenant": u.tenant_id,
                "subslice": u.subslice_id,
                "traffic": _model_to_raw(u.traffic, TRAFFIC_TYPES),
                "channel": _model_to_raw(u.channel, CHANNEL_TYPES),
            })
        return raw


def _model_to_raw(obj, registry) -> dict:
    name = next(k for k, cls in registry.items() if isinstance(obj, cls))
    d = {"type": name}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if v is not None:
            d[f.name] = v
    return d


# -- validation ---------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float))) and not isinstance(v, bool)


class _Checker:
    def __init__(self):
        self.errors = []

    def err(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def table(self, raw, key, path, required=True):
        v = raw.get(key) if isinstance(raw, Mapping) else None
        if v is None:
            if required:
                self.err(path, "required")
            return None
        if not isinstance(v, Mapping):
            self.err(path, f"expected a table, got {type(v).__name__}")
            return None
        return v

    def array(self, raw, key, path):
        v = raw.get(key)
        if v is None:
            return []
        if not isinstance(v, list) or not all(isinstance(x, Mapping) for x in v):
            self.err(path, "expected an array of tables")
            return []
        return v

    def int_(self, raw, key, path, required=True, default=None, minimum=None):
        if key not in raw:
            if required:
                self.err(path, "required")
            return default
        v = raw[key]
        if not _is_int(v):
            self.err(path, f"expected an integer, got {v!r}")
            return default
        if minimum is not None and v < minimum:
            self.err(path, f"must be >= {minimum}, got {v}")
            return default
        return v

    def num(self, raw, key, path, required=True, default=None, positive=False):
        if key not in raw:
            if required:
                self.err(path, "required")
            return default
        v = raw[key]
        if not _is_num(v):
            self.err(path, f"expected a number, got {v!r}")
            return default
        if positive and not v > 0:
            self.err(path, f"must be > 0, got {v}")
            return default
        return v

    def str_(self, raw, key, path, required=True, default=None):
        if key not in raw:
            if required:
                self.err(path, "required")
            return default
        v = raw[key]
        if not isinstance(v, str):
            self.err(path, f"expected a string, got {v!r}")
            return default
        return v


def _policy(c: _Checker, raw) -> Optional[SharingPolicy]:
    pol = c.table(raw, "policy", "policy")
    if pol is None:
        return None
    mode = c.str_(pol, "mode", "policy.mode")
    slicing = c.str_(pol, "slicing", "policy.slicing", required=False)
    period = c.int_(pol, "decision_period", "policy.decision_period", required=False,
                    default=1, minimum=1)
    if mode is None or period is None:
        return None
    name = mode if slicing is None else f"{mode}-{slicing}"
    try:
        return parse_policy(name, period)
    except ValueError:
        where = "policy.mode" if slicing is None else "policy.mode/policy.slicing"
        c.err(where, f"unknown policy {name!r}; valid policies: {', '.join(POLICY_STRINGS)}")
        return None


def _subslice(c: _Checker, raw, path) -> Optional[SubSliceConfig]:
    sid = c.int_(raw, "subslice_id", f"{path}.subslice_id", minimum=0)
    cls = c.str_(raw, "service_class", f"{path}.service_class")
    name = c.str_(raw, "name", f"{path}.name", required=False, default="")
    if cls is None:
        return None
    try:
        service = ServiceClass(cls)
    except ValueError:
        c.err(f"{path}.service_class", f"must be 'GBR' or 'NonGBR', got {cls!r}")
        return None
    gbr = weight = None
    if service is ServiceClass.GBR:
        if "gbr_bps" not in raw:
            c.err(f"{path}.gbr_bps", "required for a GBR sub-slice")
        else:
            gbr = c.num(raw, "gbr_bps", f"{path}.gbr_bps", positive=True)
        if gbr is None:
            return None
    else:
        weight = c.int_(raw, "weight", f"{path}.weight", required=False, default=1, minimum=1)
        if weight is None:
            return None
    if sid is None:
        return None
    return SubSliceConfig(sid, service, gbr, weight, name or "")


_TRAFFIC_FIELDS = {
    "voip": {"on_mean_s": "pos", "off_mean_s": "pos", "pkt_bits": "int+", "period_ttis": "int+"},
    "cbr_video": {"rate_bps": "pos", "frame_period_ttis": "int+"},
    "full_buffer": {"target_backlog_bits": "int+"},
}
_CHANNEL_FIELDS = {
    "fixed": {"cqi": "cqi"},
    "random_walk": {"start_cqi": "cqi", "step_period_ttis": "int+", "min": "cqi", "max": "cqi"},
}
_COMMON_TRAFFIC = {"start_tti": "int0", "stop_tti": "int0"}


def _model(c: _Checker, raw, path, kinds, rules, common=None):
    if raw is None:
        return None
    kind = c.str_(raw, "type", f"{path}.type")
    if kind is None:
        return None
    if kind not in kinds:
        c.err(f"{path}.type", f"unknown type {kind!r}; expected one of {', '.join(kinds)}")
        return None
    allowed = dict(rules[kind], **(common or {}))
    cls = kinds[kind]
    required = {f.name for f in fields(cls) if f.default is MISSING}
    kwargs = {}
    ok = True
    for key in raw:
        if key != "type" and key not in allowed:
            c.err(f"{path}.{key}", "unknown key")
            ok = False
    for key, rule in allowed.items():
        p = f"{path}.{key}"
        need = key in required
        if rule == "pos":
            v = c.num(raw, key, p, required=need, positive=True)
        elif rule == "int+":
            v = c.int_(raw, key, p, required=need, minimum=1)
        elif rule == "int0":
            v = c.int_(raw, key, p, required=need, minimum=0)
        else:
            v = c.int_(raw, key, p, required=need)
            if v is not None and not 1 <= v <= 15:
                c.err(p, f"CQI must be in 1..15, got {v}")
                v = None
        if v is None:
            if need or key in raw:
                ok = False
            continue
        kwargs[key] = v
    if not ok:
        return None
    obj = cls(**kwargs)
    if kind == "random_walk":
        if obj.min > obj.max:
            c.err(path, f"min {obj.min} exceeds max {obj.max}")
            return None
        if not obj.min <= obj.start_cqi <= obj.max:
            c.err(f"{path}.start_cqi", f"outside [{obj.min}, {obj.max}]")
            return None
    if common and obj.stop_tti is not None and obj.stop_tti < obj.start_tti:
        c.err(f"{path}.stop_tti", "must not precede start_tti")
        return None
    return obj


def validate_scenario(cfg) -> Scenario:
    """Build a :class:`Scenario` from raw config, or raise listing every violation.

    Accepts an already validated ``Scenario`` too; it is re-checked through
    its plain-data form.
    """
    if isinstance(cfg, Scenario):
        cfg = cfg.to_raw()
    c = _Checker()
    if not isinstance(cfg, Mapping):
        raise ScenarioError(["<root>: expected a table"])

    cell = c.table(cfg, "cell", "cell")
    num_rbs = None
    if cell is not None:
        num_rbs = c.int_(cell, "num_rbs", "cell.num_rbs")
        if num_rbs is not None and num_rbs not in VALID_NUM_RBS:
            c.err("cell.num_rbs", f"must be one of {list(VALID_NUM_RBS)}, got {num_rbs}")
            num_rbs = None

    sim = c.table(cfg, "sim", "sim", required=False) or {}
    duration = c.int_(sim, "duration_ttis", "sim.duration_ttis", required=False,
                      default=DEFAULT_DURATION_TTIS, minimum=0)
    seed = c.int_(sim, "seed", "sim.seed", required=False, default=DEFAULT_SEED, minimum=0)
    policy = _policy(c, cfg)

    tenants = []
    seen_tenants = {}
    raw_tenants = c.array(cfg, "tenant", "tenant")
    if not raw_tenants and "tenant" not in cfg:
        c.err("tenant", "at least one tenant is required")
    for i, rt in enumerate(raw_tenants):
        path = f"tenant[{i}]"
        tid = c.int_(rt, "tenant_id", f"{path}.tenant_id", minimum=0)
        dedicated = c.int_(rt, "dedicated_rbs", f"{path}.dedicated_rbs", minimum=0)
        name = c.str_(rt, "name", f"{path}.name", required=False, default="")
        if tid is not None:
            if tid in seen_tenants:
                c.err(f"{path}.tenant_id",
                      f"duplicate tenant_id {tid} (also defined at {seen_tenants[tid]})")
                tid = None
            else:
                seen_tenants[tid] = path
        subs = []
        seen_subs = {}
        for j, rs in enumerate(c.array(rt, "subslice", f"{path}.subslice")):
            spath = f"{path}.subslice[{j}]"
            s = _subslice(c, rs, spath)
            if s is None:
                continue
            if s.subslice_id in seen_subs:
                c.err(f"{spath}.subslice_id", f"duplicate subslice_id {s.subslice_id} "
                      f"(also defined at {seen_subs[s.subslice_id]})")
                continue
            seen_subs[s.subslice_id] = spath
            subs.append(s)
        if tid is not None and dedicated is not None:
            tenants.append(TenantConfig(tid, dedicated, tuple(sorted(subs, key=lambda s: s.subslice_id)),
                                        name or ""))
    if num_rbs is not None and len(tenants) == len(raw_tenants) and tenants:
        total = sum(t.dedicated_rbs for t in tenants)
        if total != num_rbs:
            c.err("tenant", f"dedicated shares sum {total} != num_rbs {num_rbs}")

    known = {t.tenant_id: {s.subslice_id for s in t.subslices} for t in tenants}
    ues = []
    seen_ues = {}
    for i, ru in enumerate(c.array(cfg, "ue", "ue")):
        path = f"ue[{i}]"
        uid = c.int_(ru, "ue_id", f"{path}.ue_id", minimum=0)
        tid = c.int_(ru, "tenant", f"{path}.tenant")
        sid = c.int_(ru, "subslice", f"{path}.subslice")
        traffic = _model(c, c.table(ru, "traffic", f"{path}.traffic"), f"{path}.traffic",
                         TRAFFIC_TYPES, _TRAFFIC_FIELDS, _COMMON_TRAFFIC)
        channel = _model(c, c.table(ru, "channel", f"{path}.channel"), f"{path}.channel",
                         CHANNEL_TYPES, _CHANNEL_FIELDS)
        if uid is not None:
            if uid in seen_ues:
                c.err(f"{path}.ue_id", f"duplicate ue_id {uid} (also defined at {seen_ues[uid]})")
                uid = None
            else:
                seen_ues[uid] = path
        if tid is not None and sid is not None and tid in seen_tenants:
            if tid in known and sid not in known[tid]:
                c.err(f"{path}.subslice", f"tenant {tid} has no subslice {sid}")
                sid = None
        elif tid is not None and tid not in seen_tenants:
            c.err(f"{path}.tenant", f"unknown tenant {tid}")
            tid = None
        if None not in (uid, tid, sid, traffic, channel):
            ues.append(Ue(uid, tid, sid, traffic, channel))

    if c.errors:
        raise ScenarioError(c.errors)
    return Scenario(
        num_rbs=num_rbs,
        tenants=tuple(sorted(tenants, key=lambda t: t.tenant_id)),
        ues=tuple(sorted(ues, key=lambda u: u.ue_id)),
        policy=policy,
        duration_ttis=duration,
        seed=seed,
    )
