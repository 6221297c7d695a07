from importlib import resources

import pytest

from ranslice.cli import load_scenario


def shipped(name):
    return load_scenario(resources.files("ranslice") / "scenarios" / f"{name}.toml")


@pytest.fixture
def scenario_file():
    return lambda name: resources.files("ranslice") / "scenarios" / f"{name}.toml"


def make_raw(num_rbs=25, tenants=None, ues=(), policy="shared-multi", period=1,
             duration=100, seed=1):
    """Small raw scenario builder; ``tenants`` is [(tid, D, [subslice dicts])]."""
    if tenants is None:
        tenants = [(1, num_rbs, [{"subslice_id": 1, "service_class": "NonGBR", "weight": 1}])]
    return {
        "cell": {"num_rbs": num_rbs},
        "sim": {"duration_ttis": duration, "seed": seed},
        "policy": {"mode": policy, "decision_period": period},
        "tenant": [{"tenant_id": t, "dedicated_rbs": d, "subslice": list(s)}
                   for t, d, s in tenants],
        "ue": [dict(u) for u in ues],
    }


def full_buffer_ue(ue_id, tenant=1, subslice=1, cqi=7, target=1_000_000):
    return {"ue_id": ue_id, "tenant": tenant, "subslice": subslice,
            "traffic": {"type": "full_buffer", "target_backlog_bits": target},
            "channel": {"type": "fixed", "cqi": cqi}}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
