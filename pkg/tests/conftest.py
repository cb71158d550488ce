import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/oracles.py

from geofair.data import Dataset, VillageRecord

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[name]
        mark = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{mark}  {name}")


def make_village(i, state="S0", **overrides):
    fields = dict(
        village_id=f"V{i:06d}",
        state_id=state,
        lat=20.0,
        lon=80.0,
        ntl=3.0,
        population=800,
        poverty_rate=0.35,
        electricity=1,
        share_sc=0.15,
        share_st=0.0,
    )
    fields.update(overrides)
    return VillageRecord(**fields)


@pytest.fixture
def village_factory():
    return make_village


@pytest.fixture
def random_dataset():
    """Builder for random feature-complete datasets."""

    def build(n, seed=0, n_states=4, missing_elec=0.0):
        rng = np.random.default_rng(seed)
        records = []
        for i in range(n):
            elec = int(rng.integers(0, 2))
            records.append(make_village(
                i,
                state=f"S{int(rng.integers(0, n_states))}",
                lat=float(rng.uniform(8, 32)),
                lon=float(rng.uniform(70, 90)),
                ntl=float(rng.uniform(0, 50)),
                population=int(rng.integers(10, 30000)),
                poverty_rate=float(rng.uniform(0, 1)),
                electricity=None if rng.uniform() < missing_elec else elec,
                share_sc=float(rng.uniform(0, 0.9)),
                share_st=float(rng.uniform(0, 0.9)) if rng.uniform() > 0.5 else 0.0,
            ))
        return Dataset(records, provenance=f"random seed={seed}")

    return build
