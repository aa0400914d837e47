import os
import time
from dataclasses import dataclass, field

import numpy as np
import pytest
from hypothesis import settings

from dirval import dirsens
from dirval.report import bundled_names, load_problem

settings.register_profile("repro", derandomize=True, deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))

ACCEPTANCE_KEY = pytest.StashKey[dict]()


@dataclass
class BatteryEntry:
    name: str
    direction: np.ndarray
    reference: float
    result: dict
    seconds: float

    @property
    def verdict(self) -> dict:
        return self.result["differentiability_verdict"]

    @property
    def label(self) -> str:
        return f"{self.name}[{','.join(f'{v:g}' for v in self.direction)}]"


@dataclass
class Battery:
    entries: list[BatteryEntry]
    problems: dict
    oracles: dict
    seconds: float
    notes: dict = field(default_factory=dict)


@pytest.fixture(scope="session")
def battery() -> Battery:
    """analyze() on every bundled problem in each direction that has a reference derivative."""
    start = time.perf_counter()
    entries, problems, oracles = [], {}, {}
    for fname in bundled_names():
        prob = load_problem(fname)
        oracle = dirsens.ValueOracle(prob.program)
        problems[prob.name], oracles[prob.name] = prob, oracle
        for ref in prob.references.get("derivatives", []):
            u = np.asarray(ref["direction"], dtype=float)
            t0 = time.perf_counter()
            res = dirsens.analyze(prob.program, prob.xbar, u, 42, oracle)
            entries.append(BatteryEntry(prob.name, u, float(ref["value"]), res, time.perf_counter() - t0))
    return Battery(entries, problems, oracles, time.perf_counter() - start)


@dataclass
class RSCheck:
    label: str
    y: np.ndarray
    sufficient: object
    probe: object
    linearized: bool


@pytest.fixture(scope="session")
def rs_checks(battery) -> list[RSCheck]:
    """Numeric RS probe at the first few directional solutions wherever a sufficient condition holds."""
    out = []
    for e in battery.entries:
        prob = battery.problems[e.name]
        for y in e.result["directional_solution_set"]["points"][:3]:
            y = np.asarray(y)
            rs = dirsens.rs_sufficient(prob.program, prob.xbar, y, e.direction, 42, battery.oracles[e.name])
            if not rs.holds:
                continue
            probe = dirsens.rs_numeric_probe(prob.program, prob.xbar, y, e.direction)
            out.append(RSCheck(e.label, y, rs, probe, dirsens.linearized_feasible(prob.program, prob.xbar, y, e.direction)))
    return out


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig) -> dict:
    return pytestconfig.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(log):
        terminalreporter.write_line(log[key])
