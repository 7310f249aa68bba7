"""Shared fixtures: closed-loop runs are expensive, so each (scenario, mode)
pair is simulated at most once per session and its wall time remembered."""

import time

import pytest

from adaptive_tracking.config import default_config
from adaptive_tracking.harness import SCENARIO_NAMES, run_mode, scenario_by_name
from adaptive_tracking.planner import MODES


class SuiteCache:
    def __init__(self):
        self.cfg = default_config()
        self.records = {}
        self.seconds = {}

    def get(self, scenario, mode):
        key = (scenario, mode)
        if key not in self.records:
            cfg = self.cfg
            sc = scenario_by_name(scenario, cfg.seed, cfg.harness)
            t0 = time.perf_counter()
            self.records[key] = run_mode(sc, mode, cfg.plant, cfg.planner, cfg.estimator,
                                         cfg.harness.divergence_bound)
            self.seconds[key] = time.perf_counter() - t0
        return self.records[key]

    def scenario(self, scenario, modes=MODES):
        return {m: self.get(scenario, m) for m in modes}

    def elapsed(self, scenario, modes=MODES):
        return sum(self.seconds[(scenario, m)] for m in modes)

    def all(self):
        return {s: self.scenario(s) for s in SCENARIO_NAMES}


@pytest.fixture(scope="session")
def suite():
    return SuiteCache()


# one line per acceptance criterion, printed after the run
_CRITERIA = {}


@pytest.fixture
def criterion():
    def report(number, title, passed, detail=""):
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}: {title} | {detail}")
