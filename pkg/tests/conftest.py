import itertools

import numpy as np
import pytest

from confperf.space import BinaryOption, Constraint, ConfigurationSpace, NumericOption


def make_space(binary=(), numeric=(), constraints=()):
    return ConfigurationSpace(tuple(BinaryOption(n) for n in binary),
                              tuple(NumericOption(n, tuple(float(v) for v in dom)) for n, dom in numeric),
                              tuple(Constraint.parse(c) for c in constraints))


def brute_force_valid(space):
    """Every valid configuration by direct evaluation of each constraint on each assignment."""
    names = space.option_names
    out = []
    for values in itertools.product(*space.domains()):
        env = dict(zip(names, values))
        if all(bool(c.holds(env)) for c in space.constraints):
            out.append(values)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting: one PASS/FAIL line per criterion -------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion with a one-line verdict")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = getattr(item, "acceptance_detail", "")
        if rep.failed:
            msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else "failed"
            detail = msg.splitlines()[0] if msg else detail
        _ACCEPTANCE[mark.args[0]] = ("PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
        verdict, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{verdict} {label}" + (f": {detail}" if detail else ""))
