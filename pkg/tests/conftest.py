import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from string_polaron import ModelParams, with_damping_ratio

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def at_ratio(ratio, **kw):
    """Default parameters with eta / (m Omega) set to ``ratio``."""
    return with_damping_ratio(ModelParams(**kw), ratio)


# -- acceptance summary ---------------------------------------------------------
# Tests marked ``criterion(id, title, literal=True)`` decide the verdict of a
# criterion; ``literal=False`` marks companion checks reported alongside.

_OUTCOMES = {}
DETAILS = {}


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def put(text):
        DETAILS[request.node.nodeid] = text
        print(text)
    return put


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    cid, title = mark.args[:2]
    literal = mark.kwargs.get("literal", True)
    entry = _OUTCOMES.setdefault(cid, {"title": title, "parts": {}})
    entry["parts"][item.nodeid] = (literal, rep.passed and rep.when == "call", item.name)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_OUTCOMES, key=lambda c: int(c[1:])):
        entry = _OUTCOMES[cid]
        parts = entry["parts"].values()
        verdict = all(ok for literal, ok, _ in parts if literal)
        tr.write_line(f"{cid} {'PASS' if verdict else 'FAIL'}  {entry['title']}")
        for nodeid, (literal, ok, name) in entry["parts"].items():
            tag = "" if literal else " (companion)"
            extra = DETAILS.get(nodeid, "")
            tr.write_line(f"     {'ok  ' if ok else 'FAIL'} {name}{tag}: {extra}")
