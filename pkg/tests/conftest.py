import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {
    1: "Yosida suite",
    2: "compatibility suite",
    3: "space-operator suite",
    4: "oracle equivalence of one step",
    5: "mass conservation",
    6: "energy monitor",
    7: "periodicity",
    8: "eps-continuation",
    9: "weak-form residuals",
    10: "prototype mode passes 4-9",
}
PROTOTYPE_COVERS = (4, 5, 6, 7, 8, 9)

# criterion -> list of (test id, passed, detail)
_results: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.skipped:
        return
    if rep.when != "call" and rep.passed:
        return
    n = mark.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    entry = (item.name, rep.passed, detail or (rep.longreprtext.splitlines()[-1] if rep.failed else ""))
    _results.setdefault(n, []).append(entry)
    if mark.kwargs.get("prototype"):
        _results.setdefault(10, []).append(entry)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        entries = _results.get(n)
        if not entries:
            continue
        ok = all(passed for _, passed, _ in entries)
        bad = [f"{name}: {detail}" for name, passed, detail in entries if not passed]
        info = " | ".join(bad) if bad else " | ".join(d for _, _, d in entries if d)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {title} ({len(entries)} checks) {info}")
