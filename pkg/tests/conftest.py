import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria: one summary line per criterion, in order

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    store = item.config._criteria
    entry = store.setdefault(number, {"title": title, "status": "PASS", "details": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.failed:
            entry["status"] = "FAIL"
        elif report.skipped and entry["status"] != "FAIL":
            entry["status"] = "SKIP"
        if report.when == "call":
            entry["details"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_criteria", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        e = store[number]
        line = f"criterion {number}: {e['status']:4s}  {e['title']}"
        if e["details"]:
            line += "  [" + "; ".join(e["details"]) + "]"
        terminalreporter.write_line(line)
