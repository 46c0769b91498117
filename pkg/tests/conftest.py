from decimal import Decimal

import pytest

from repgraph import EngineParams, NodeId

FUZZ_CURRENCIES = {"BASE": Decimal(1), "CENT": Decimal("0.01")}


def acct(name: str) -> NodeId:
    return NodeId.account(name)


@pytest.fixture
def params():
    return EngineParams(currency_table=dict(FUZZ_CURRENCIES, XYZ=Decimal(1)))


_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
