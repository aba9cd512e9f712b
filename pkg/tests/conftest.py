from __future__ import annotations

import pytest

from cssim.signals import SampleSpan
from cssim.simulate import Utterance

# One summary line per acceptance criterion, printed after the test table.
_acceptance: dict[str, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in item.nodeid:
        _acceptance[item.name] = report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_acceptance):
        verdict = "PASS" if _acceptance[name] else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict}")


def make_utterance(speaker: str, start: int, end: int, words) -> Utterance:
    return Utterance(speaker, SampleSpan(start, end), tuple(words))


@pytest.fixture
def utt():
    return make_utterance
