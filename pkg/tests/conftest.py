import numpy as np
import pytest

from pshlab.metric import NormalFormLabel

ALL_LABELS = [
    NormalFormLabel.Q1(1.0),
    NormalFormLabel.Q1(-1.0),
    NormalFormLabel.Q1(-16.0),
    NormalFormLabel.Q2(1.0),
    NormalFormLabel.Q2(-1.0),
    NormalFormLabel.Q2(0.25),
    NormalFormLabel("Q3"),
    NormalFormLabel("Q4"),
    NormalFormLabel("Q5"),
    NormalFormLabel("Q6"),
]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def label_id(label):
    return str(label)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, (ok, detail) in sorted(test_acceptance.RESULTS.items()):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
