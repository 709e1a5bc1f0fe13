import numpy as np
import pytest

from mecsim.workload import PopularityProfile, Request, RequestTrace, VideoCatalog

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def catalog():
    return VideoCatalog()


@pytest.fixture
def tiny_catalog():
    return VideoCatalog(n_videos=3)


@pytest.fixture
def tiny_profile():
    # BS0 prefers video 0, BS1 prefers video 2; both rank video 1 second
    return PopularityProfile(alpha=0.8, per_bs_rank=np.array([[0, 1, 2], [2, 1, 0]]))


HAND_TRACE = [
    (0, 0, 0, 0), (10, 0, 0, 3), (20, 0, 0, 2), (30, 1, 0, 3), (40, 1, 1, 1),
    (50, 0, 2, 0), (60, 0, 2, 2), (70, 1, 2, 3), (80, 1, 0, 0), (90, 0, 1, 3),
    (100, 1, 1, 0), (615, 0, 0, 3), (620, 1, 2, 1), (630, 0, 2, 3), (640, 1, 0, 2),
    (650, 0, 1, 1), (660, 1, 1, 3), (670, 0, 0, 1), (680, 1, 2, 2), (1300, 0, 2, 1),
]


@pytest.fixture
def hand_trace():
    return RequestTrace.from_requests([Request(float(t), b, v, q) for t, b, v, q in HAND_TRACE], horizon=1800.0)
