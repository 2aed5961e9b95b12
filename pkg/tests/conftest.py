"""Shared instance generators and the acceptance-summary hook."""
import re
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import strategies as st

from strassen_lab.measures import Dist
from strassen_lab.transport import CostMatrix

# ---------------------------------------------------------------------------
# random-instance helpers (numpy Generator based, for seeded bulk sweeps)


def random_dist(rng: np.random.Generator, k: int, positive: bool = False) -> Dist:
    w = rng.random(k)
    if positive:
        w = w + 0.05
    else:
        # knock out a coordinate now and then to exercise zero-mass paths
        if k > 1 and rng.random() < 0.25:
            w[rng.integers(k)] = 0.0
    if w.sum() == 0.0:
        w[0] = 1.0
    w = w / w.sum()
    return Dist.from_mass(w.tolist())


def random_cost(rng: np.random.Generator, m: int, k: int) -> CostMatrix:
    return CostMatrix.from_rows(np.round(rng.random((m, k)) * 4.0, 3).tolist())


# ---------------------------------------------------------------------------
# hypothesis strategies built from integer weights so masses sum cleanly


@st.composite
def dist_st(draw, k_min=2, k_max=4, positive=True):
    k = draw(st.integers(k_min, k_max))
    low = 1 if positive else 0
    w = draw(st.lists(st.integers(low, 40), min_size=k, max_size=k)
             .filter(lambda v: sum(v) > 0))
    tot = sum(w)
    return Dist.from_mass([v / tot for v in w])


@st.composite
def dist_pair_st(draw, k_min=2, k_max=4, positive=True):
    k = draw(st.integers(k_min, k_max))
    low = 1 if positive else 0
    mk = st.lists(st.integers(low, 40), min_size=k, max_size=k).filter(
        lambda v: sum(v) > 0)
    w1, w2 = draw(mk), draw(mk)
    return (Dist.from_mass([v / sum(w1) for v in w1]),
            Dist.from_mass([v / sum(w2) for v in w2]))


@st.composite
def cost_st(draw, m, k, scale=4):
    rows = draw(st.lists(
        st.lists(st.integers(0, scale * 4), min_size=k, max_size=k),
        min_size=m, max_size=m))
    return CostMatrix.from_rows([[v / 4.0 for v in row] for row in rows])


@st.composite
def problem_st(draw, k_min=2, k_max=3, positive=True):
    """(p_x, p_y, cost) with independently sized alphabets."""
    mx = draw(st.integers(k_min, k_max))
    my = draw(st.integers(k_min, k_max))
    low = 1 if positive else 0
    wx = draw(st.lists(st.integers(low, 40), min_size=mx, max_size=mx)
              .filter(lambda v: sum(v) > 0))
    wy = draw(st.lists(st.integers(low, 40), min_size=my, max_size=my)
              .filter(lambda v: sum(v) > 0))
    cost = draw(cost_st(mx, my))
    return (Dist.from_mass([v / sum(wx) for v in wx]),
            Dist.from_mass([v / sum(wy) for v in wy]),
            cost)


# ---------------------------------------------------------------------------
# acceptance summary: any test named test_criterionN_* feeds line N


_ACC_RX = re.compile(r"test_criterion(\d+)")
_ACC_STATE = defaultdict(lambda: {"passed": 0, "failed": 0})


def pytest_runtest_logreport(report):
    m = _ACC_RX.search(report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.failed:
        _ACC_STATE[key]["failed"] += 1
    elif report.when == "call" and report.passed:
        _ACC_STATE[key]["passed"] += 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACC_STATE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACC_STATE):
        state = _ACC_STATE[key]
        ok = state["failed"] == 0 and state["passed"] > 0
        terminalreporter.write_line(
            f"ACCEPTANCE {key}: {'PASS' if ok else 'FAIL'}"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
