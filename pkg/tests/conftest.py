import numpy as np
import pytest
from hypothesis import strategies as st

from lobchain.book import BookState, ModelParams

GOLDEN_ASK = (0, 0, 0, 0, 1, 3, 5, 4, 2)
GOLDEN_BID = (0, 0, 0, 0, 1, 0, 4, 5, 3)


@pytest.fixture
def golden_params():
    return ModelParams.uniform(9, boundary_ask=4, boundary_bid=4)


@pytest.fixture
def x0():
    return BookState(GOLDEN_ASK, GOLDEN_BID)


@st.composite
def book_states(draw, N, max_count=6):
    """Consistent states: both sides share their first occupied level."""
    spread = draw(st.integers(1, N + 1))
    counts = st.integers(0, max_count)
    ask = [0] * (spread - 1) + draw(st.lists(counts, min_size=N - spread + 1, max_size=N - spread + 1))
    bid = [0] * (spread - 1) + draw(st.lists(counts, min_size=N - spread + 1, max_size=N - spread + 1))
    if spread <= N:
        ask[spread - 1] = max(ask[spread - 1], 1)
        bid[spread - 1] = max(bid[spread - 1], 1)
    return BookState(ask, bid, draw(st.integers(-100, 100)))


@st.composite
def model_params(draw, N=None, mode=None):
    N = N or draw(st.integers(1, 5))
    q = draw(st.sampled_from([1, 2]))
    rate = st.floats(0.05, 3.0)
    vec = st.lists(rate, min_size=N, max_size=N)
    return ModelParams(
        N=N, q=q, rate_market_buy=draw(rate), rate_market_sell=draw(rate),
        rate_limit_ask=draw(vec), rate_limit_bid=draw(vec),
        rate_cancel_ask=draw(vec), rate_cancel_bid=draw(vec),
        boundary_ask=q * draw(st.integers(1, 4)), boundary_bid=q * draw(st.integers(1, 4)),
        cancel_mode=mode or draw(st.sampled_from(["proportional", "constant"])))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
