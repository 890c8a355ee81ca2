import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wsanctl.actuation import ActuationBuffer
from wsanctl.errors import ConfigurationError


def _seq(N, base=0.0):
    return (base + np.arange(N, dtype=float)).reshape(-1, 1)


def test_push_then_pop_same_period():
    buf = ActuationBuffer.filled([0.2], 5).push(_seq(5, 1.0), 0)
    assert buf.pop(0)[0] == 1.0


def test_latest_push_wins():
    buf = ActuationBuffer.filled([0.2], 5)
    buf.push(_seq(5, 1.0), 3).push(_seq(5, 10.0), 3)
    assert buf.pop(3)[0] == 10.0


def test_offset_arithmetic():
    buf = ActuationBuffer.filled([0.0], 5).push(_seq(5), 5)
    assert buf.pop(7)[0] == 2.0


def test_drop_plays_previous_plan():
    buf = ActuationBuffer.filled([0.0], 5).push(_seq(5, 1.0), 4)
    # plan issued for period 4 was not replaced at period 5
    assert buf.pop(5)[0] == 2.0


def test_hold_last_past_plan_end():
    buf = ActuationBuffer.filled([0.0], 4).push(_seq(4), 0)
    assert buf.pop(3)[0] == 3.0
    assert buf.pop(100)[0] == 3.0


def test_initial_content_is_u_bar():
    buf = ActuationBuffer.filled([0.2], 50)
    assert buf.capacity == 50
    assert all(buf.pop(k)[0] == 0.2 for k in range(60))


def test_wrong_length_rejected():
    buf = ActuationBuffer.filled([0.0], 5)
    with pytest.raises(ConfigurationError):
        buf.push(_seq(4), 0)


def test_pop_before_issue_rejected():
    buf = ActuationBuffer.filled([0.0], 5).push(_seq(5), 10)
    with pytest.raises(ConfigurationError):
        buf.pop(9)


@given(st.lists(st.booleans(), min_size=1, max_size=120))
def test_steady_state_any_drop_pattern(drops):
    u_bar = np.array([0.30442417])
    buf = ActuationBuffer.filled(u_bar, 50)
    for k, dropped in enumerate(drops):
        assert np.array_equal(buf.pop(k), u_bar)
        if not dropped:
            buf.push(np.tile(u_bar, (50, 1)), k + 1)


def test_pop_is_side_effect_free():
    buf = ActuationBuffer.filled([0.0], 5).push(_seq(5), 2)
    before = buf.seq.copy()
    a, b = buf.pop(4), buf.pop(4)
    assert np.array_equal(a, b) and np.array_equal(buf.seq, before) and buf.t_issued == 2
