import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bruijnregret.debruijn import (HistoryState, WindowTooLarge, as_state, enumerate_states, shift,
                                   shift_word, successor_table)


def S(text):
    return HistoryState.parse(text)


@pytest.mark.parametrize("m, b, want", [("101", 1, "011"), ("101", -1, "010"), ("1", 1, "1")])
def test_shift_examples(m, b, want):
    assert shift(S(m), b).binary() == want


@pytest.mark.parametrize("m, s, want", [("01", [1], "11"), ("01", [1, -1, -1], "00"), ("101", [1, 1], "111")])
def test_shift_word_examples(m, s, want):
    assert shift_word(S(m), s).binary() == want


def test_plus_minus_are_shifts():
    m = S("+-+")
    assert m.plus == shift(m, 1) and m.minus == shift(m, -1)


def test_enumerate():
    assert [str(s) for s in enumerate_states(1)] == ["-", "+"]
    assert [s.code for s in enumerate_states(2)] == [0, 1, 2, 3]
    assert len({s.binary() for s in enumerate_states(3)}) == 8
    with pytest.raises(WindowTooLarge):
        enumerate_states(25)


def test_text_forms_agree():
    assert S("+-+") == S("101")
    assert str(S("101")) == "+-+"
    with pytest.raises(ValueError):
        S("1x0")


def test_bad_bit():
    with pytest.raises(ValueError):
        shift(S("10"), 0)


@given(st.integers(1, 8), st.data())
def test_round_trip(d, data):
    code = data.draw(st.integers(0, (1 << d) - 1))
    m = HistoryState(d, code)
    assert HistoryState.from_bits(m.bits) == m
    assert HistoryState.parse(str(m)) == m
    assert as_state(m.binary(), d) == m


@given(st.integers(1, 6), st.data())
def test_root_forgotten_after_d_steps(d, data):
    s = data.draw(st.lists(st.sampled_from([-1, 1]), min_size=d, max_size=d))
    outs = {shift_word(m, s) for m in enumerate_states(d)}
    assert len(outs) == 1
    assert outs.pop().bits == tuple(s[-d:])


@given(st.integers(1, 6), st.data())
def test_concatenation_associative(d, data):
    m = HistoryState(d, data.draw(st.integers(0, (1 << d) - 1)))
    s = data.draw(st.lists(st.sampled_from([-1, 1]), max_size=8))
    t = data.draw(st.lists(st.sampled_from([-1, 1]), max_size=8))
    assert shift_word(m, s + t) == shift_word(shift_word(m, s), t)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_degrees(d):
    succ = successor_table(d)
    for m in enumerate_states(d):
        assert succ[m.code, 0] == shift(m, -1).code
        assert succ[m.code, 1] == shift(m, 1).code
    indeg = np.bincount(succ.reshape(-1), minlength=1 << d)
    assert np.all(indeg == 2)
