"""History states on the binary de Bruijn graph.

A state ``m = (m_1, ..., m_d)`` holds the last ``d`` market moves, oldest
first.  It is stored as an integer ``code`` in ``[0, 2**d)``: bit ``j`` holds
``m_{j+1}`` with ``-1 -> 0`` and ``+1 -> 1``.  Shifting drops bit 0 (the
oldest move) and writes the new move into bit ``d-1``.

Text form: one character per move, oldest first, ``+``/``-`` (canonical)
or ``1``/``0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_WINDOW = 24


class WindowTooLarge(ValueError):
    pass


def _check_bit(b: int) -> int:
    if b not in (-1, 1):
        raise ValueError(f"market move must be -1 or +1, got {b!r}")
    return b


@dataclass(frozen=True, order=True)
class HistoryState:
    d: int
    code: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("window length d must be >= 1")
        if not 0 <= self.code < (1 << self.d):
            raise ValueError(f"code {self.code} out of range for d={self.d}")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "HistoryState":
        """Build from a +-1 sequence, oldest move first."""
        code = 0
        for j, b in enumerate(bits):
            if _check_bit(int(b)) == 1:
                code |= 1 << j
        return cls(len(bits), code)

    @classmethod
    def parse(cls, text: str) -> "HistoryState":
        bits = []
        for ch in text.strip():
            if ch in "+1":
                bits.append(1)
            elif ch in "-0":
                bits.append(-1)
            else:
                raise ValueError(f"bad state character {ch!r} in {text!r}")
        if not bits:
            raise ValueError("empty state")
        return cls.from_bits(bits)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(1 if (self.code >> j) & 1 else -1 for j in range(self.d))

    def __str__(self) -> str:
        return "".join("+" if b == 1 else "-" for b in self.bits)

    def binary(self) -> str:
        """The 0/1 form used in figures, e.g. ``101``."""
        return "".join("1" if b == 1 else "0" for b in self.bits)

    @property
    def plus(self) -> "HistoryState":
        return shift(self, 1)

    @property
    def minus(self) -> "HistoryState":
        return shift(self, -1)


def shift_code(code: int, d: int, b: int) -> int:
    return (code >> 1) | ((1 if b == 1 else 0) << (d - 1))


def shift(m: HistoryState, b: int) -> HistoryState:
    """``m|b``: drop the oldest move and append ``b``."""
    return HistoryState(m.d, shift_code(m.code, m.d, _check_bit(int(b))))


def shift_word(m: HistoryState, s: Iterable[int]) -> HistoryState:
    code = m.code
    for b in s:
        code = shift_code(code, m.d, _check_bit(int(b)))
    return HistoryState(m.d, code)


def enumerate_states(d: int, max_d: int = MAX_WINDOW) -> list[HistoryState]:
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > max_d:
        raise WindowTooLarge(f"d={d} exceeds the enumeration guard {max_d}")
    return [HistoryState(d, c) for c in range(1 << d)]


def successor_table(d: int) -> np.ndarray:
    """Array ``succ[code, j]`` with ``j=0`` for ``b=-1`` and ``j=1`` for ``b=+1``."""
    if d > MAX_WINDOW:
        raise WindowTooLarge(f"d={d} exceeds the enumeration guard {MAX_WINDOW}")
    codes = np.arange(1 << d, dtype=np.int64)
    succ = np.empty((1 << d, 2), dtype=np.int64)
    succ[:, 0] = codes >> 1
    succ[:, 1] = (codes >> 1) | (1 << (d - 1))
    return succ


def as_state(m, d: int) -> HistoryState:
    """Coerce a state, code, text or bit tuple to a :class:`HistoryState`."""
    if isinstance(m, HistoryState):
        if m.d != d:
            raise ValueError(f"state has d={m.d}, expected {d}")
        return m
    if isinstance(m, str):
        st = HistoryState.parse(m)
        if st.d != d:
            raise ValueError(f"state {m!r} has length {st.d}, expected {d}")
        return st
    if isinstance(m, (int, np.integer)):
        return HistoryState(d, int(m))
    return as_state(HistoryState.from_bits(list(m)), d)
