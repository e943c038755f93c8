"""Investor and market strategies and the round-by-round simulator.

Each round on day ``i`` the investor picks ``f in [-1, 1]``, the market
answers ``b = +-1``, and then::

    x <- x + b (q(m) - f 1),    m <- m | b

Days run from ``ell`` to ``N - 1``; the payoff ``g(x)`` is read on day ``N``.

Asymptotic strategies work in the rescaled picture ``u(x / sqrt(N), t)``
with ``t = (day - 1) / N`` so that the first day sits at ``t = 0``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .debruijn import HistoryState, as_state, shift
from .experts import ExpertPanel
from .game import GameSpec, optimal_move, value_exact
from .local import DENOM_TOL, DegenerateDenominator, DegenerateGradient, h_tables
from .payoff import Payoff, with_dimension
from .pde import PdeSolution

TIE_TOL = 1e-12
# overshoots below this are rounding on a move that is exactly +-1
CLAMP_TOL = 1e-9


@dataclass
class ClampCounter:
    """Clamps to ``[-1, 1]`` and counts overshoots larger than ``CLAMP_TOL``."""

    count: int = 0
    rounding: int = 0

    def clamp(self, f: float) -> float:
        if f > 1.0 or f < -1.0:
            if abs(f) - 1.0 > CLAMP_TOL:
                self.count += 1
            else:
                self.rounding += 1
            return 1.0 if f > 1.0 else -1.0
        return float(f)


# ------------------------------------------------------------ trajectories


@dataclass(frozen=True)
class Round:
    day: int
    state: HistoryState  # state before the move
    f: float
    b: int
    x: np.ndarray  # regret after the round


@dataclass
class Trajectory:
    n: int
    x0: np.ndarray
    rounds: list[Round]
    final_payoff: float
    investor: str = ""
    market: str = ""
    clamps: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def final_x(self) -> np.ndarray:
        return self.rounds[-1].x if self.rounds else self.x0

    def write_csv(self, fh, payoff: Payoff, metadata: str | None = None) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "state", "f", "b"] + [f"x_{j + 1}" for j in range(self.n)] + ["running_payoff"])
        for r in self.rounds:
            w.writerow([r.day, str(r.state), repr(r.f), r.b] + [repr(float(v)) for v in r.x]
                       + [repr(float(payoff(r.x)))])
        if metadata:
            fh.write(metadata.rstrip("\n") + "\n")

    def to_csv(self, payoff: Payoff, metadata: str | None = None) -> str:
        buf = io.StringIO()
        self.write_csv(buf, payoff, metadata)
        return buf.getvalue()


# --------------------------------------------------------- single moves


def _rescaled(spec: GameSpec) -> tuple[np.ndarray, float]:
    return spec.x0 / math.sqrt(spec.N), (spec.ell - 1) / spec.N


def investor_gradient_weighted(pde_sol: PdeSolution, panel: ExpertPanel, x, t: float, m,
                               counter: ClampCounter | None = None) -> float:
    """``<grad u, q(m)> / <grad u, 1>``, clamped to ``[-1, 1]``."""
    p = pde_sol.gradient(x, t)
    s = float(p.sum())
    if s <= DENOM_TOL:
        raise DegenerateGradient(f"<grad u, 1> = {s:.3g}")
    f = float(p @ panel.q(as_state(m, panel.d))) / s
    return (counter or ClampCounter()).clamp(f)


def investor_exact(spec: GameSpec, engine: str = "auto") -> float:
    return optimal_move(spec, engine)[0]


def continuation_values(spec: GameSpec, f: float, engine: str = "auto") -> tuple[float, float]:
    """``V`` on the next day after ``b = +1`` and after ``b = -1``."""
    if spec.steps == 0:
        raise ValueError("no move remains at ell = N")
    delta = spec.panel.q(spec.m0) - f
    out = []
    for b in (1, -1):
        nxt = spec.replace(x0=spec.x0 + b * delta, m0=shift(spec.m0, b), ell=spec.ell + 1)
        out.append(value_exact(nxt, engine))
    return out[0], out[1]


def market_exhaustive(spec: GameSpec, f: float, engine: str = "auto") -> int:
    """Move with the larger continuation value; ties go to +1."""
    vp, vm = continuation_values(spec, f, engine)
    return 1 if vp >= vm - TIE_TOL * max(1.0, abs(vp), abs(vm)) else -1


def market_greedy_sign(pde_sol: PdeSolution, panel: ExpertPanel, x, t: float, m, f: float) -> int:
    """``sign(<grad u, q(m) - f 1>)`` with zero sent to +1."""
    p = pde_sol.gradient(x, t)
    if float(p.sum()) <= DENOM_TOL:
        raise DegenerateGradient("<grad u, 1> is not positive")
    v = float(p @ (panel.q(as_state(m, panel.d)) - f))
    return -1 if v < 0 else 1


# ------------------------------------------------------------ block state


@dataclass
class BlockState:
    """Frozen derivatives and running sums for one block of the block strategy."""

    k: int
    p: np.ndarray
    X: np.ndarray
    eps: float
    tables: list  # HTable for depths 0..k
    acc: np.ndarray = None  # sum_j b_j (q(m^j) - f_j 1) within the block
    position: int = 1

    def __post_init__(self):
        if self.acc is None:
            self.acc = np.zeros(self.p.size)

    @classmethod
    def start(cls, p, X, k: int, panel: ExpertPanel, eps: float) -> "BlockState":
        p = np.asarray(p, dtype=float)
        X = np.asarray(X, dtype=float)
        ctx = _Frozen(X, p)
        return cls(k, p, X, eps, h_tables(ctx, panel, k))

    def denominator(self) -> float:
        return float(self.p.sum() + self.eps * (self.X.sum(axis=1) @ self.acc))

    def record(self, q: np.ndarray, f: float, b: int) -> None:
        self.acc = self.acc + b * (q - f)
        self.position += 1


@dataclass(frozen=True)
class _Frozen:
    X: np.ndarray
    p: np.ndarray


def investor_block(block: BlockState, panel: ExpertPanel, i: int, m,
                   counter: ClampCounter | None = None) -> float:
    """Move ``i`` (1-based) of a block.

    The running sums of earlier moves in the block live in ``block.acc``.
    """
    if not 1 <= i <= block.k:
        raise ValueError(f"position {i} outside block of length {block.k}")
    m = as_state(m, panel.d)
    q = panel.q(m)
    h = block.denominator()
    if h <= DENOM_TOL:
        raise DegenerateDenominator(f"block denominator {h:.3g} at position {i}")
    corr = block.tables[block.k - i].deltas[m.code]
    num = float(block.p @ q) + block.eps * float(q @ block.X @ block.acc) + 0.5 * block.eps * corr
    return (counter or ClampCounter()).clamp(num / h)


# ------------------------------------------------------- strategy objects


class Investor(Protocol):
    name: str
    clamps: ClampCounter

    def begin(self, spec: GameSpec) -> None: ...
    def move(self, spec: GameSpec) -> float: ...
    def observe(self, spec: GameSpec, f: float, b: int) -> None: ...


class Market(Protocol):
    name: str

    def begin(self, spec: GameSpec) -> None: ...
    def move(self, spec: GameSpec, f: float, rng: np.random.Generator) -> int: ...


class _Base:
    name = "base"

    def __init__(self):
        self.clamps = ClampCounter()
        self.notes: list[str] = []

    def begin(self, spec: GameSpec) -> None:
        self.clamps = ClampCounter()
        self.notes = []

    def observe(self, spec: GameSpec, f: float, b: int) -> None:
        pass


class ExactInvestor(_Base):
    name = "exact"

    def __init__(self, engine: str = "auto"):
        super().__init__()
        self.engine = engine

    def move(self, spec: GameSpec) -> float:
        return investor_exact(spec, self.engine)


class GradientInvestor(_Base):
    name = "gradient"

    def __init__(self, pde_sol: PdeSolution):
        super().__init__()
        self.pde_sol = pde_sol

    def move(self, spec: GameSpec) -> float:
        x, t = _rescaled(spec)
        return investor_gradient_weighted(self.pde_sol, spec.panel, x, t, spec.m0, self.clamps)


class ConstantInvestor(_Base):
    def __init__(self, f: float):
        super().__init__()
        if not -1.0 <= f <= 1.0:
            raise ValueError("f must lie in [-1, 1]")
        self.f = float(f)
        self.name = f"constant:{f!r}"

    def move(self, spec: GameSpec) -> float:
        return self.f


class BlockInvestor(_Base):
    """Block strategy with blocks of length ``k`` from the first simulated day.

    A final block shorter than ``k`` uses tables of its own depth.
    """

    name = "block"

    def __init__(self, pde_sol: PdeSolution, k: int):
        super().__init__()
        if k < 1:
            raise ValueError("k must be >= 1")
        self.pde_sol = pde_sol
        self.k = int(k)
        self.block: BlockState | None = None

    def begin(self, spec: GameSpec) -> None:
        super().begin(spec)
        self.block = None
        self.start_day = spec.ell
        if spec.steps % self.k:
            self.notes.append(f"ragged final block of length {spec.steps % self.k}")

    def move(self, spec: GameSpec) -> float:
        if self.block is None or self.block.position > self.block.k:
            depth = min(self.k, spec.N - spec.ell)
            x, t = _rescaled(spec)
            p, X, _ = self.pde_sol.derivatives(x, t)
            self.block = BlockState.start(p, X, depth, spec.panel, 1.0 / math.sqrt(spec.N))
        return investor_block(self.block, spec.panel, self.block.position, spec.m0, self.clamps)

    def observe(self, spec: GameSpec, f: float, b: int) -> None:
        self.block.record(spec.panel.q(spec.m0), f, b)


class ExhaustiveMarket(_Base):
    name = "exhaustive"

    def __init__(self, engine: str = "auto"):
        super().__init__()
        self.engine = engine

    def move(self, spec: GameSpec, f: float, rng) -> int:
        return market_exhaustive(spec, f, self.engine)


class GreedyMarket(_Base):
    name = "greedy"

    def __init__(self, pde_sol: PdeSolution):
        super().__init__()
        self.pde_sol = pde_sol

    def move(self, spec: GameSpec, f: float, rng) -> int:
        x, t = _rescaled(spec)
        return market_greedy_sign(self.pde_sol, spec.panel, x, t, spec.m0, f)


class RandomMarket(_Base):
    name = "random"

    def move(self, spec: GameSpec, f: float, rng) -> int:
        return 1 if rng.random() < 0.5 else -1


class FixedMarket(_Base):
    """Plays a given move sequence (cycled)."""

    def __init__(self, moves):
        super().__init__()
        self.moves = [int(b) for b in moves]
        if not self.moves or any(b not in (-1, 1) for b in self.moves):
            raise ValueError("moves must be a nonempty sequence of +-1")
        self.name = "fixed"

    def move(self, spec: GameSpec, f: float, rng) -> int:
        return self.moves[(spec.ell - self._start) % len(self.moves)]

    def begin(self, spec: GameSpec) -> None:
        super().begin(spec)
        self._start = spec.ell


# --------------------------------------------------------------- simulator


def simulate(panel: ExpertPanel, payoff: Payoff, N: int, x0, m0, investor, market,
             seed: int = 0, ell: int = 1) -> Trajectory:
    """Play days ``ell .. N-1`` and read the payoff on day ``N``."""
    payoff = with_dimension(payoff, panel.n)
    spec = GameSpec(panel, payoff, N, x0, m0, ell)
    rng = np.random.default_rng(seed)
    investor.begin(spec)
    market.begin(spec)
    x = spec.x0.copy()
    m = spec.m0
    rounds: list[Round] = []
    for day in range(ell, N):
        cur = spec.replace(x0=x, m0=m, ell=day)
        f = float(investor.move(cur))
        if not -1.0 <= f <= 1.0:
            raise ValueError(f"investor played f={f} outside [-1, 1]")
        b = int(market.move(cur, f, rng))
        if b not in (-1, 1):
            raise ValueError(f"market played b={b}")
        investor.observe(cur, f, b)
        x = x + b * (panel.q(m) - f)
        rounds.append(Round(day, m, f, b, x))
        m = shift(m, b)
    notes = list(getattr(investor, "notes", [])) + list(getattr(market, "notes", []))
    return Trajectory(panel.n, spec.x0, rounds, float(payoff(x)), investor.name, market.name,
                      investor.clamps.count, notes)


def block_length(N: int, d: int = 1) -> int:
    """``ceil(d^(1/3) N^(1/6))``."""
    return max(1, math.ceil(d ** (1.0 / 3.0) * N ** (1.0 / 6.0) - 1e-12))
