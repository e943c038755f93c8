"""Exact value of the finite-horizon expert game and its rescalings.

The game starts on day ``ell`` with regret ``x`` and history ``m`` and runs
``N - ell`` rounds.  In each round the investor picks ``|f| <= 1``, the
market picks ``b = +-1``, and ``x <- x + b (q(m) - f 1)``, ``m <- m|b``.
The final payoff is ``g(x)``.

Three engines compute the value:

``path``
    Enumerates all ``2**(N-ell)`` market paths and folds them with
    :func:`g3_step`.  Needs the translation property (G3).
``lattice``
    Same recursion on a dense integer lattice of regret differences, which
    works when every prediction is ``k/D``.  Cost grows polynomially in
    ``N``, so horizons in the thousands are fine.
``brute``
    Puts ``f`` on a uniform grid and solves the min-max by search.  Does not
    use (G3).

Under (G3) write ``x = (y + x_n 1', x_n)`` with ``y`` the differences
against the last expert.  Then ``V(x) = W(y) + x_n`` and one round reads
``W(y, m) = g3_step(W(y + r(m), m+) + q_n(m), W(y - r(m), m-) - q_n(m))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import _kernels
from .debruijn import HistoryState, as_state, successor_table
from .experts import ExpertPanel, compute_r_table
from .payoff import Payoff, with_dimension

PATH_MAX_STEPS = 22
BRUTE_MAX_STEPS = 6
LATTICE_MAX_LEVEL_CELLS = 1 << 25
BRUTE_MAX_CELLS = 1 << 27
SNAP_TOL = 1e-12


class HorizonTooLarge(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GameSpec:
    panel: ExpertPanel
    payoff: Payoff
    N: int
    x0: np.ndarray
    m0: HistoryState
    ell: int = 1

    def __post_init__(self):
        x = np.array(self.x0, dtype=float).reshape(-1)
        if x.shape != (self.panel.n,):
            raise ValueError(f"x0 needs {self.panel.n} entries, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x0 must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "x0", x)
        object.__setattr__(self, "m0", as_state(self.m0, self.panel.d))
        object.__setattr__(self, "payoff", with_dimension(self.payoff, self.panel.n))
        if self.N < 1 or not 1 <= self.ell <= self.N:
            raise ValueError(f"need 1 <= ell <= N, got ell={self.ell}, N={self.N}")

    @property
    def steps(self) -> int:
        return self.N - self.ell

    def replace(self, **kw) -> "GameSpec":
        args = dict(panel=self.panel, payoff=self.payoff, N=self.N, x0=self.x0,
                    m0=self.m0, ell=self.ell)
        args.update(kw)
        return GameSpec(**args)


def g3_step(a: float, b: float) -> tuple[float, float]:
    """``min_{|f|<=1} max(a - f, b + f)`` and its minimizer."""
    f = min(1.0, max(-1.0, 0.5 * (a - b)))
    return float(_kernels.g3_value(a, b)), f


def ell_from_t(N: int, t: float) -> int:
    """Start day ``max(1, ceil(N t))``; ``N t`` within 1e-12 of an integer snaps to it."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    nt = N * t
    r = round(nt)
    if abs(nt - r) <= SNAP_TOL:
        nt = r
    return max(1, min(N, math.ceil(nt)))


def _require_g3(g: Payoff, engine: str):
    if not g.g3:
        raise ValueError(f"the {engine} engine needs a payoff with the translation property")


def _pad_zero(y: np.ndarray) -> np.ndarray:
    return np.concatenate([y, np.zeros(y.shape[:-1] + (1,))], axis=-1)


# ------------------------------------------------------------- path engine


def _path_W(panel: ExpertPanel, g: Payoff, y0: np.ndarray, code: int, T: int,
            max_steps: int = PATH_MAX_STEPS) -> tuple[float, float, float]:
    """Returns ``W(y0, m)`` and the two root arguments ``(a, b)`` of g3_step."""
    if T > max_steps:
        raise HorizonTooLarge(f"path engine: {T} steps exceeds the budget of {max_steps}")
    r = compute_r_table(panel)
    qn = panel.table[:, -1]
    succ = panel.successors()
    codes = np.array([code], dtype=np.int64)
    ys = y0[None, :].astype(float)
    levels = []
    for _ in range(T):
        levels.append(codes)
        rr = r[codes]
        # child 2i is b=-1, child 2i+1 is b=+1
        ys = np.stack([ys - rr, ys + rr], axis=1).reshape(-1, ys.shape[1])
        codes = np.stack([succ[codes, 0], succ[codes, 1]], axis=1).reshape(-1)
    W = np.asarray(g.fn(_pad_zero(ys)), dtype=float)
    a = b = float("nan")
    for codes in reversed(levels):
        q = qn[codes]
        a_arr = W[1::2] + q
        b_arr = W[0::2] - q
        W = _kernels.g3_value(a_arr, b_arr)
    if T > 0:
        a, b = float(a_arr[0]), float(b_arr[0])
    return float(W[0]), a, b


# ---------------------------------------------------------- lattice engine


@dataclass(frozen=True)
class _Lattice:
    unit: np.ndarray  # step of each difference coordinate
    steps: np.ndarray  # (2**d, n-1) integer moves r(m) / unit
    reach: np.ndarray  # max |steps| per coordinate


def _lattice_geometry(panel: ExpertPanel) -> _Lattice:
    if panel.D is None:
        raise ValueError("the lattice engine needs predictions on a common grid k/D")
    D = panel.D
    ir = np.rint(compute_r_table(panel) * D).astype(np.int64)
    gcds = np.array([reduce(math.gcd, np.abs(col).tolist(), 0) or 1 for col in ir.T], dtype=np.int64)
    steps = ir // gcds
    return _Lattice(gcds / D, steps, np.abs(steps).max(axis=0))


def _box(reach: np.ndarray, j: int) -> tuple[tuple[int, ...], np.ndarray]:
    shape = tuple(int(2 * j * R + 1) for R in reach)
    strides = np.ones(len(shape), dtype=np.int64)
    for i in range(len(shape) - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    return shape, strides


def lattice_root(panel: ExpertPanel, g: Payoff, y0: np.ndarray, T: int,
                 max_level_cells: int = LATTICE_MAX_LEVEL_CELLS):
    """``W(y0, m)`` for every state at once, plus the root g3_step arguments.

    Returns ``(W, a, b)``, arrays over state codes.  With ``T == 0`` the
    arguments are NaN.
    """
    geo = _lattice_geometry(panel)
    M = panel.num_states
    shape_T, _ = _box(geo.reach, T)
    cells = M * int(np.prod(shape_T))
    if cells > max_level_cells:
        raise HorizonTooLarge(
            f"lattice engine: {cells} cells at the last level exceeds the budget of {max_level_cells}")
    succ = successor_table(panel.d)
    sm = np.ascontiguousarray(succ[:, 0])
    sp = np.ascontiguousarray(succ[:, 1])
    qn = np.ascontiguousarray(panel.table[:, -1])

    # leaves: y = y0 + k * unit over the box of half-width T * reach
    axes = [np.arange(-T * R, T * R + 1) for R in geo.reach]
    k = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    y = y0[None, :] + k * geo.unit[None, :]
    leaf = np.asarray(g.fn(_pad_zero(y)), dtype=float)
    W = np.ascontiguousarray(np.broadcast_to(leaf, (M, leaf.shape[0])))
    a = b = np.full(M, np.nan)
    for j in range(T - 1, -1, -1):
        shape_j, _ = _box(geo.reach, j)
        _, strides_next = _box(geo.reach, j + 1)
        idx = np.stack(np.meshgrid(*[np.arange(s) for s in shape_j], indexing="ij"), axis=-1)
        idx = idx.reshape(-1, len(shape_j)) + geo.reach[None, :]  # same offset, next box
        base = np.ascontiguousarray(idx @ strides_next)
        off = np.ascontiguousarray(geo.steps @ strides_next)
        if j == 0:
            a = W[sp, base[0] + off] + qn
            b = W[sm, base[0] - off] - qn
        W = _kernels.lattice_level(W, sm, sp, qn, base, off)
    return W[:, 0].copy(), a, b


# ------------------------------------------------------------ brute engine


def _grid_count(f_grid: float) -> int:
    if f_grid < 1e-4:
        raise ValueError("f_grid must be at least 1e-4")
    K = round(1.0 / f_grid)
    if K < 1 or abs(K * f_grid - 1.0) > 1e-9:
        raise ValueError(f"1/f_grid must be an integer, got f_grid={f_grid}")
    return K


def _leaf_positions(panel: ExpertPanel, x0: np.ndarray, code: int, T: int):
    """Regret before investor terms and final state for each of the 2**T paths."""
    succ = panel.successors()
    xs = x0[None, :].astype(float)
    codes = np.array([code], dtype=np.int64)
    for _ in range(T):
        q = panel.table[codes]
        xs = np.stack([xs - q, xs + q], axis=1).reshape(-1, xs.shape[1])
        codes = np.stack([succ[codes, 0], succ[codes, 1]], axis=1).reshape(-1)
    return xs, codes


def _leaf_monotone(tables: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(tables))))
    return bool(np.all(np.diff(tables, axis=1) <= 1e-12 * scale))


def _brute_fold(tables: np.ndarray, k: int, K: int, G0: int, exhaustive: bool | None = None):
    """Fold ``k`` rounds of min-max over ``f`` on the grid.

    ``tables[s]`` holds the continuation value at leaf ``s`` as a function
    of ``c = sum b f`` on the grid ``gamma / K`` with ``|gamma| <= G0 + k K``.
    Returns the root table over ``|gamma| <= G0`` and its argmin ``phi``.
    """
    if exhaustive is None:
        exhaustive = not _leaf_monotone(tables)
    kern = _kernels.exhaustive_minmax if exhaustive else _kernels.crossing_minmax
    arg = np.zeros(2 * G0 + 1, dtype=np.int64)
    for j in range(k - 1, -1, -1):
        Hc = G0 + (j + 1) * K
        Hp = G0 + j * K
        nxt = np.empty((tables.shape[0] // 2, 2 * Hp + 1))
        for i in range(nxt.shape[0]):
            nxt[i], arg = kern(np.ascontiguousarray(tables[2 * i + 1]),
                               np.ascontiguousarray(tables[2 * i]), Hc, Hp, -K, K)
        tables = nxt
    return tables[0], arg


def brute_root(panel: ExpertPanel, g: Payoff, x0: np.ndarray, code: int, T: int, f_grid: float,
               G0: int = 0, max_steps: int = BRUTE_MAX_STEPS, max_cells: int = BRUTE_MAX_CELLS):
    """Value table over ``c = gamma * f_grid``, ``|gamma| <= G0``, at the root.

    The root value at investor offset ``c`` is ``V(x0 - c 1)``.  Also returns
    the minimizing grid move at the root for each ``c``.
    """
    K = _grid_count(f_grid)
    if T > max_steps:
        raise HorizonTooLarge(f"brute engine: {T} steps exceeds the budget of {max_steps}")
    H = G0 + T * K
    if (1 << T) * (2 * H + 1) > max_cells:
        raise HorizonTooLarge("brute engine: grid tables exceed the cell budget")
    xs, _ = _leaf_positions(panel, x0, code, T)
    gam = np.arange(-H, H + 1) / K
    tables = np.empty((xs.shape[0], 2 * H + 1))
    for s in range(xs.shape[0]):
        tables[s] = g.fn(xs[s][None, :] - gam[:, None])
    table, arg = _brute_fold(tables, T, K, G0)
    return table, arg * f_grid if T > 0 else None


# ---------------------------------------------------------------- front end


def _pick_engine(spec: GameSpec, engine: str) -> str:
    if engine != "auto":
        return engine
    if not spec.payoff.g3:
        return "brute"
    return "lattice" if spec.panel.D is not None else "path"


def value_exact(spec: GameSpec, engine: str = "auto", f_grid: float = 1e-3, **budget) -> float:
    """``V_N(x0, ell; m0)``."""
    if spec.steps == 0:
        return float(spec.payoff(spec.x0))
    engine = _pick_engine(spec, engine)
    if engine == "brute":
        return value_bruteforce(spec, f_grid, **budget)
    _require_g3(spec.payoff, engine)
    x = spec.x0
    y0 = x[:-1] - x[-1]
    if engine == "path":
        W, _, _ = _path_W(spec.panel, spec.payoff, y0, spec.m0.code, spec.steps, **budget)
        return W + float(x[-1])
    if engine == "lattice":
        W, _, _ = lattice_root(spec.panel, spec.payoff, y0, spec.steps, **budget)
        return float(W[spec.m0.code]) + float(x[-1])
    raise ValueError(f"unknown engine {engine!r}")


def value_bruteforce(spec: GameSpec, f_grid: float = 1e-3, **budget) -> float:
    if spec.steps == 0:
        return float(spec.payoff(spec.x0))
    table, _ = brute_root(spec.panel, spec.payoff, spec.x0, spec.m0.code, spec.steps, f_grid, **budget)
    return float(table[0])


def optimal_move(spec: GameSpec, engine: str = "auto", f_grid: float = 1e-3) -> tuple[float, float]:
    """Investor move attaining the value at the root, and the value."""
    if spec.steps == 0:
        raise ValueError("no move remains at ell = N")
    engine = _pick_engine(spec, engine)
    if engine == "brute":
        table, f = brute_root(spec.panel, spec.payoff, spec.x0, spec.m0.code, spec.steps, f_grid)
        return float(f[0]), float(table[0])
    _require_g3(spec.payoff, engine)
    x = spec.x0
    y0 = x[:-1] - x[-1]
    if engine == "path":
        _, a, b = _path_W(spec.panel, spec.payoff, y0, spec.m0.code, spec.steps)
    else:
        _, a_all, b_all = lattice_root(spec.panel, spec.payoff, y0, spec.steps)
        a, b = float(a_all[spec.m0.code]), float(b_all[spec.m0.code])
    v, f = g3_step(a, b)
    return f, v + float(x[-1])


def rescaled_values(panel: ExpertPanel, payoff: Payoff, N: int, x, t: float,
                    engine: str = "auto", f_grid: float = 1e-3, **budget) -> np.ndarray:
    """``u_N(x, t; m)`` for every state ``m``, indexed by code."""
    payoff = with_dimension(payoff, panel.n)
    x = np.asarray(x, dtype=float)
    ell = ell_from_t(N, t)
    if ell == N and payoff.g2:
        return np.full(panel.num_states, float(payoff(x)))
    sN = math.sqrt(N)
    X = sN * x
    T = N - ell
    spec0 = GameSpec(panel, payoff, N, X, HistoryState(panel.d, 0), ell)
    engine = _pick_engine(spec0, engine)
    if engine == "lattice" and T > 0:
        _require_g3(payoff, engine)
        W, _, _ = lattice_root(panel, payoff, X[:-1] - X[-1], T, **budget)
        return (W + X[-1]) / sN
    out = np.empty(panel.num_states)
    for c in range(panel.num_states):
        out[c] = value_exact(spec0.replace(m0=HistoryState(panel.d, c)), engine, f_grid, **budget)
    return out / sN


def rescaled_value(panel: ExpertPanel, payoff: Payoff, N: int, x, t: float, m=None,
                   which: str = "state", engine: str = "auto", **kw) -> float:
    """``u_N`` at one state, or the envelope ``u_N^+`` / ``u_N^-`` over all states."""
    vals = rescaled_values(panel, payoff, N, x, t, engine, **kw)
    if which == "state":
        if m is None:
            raise ValueError("which='state' needs m")
        return float(vals[as_state(m, panel.d).code])
    if which == "plus":
        return float(vals.max())
    if which == "minus":
        return float(vals.min())
    raise ValueError(f"which must be state, plus or minus, not {which!r}")


# ------------------------------------------------------------------- DPP


def _dpp_exact_rhs(spec: GameSpec, k: int, engine: str) -> float:
    xs, codes = _leaf_positions(spec.panel, spec.x0, spec.m0.code, k)
    leaf = np.array([
        value_exact(spec.replace(x0=xs[s], m0=HistoryState(spec.panel.d, int(codes[s])),
                                 ell=spec.ell + k), engine)
        for s in range(xs.shape[0])
    ])
    # investor terms come out of the leaves through (G3)
    W = leaf
    for _ in range(k):
        W = _kernels.g3_value(W[1::2], W[0::2])
    return float(W[0])


def dpp_check(spec: GameSpec, k: int, probes: int = 8, seed: int = 0, engine: str = "auto",
              f_grid: float = 1e-3) -> float:
    """Largest gap between ``V`` and its ``k``-step dynamic programming expansion.

    The probes perturb ``x0`` by standard normal noise and draw the start
    state at random.  The right-hand side evaluates ``V`` at day ``ell + k``
    on every length-``k`` market path and folds the outer min-max with the
    same engine.
    """
    if k < 1 or spec.ell + k > spec.N:
        raise ValueError("need 1 <= k <= N - ell")
    engine = _pick_engine(spec, engine)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        x = spec.x0 + rng.normal(size=spec.panel.n)
        m = HistoryState(spec.panel.d, int(rng.integers(spec.panel.num_states)))
        sp = spec.replace(x0=x, m0=m)
        if engine == "brute":
            lhs = value_bruteforce(sp, f_grid)
            K = _grid_count(f_grid)
            xs, codes = _leaf_positions(sp.panel, sp.x0, m.code, k)
            G0 = k * K
            tables = np.stack([
                brute_root(sp.panel, sp.payoff, xs[s], int(codes[s]), sp.steps - k, f_grid, G0=G0)[0]
                for s in range(xs.shape[0])
            ])
            rhs = float(_brute_fold(tables, k, K, 0)[0][0])
        else:
            lhs = value_exact(sp, engine)
            rhs = _dpp_exact_rhs(sp, k, engine)
        worst = max(worst, abs(lhs - rhs))
    return worst
