"""The local problem: k rounds of the game against a quadratic payoff.

For a symmetric ``X`` and positive ``p`` the local problem is::

    L = min_f1 max_b1 ... min_fk max_bk  eps^-1 sum_i b_i <p, d_i> + 1/2 <X Z, Z>

with ``d_i = q(m^i) - f_i 1`` and ``Z = sum_i b_i d_i``.  Its per-round
average tends to ``h_limit`` as ``k`` grows, whatever the starting state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .debruijn import HistoryState, as_state, successor_table
from .experts import ExpertPanel, compute_vartheta

TREE_MAX_DEPTH = 20
BRUTE_MAX_DEPTH = 5
LOCAL_MAX_CELLS = 1 << 26
DEGENERATE_TOL = 1e-12
DENOM_TOL = 1e-9


class DegenerateGradient(ValueError):
    pass


class DegenerateDenominator(ArithmeticError):
    pass


class DepthTooLarge(ValueError):
    pass


class PreconditionViolated(ValueError):
    def __init__(self, which: str, msg: str):
        super().__init__(f"condition {which} fails: {msg}")
        self.which = which


@dataclass(frozen=True, eq=False)
class HessianContext:
    X: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        p = np.array(self.p, dtype=float).reshape(-1)
        if X.shape != (p.size, p.size):
            raise ValueError("X must be n x n with n = len(p)")
        if not np.allclose(X, X.T, rtol=0, atol=1e-12):
            raise ValueError("X must be symmetric")
        if np.any(p <= 0):
            raise ValueError("p must be strictly positive")
        X.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size

    @property
    def gamma_p(self) -> float:
        return float(self.p.min())

    @property
    def opnorm_X(self) -> float:
        return float(np.linalg.norm(self.X, 2))


def random_context(n: int, rng: np.random.Generator, scale: float = 1.0) -> HessianContext:
    """Random symmetric ``X`` with operator norm about ``scale`` and ``p`` in ``[0.2, 1.2]``."""
    G = rng.normal(size=(n, n))
    X = 0.5 * (G + G.T)
    X *= scale / np.linalg.norm(X, 2)
    return HessianContext(X, rng.uniform(0.2, 1.2, size=n))


def _p_of(ctx_or_p) -> np.ndarray:
    return np.asarray(getattr(ctx_or_p, "p", ctx_or_p), dtype=float)


def xi(ctx_or_p, panel: ExpertPanel, m=None) -> np.ndarray:
    """``q(m) - <p, q(m)>/<p, 1> 1``; every state at once when ``m`` is None."""
    p = _p_of(ctx_or_p)
    s = float(p.sum())
    if s <= DEGENERATE_TOL:
        raise DegenerateGradient(f"<p, 1> = {s:.3g} is not positive")
    q = panel.table if m is None else panel.q(as_state(m, panel.d))
    return q - (q @ p / s)[..., None]


def zeta(ctx: HessianContext, panel: ExpertPanel) -> np.ndarray:
    """``1/2 <X xi(m), xi(m)>`` for every state."""
    z = xi(ctx, panel)
    return 0.5 * np.einsum("mi,ij,mj->m", z, ctx.X, z)


@dataclass(frozen=True, eq=False)
class HTable:
    k: int
    values: np.ndarray  # H_k(m) by state code
    deltas: np.ndarray  # H_k(m+) - H_k(m-) by state code

    def __getitem__(self, m) -> float:
        d = self.values.size.bit_length() - 1
        return float(self.values[as_state(m, d).code])


def _make_table(k: int, values: np.ndarray, succ: np.ndarray) -> HTable:
    return HTable(k, values, values[succ[:, 1]] - values[succ[:, 0]])


def h_tables(ctx: HessianContext, panel: ExpertPanel, k: int) -> list[HTable]:
    """Tables of depth ``0..k`` from the one-step recursion."""
    if k < 0:
        raise ValueError("k must be >= 0")
    succ = successor_table(panel.d)
    z = zeta(ctx, panel)
    H = np.zeros(panel.num_states)
    out = [_make_table(0, H, succ)]
    for j in range(1, k + 1):
        H = z + 0.5 * (H[succ[:, 1]] + H[succ[:, 0]])
        out.append(_make_table(j, H, succ))
    return out


def h_recursive(ctx: HessianContext, panel: ExpertPanel, k: int) -> HTable:
    return h_tables(ctx, panel, k)[-1]


def h_treesum(ctx: HessianContext, panel: ExpertPanel, m, k: int) -> float:
    """Weighted sum of ``zeta`` over the depth-``k`` tree rooted at ``m``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > TREE_MAX_DEPTH:
        raise DepthTooLarge(f"tree depth {k} exceeds {TREE_MAX_DEPTH}")
    m = as_state(m, panel.d)
    z = zeta(ctx, panel)
    succ = successor_table(panel.d)
    codes = np.array([m.code], dtype=np.int64)
    total = 0.0
    for level in range(k):
        total += z[codes].sum() / 2.0 ** level
        codes = succ[codes].reshape(-1)
    return float(total)


def h_limit(ctx: HessianContext, panel: ExpertPanel) -> float:
    """Per-round average ``2^-(d+1) sum_m <X xi(m), xi(m)>`` (states counted with multiplicity)."""
    return float(zeta(ctx, panel).sum() / 2.0 ** panel.d)


# ------------------------------------------------------- one-step min-max


def one_step_minmax(h1: Callable[[float], float], h2: Callable[[float], float], S, eps: float,
                    check_grid: float = 1e-3, tol: float = 1e-12) -> tuple[float, float]:
    """Solve ``min_{|f|<=1} max_b b h1(f) + eps (S(b) + h2(f))`` at the indifference point.

    ``S`` is a mapping or callable on ``{-1, +1}``.  The monotonicity
    conditions are checked on a grid of step ``check_grid`` (derivatives by
    secants between neighbouring grid points).
    """
    Sf = S if callable(S) else (lambda b: S[b])
    target = 0.5 * eps * (Sf(-1) - Sf(1))
    lo_v, hi_v = h1(-1.0), h1(1.0)
    if not lo_v > target > hi_v:
        raise PreconditionViolated("bracket", f"need h1(-1)={lo_v:.6g} > {target:.6g} > h1(1)={hi_v:.6g}")
    n = int(round(2.0 / check_grid))
    fs = np.linspace(-1.0, 1.0, n + 1)
    a = np.array([h1(f) for f in fs])
    c = np.array([h2(f) for f in fs])
    step = fs[1] - fs[0]
    slope = np.diff(a) / step + eps * np.abs(np.diff(c)) / step
    if np.any(slope >= 0):
        i = int(np.argmax(slope))
        raise PreconditionViolated("monotone", f"h1' + eps|h2'| = {slope[i]:.3g} >= 0 near f={fs[i]:.4f}")
    lo, hi = -1.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h1(mid) > target:
            lo = mid
        else:
            hi = mid
    f = 0.5 * (lo + hi)
    return f, eps * h2(f) + 0.5 * eps * (Sf(1) + Sf(-1))


# ------------------------------------------------------- brute-force L


def _tree(panel: ExpertPanel, m: HistoryState, k: int):
    """State codes per depth (children ``2i`` for ``b=-1`` and ``2i+1`` for ``b=+1``)."""
    succ = successor_table(panel.d)
    levels = [np.array([m.code], dtype=np.int64)]
    for _ in range(k):
        levels.append(succ[levels[-1]].reshape(-1))
    return levels


def _phi_window(ctx: HessianContext, panel: ExpertPanel, k: int) -> float:
    """Bound on the rescaled deviation ``(f - f_ref)/eps`` of the indifference move."""
    n = panel.n
    dH = max((float(np.abs(t.deltas).max()) for t in h_tables(ctx, panel, k)), default=0.0)
    return 2.0 * (4 * n * max(k - 1, 0) * ctx.opnorm_X + 0.5 * dH) / float(ctx.p.sum()) + 1.0


def local_bruteforce(ctx: HessianContext, panel: ExpertPanel, m, k: int, eps: float,
                     f_grid: float = 1e-3, window: float | None = None, max_doublings: int = 4,
                     max_cells: int = LOCAL_MAX_CELLS) -> float:
    """``L_{k,eps}(X, p, m)`` by search over a grid of investor moves.

    Moves are written ``f = f_ref(m) + eps * phi`` with
    ``f_ref = <p, q(m)>/<p, 1>``, and ``phi`` runs over multiples of
    ``f_grid`` in ``[-window, window]`` (and ``|f| <= 1``).  The large
    ``eps^-1`` term then becomes ``-<p, 1> sum b_i phi_i`` exactly.  The
    window is doubled when the optimal play touches its edge.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > BRUTE_MAX_DEPTH:
        raise DepthTooLarge(f"brute force depth {k} exceeds {BRUTE_MAX_DEPTH}")
    if f_grid < 1e-3 - 1e-15:
        raise ValueError("f_grid must be at least 1e-3")
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = as_state(m, panel.d)
    Phi = _phi_window(ctx, panel, k) if window is None else float(window)
    for _ in range(max_doublings + 1):
        value, hit = _local_grid(ctx, panel, m, k, eps, f_grid, Phi, max_cells)
        if not hit:
            return value
        Phi *= 2.0
    raise RuntimeError("optimal play keeps reaching the edge of the move window")


def _local_grid(ctx, panel, m, k, eps, f_grid, Phi, max_cells):
    K = int(math.ceil(Phi / f_grid))
    H = k * K
    if (1 << k) * (2 * H + 1) > max_cells:
        raise DepthTooLarge("local brute force exceeds the cell budget")
    p = ctx.p
    P1 = float(p.sum())
    fref = panel.table @ p / P1
    Xi = xi(ctx, panel)
    levels = _tree(panel, m, k)
    # Z0 = sum_i b_i xi(m^i) for each leaf path
    Z0 = np.zeros((1, panel.n))
    for codes in levels[:-1]:
        z = Xi[codes]
        Z0 = np.stack([Z0 - z, Z0 + z], axis=1).reshape(-1, panel.n)
    gam = np.arange(-H, H + 1) * f_grid
    X = ctx.X
    X1 = X.sum(axis=1)
    one_X_one = float(X1.sum())
    tables = np.empty((Z0.shape[0], 2 * H + 1))
    for s in range(Z0.shape[0]):
        z = Z0[s]
        # -<p,1> gamma + 1/2 <X (z - eps gamma 1), z - eps gamma 1>
        tables[s] = (-P1 * gam + 0.5 * float(z @ X @ z) - eps * gam * float(z @ X1)
                     + 0.5 * eps * eps * gam * gam * one_X_one)
    scale = max(1.0, float(np.abs(tables).max()))
    monotone = bool(np.all(np.diff(tables, axis=1) <= 1e-12 * scale))
    kern = _kernels.crossing_minmax if monotone else _kernels.exhaustive_minmax
    if not monotone and (1 << k) * (2 * H + 1) * (2 * K + 1) > 64 * max_cells:
        raise DepthTooLarge("payoff is not monotone in the investor offset; exhaustive search too large")

    args = [None] * k
    bounds = [None] * k
    for j in range(k - 1, -1, -1):
        Hc, Hp = (j + 1) * K, j * K
        codes = levels[j]
        nxt = np.empty((codes.size, 2 * Hp + 1))
        arg_j = np.empty((codes.size, 2 * Hp + 1), dtype=np.int64)
        bnd = np.empty((codes.size, 2), dtype=np.int64)
        for i, c in enumerate(codes):
            lo = max(-K, int(math.ceil((-1.0 - fref[c]) / eps / f_grid - 1e-9)))
            hi = min(K, int(math.floor((1.0 - fref[c]) / eps / f_grid + 1e-9)))
            if lo > hi:
                raise ValueError("empty move window")
            nxt[i], arg_j[i] = kern(np.ascontiguousarray(tables[2 * i + 1]),
                                    np.ascontiguousarray(tables[2 * i]), Hc, Hp, lo, hi)
            bnd[i] = (lo, hi)
        args[j] = arg_j
        bounds[j] = bnd
        tables = nxt
    value = float(tables[0, 0])

    # walk the optimal play for every market path; flag moves on a window edge
    hit = False
    kappa = np.zeros(1, dtype=np.int64)
    for j in range(k):
        Hp = j * K
        phi = args[j][np.arange(kappa.size), kappa + Hp]
        edge = ((phi == -K) & (bounds[j][:, 0] == -K)) | ((phi == K) & (bounds[j][:, 1] == K))
        hit = hit or bool(np.any(edge))
        kappa = np.stack([kappa - phi, kappa + phi], axis=1).reshape(-1)
    return value, hit


# --------------------------------------------------- indifference play


@dataclass(frozen=True)
class IndifferenceResult:
    value: float  # worst case over market paths of the local objective
    max_abs_phi: float
    clamps: int


def indifference_value(ctx: HessianContext, panel: ExpertPanel, m, k: int, eps: float) -> IndifferenceResult:
    """Local objective when the investor plays the indifference move every round.

    Round ``i`` uses ``f_i = f_ref + eps phi_i`` with::

        phi_i = (sum_{j<i} b_j <X xi(m^i), d_j> + (H_{k-i}(m^i_+) - H_{k-i}(m^i_-))/2) / h_i
        h_i   = <p, 1> + eps sum_{j<i} b_j <X 1, d_j>

    which is the exact indifference point of each round up to the error
    made by replacing the continuation value with ``H``.  The market is
    played exhaustively, so the result is the exact payoff of this investor
    strategy and bounds ``L`` from above.  An approximation, not a ground
    truth.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > TREE_MAX_DEPTH + 4:
        raise DepthTooLarge(f"indifference evaluation depth {k} too large")
    m = as_state(m, panel.d)
    n = panel.n
    p = ctx.p
    P1 = float(p.sum())
    X = ctx.X
    X1 = X.sum(axis=1)
    fref = panel.table @ p / P1
    Xi = xi(ctx, panel)
    tabs = h_tables(ctx, panel, k)
    succ = successor_table(panel.d)

    codes = np.array([m.code], dtype=np.int64)
    Z = np.zeros((1, n))  # sum_j b_j d_j so far
    lin = np.zeros(1)  # sum_j b_j phi_j
    clamps = 0
    max_phi = 0.0
    for i in range(1, k + 1):
        H = tabs[k - i]
        h = P1 + eps * (Z @ X1)
        if np.any(np.abs(h) <= DENOM_TOL):
            raise DegenerateDenominator("indifference denominator vanished")
        num = np.einsum("sn,nk,sk->s", Xi[codes], X, Z) + 0.5 * H.deltas[codes]
        phi = num / h
        lo = (-1.0 - fref[codes]) / eps
        hi = (1.0 - fref[codes]) / eps
        clipped = np.clip(phi, lo, hi)
        clamps += int(np.count_nonzero(clipped != phi))
        phi = clipped
        max_phi = max(max_phi, float(np.abs(phi).max()))
        d = Xi[codes] - eps * phi[:, None]
        Z = np.stack([Z - d, Z + d], axis=1).reshape(-1, n)
        lin = np.stack([lin - phi, lin + phi], axis=1).reshape(-1)
        codes = succ[codes].reshape(-1)
    obj = -P1 * lin + 0.5 * np.einsum("sn,nk,sk->s", Z, X, Z)
    return IndifferenceResult(float(obj.max()), max_phi, clamps)


# ------------------------------------------------------------- cell gap


@dataclass(frozen=True)
class CellGap:
    lhs: float  # |L/k - h_limit|
    bound_shape: float  # d/k + ||X|| k eps / gamma_p
    value: float  # L itself
    regime_ratio: float  # ||X|| k eps / (vartheta_q gamma_p)
    method: str


def cell_gap(ctx: HessianContext, panel: ExpertPanel, m, k: int, eps: float,
             f_grid: float = 1e-3, method: str = "auto") -> CellGap:
    """Gap between the per-round local value and ``h_limit``, with the shape of its bound."""
    if k < panel.d + 1:
        raise ValueError(f"need k >= d + 1 = {panel.d + 1}")
    if method == "auto":
        method = "brute" if k <= BRUTE_MAX_DEPTH else "indifference"
    if method == "brute":
        L = local_bruteforce(ctx, panel, m, k, eps, f_grid)
    elif method == "indifference":
        L = indifference_value(ctx, panel, m, k, eps).value
    else:
        raise ValueError(f"unknown method {method!r}")
    theta = compute_vartheta(panel)
    ratio = ctx.opnorm_X * k * eps / (theta * ctx.gamma_p) if theta > 0 else float("inf")
    shape = panel.d / k + ctx.opnorm_X * k * eps / ctx.gamma_p
    return CellGap(abs(L / k - h_limit(ctx, panel)), shape, L, ratio, method)
