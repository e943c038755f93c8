"""Hot inner loops, each with a numba version and a numpy version.

The public names at the bottom dispatch on :data:`bruijnregret._accel.USE_NUMBA`.
Both versions perform the same floating point operations in the same order,
so results agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------- g3 step
#
# min over |f| <= 1 of max(a - f, b + f).  Closed form: (a + b)/2 when
# |a - b| <= 2, else max(a, b) - 1.


@njit
def _g3_value_nb(a, b):
    diff = a - b
    if diff > 2.0:
        return a - 1.0
    if diff < -2.0:
        return b - 1.0
    return 0.5 * (a + b)


def _g3_value_np(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    return np.where(diff > 2.0, a - 1.0, np.where(diff < -2.0, b - 1.0, 0.5 * (a + b)))


# ------------------------------------------------------- lattice engine level


@njit
def _lattice_level_nb(W_next, succ_minus, succ_plus, qn, base, off):
    M = W_next.shape[0]
    L = base.shape[0]
    out = np.empty((M, L))
    for s in range(M):
        sp = succ_plus[s]
        sm = succ_minus[s]
        o = off[s]
        q = qn[s]
        for i in range(L):
            a = W_next[sp, base[i] + o] + q
            b = W_next[sm, base[i] - o] - q
            out[s, i] = _g3_value_nb(a, b)
    return out


def _lattice_level_np(W_next, succ_minus, succ_plus, qn, base, off):
    a = W_next[succ_plus[:, None], base[None, :] + off[:, None]] + qn[:, None]
    b = W_next[succ_minus[:, None], base[None, :] - off[:, None]] - qn[:, None]
    return _g3_value_np(a, b)


# --------------------------------------------------- grid min-max (brute DP)
#
# Child tables Vp, Vm are indexed by c in [-Hc, Hc] (stored at c + Hc).
# For c in [-Hp, Hp] compute min over phi in [lo, hi] of
# max(Vp[c + phi], Vm[c - phi]) and the minimizing phi.


@njit
def _crossing_minmax_nb(Vp, Vm, Hc, Hp, lo, hi):
    L = 2 * Hp + 1
    val = np.empty(L)
    arg = np.empty(L, dtype=np.int64)
    for k in range(L):
        c = k - Hp
        # smallest phi with Vm[c - phi] >= Vp[c + phi]
        a = lo
        b = hi + 1
        while a < b:
            mid = (a + b) // 2
            if Vm[c - mid + Hc] >= Vp[c + mid + Hc]:
                b = mid
            else:
                a = mid + 1
        best_phi = a
        if a > hi:
            best_phi = hi
            best = Vp[c + hi + Hc]
        else:
            best = Vm[c - a + Hc]
            if a > lo:
                left = Vp[c + a - 1 + Hc]
                if left < best:
                    best = left
                    best_phi = a - 1
        val[k] = best
        arg[k] = best_phi
    return val, arg


def _crossing_minmax_np(Vp, Vm, Hc, Hp, lo, hi):
    c = np.arange(-Hp, Hp + 1)
    a = np.full(c.shape, lo, dtype=np.int64)
    b = np.full(c.shape, hi + 1, dtype=np.int64)
    active = a < b
    while np.any(active):
        mid = (a + b) // 2
        midc = np.minimum(mid, hi)
        ok = Vm[c - midc + Hc] >= Vp[c + midc + Hc]
        b = np.where(active & ok, mid, b)
        a = np.where(active & ~ok, mid + 1, a)
        active = a < b
    over = a > hi
    ac = np.minimum(a, hi)
    best = np.where(over, Vp[c + hi + Hc], Vm[c - ac + Hc])
    phi = np.where(over, hi, ac)
    has_left = (~over) & (a > lo)
    leftc = np.maximum(ac - 1, lo)
    left = Vp[c + leftc + Hc]
    take = has_left & (left < best)
    best = np.where(take, left, best)
    phi = np.where(take, leftc, phi)
    return best.astype(float), phi.astype(np.int64)


@njit
def _exhaustive_minmax_nb(Vp, Vm, Hc, Hp, lo, hi):
    L = 2 * Hp + 1
    val = np.empty(L)
    arg = np.empty(L, dtype=np.int64)
    for k in range(L):
        c = k - Hp
        best = np.inf
        best_phi = lo
        for phi in range(lo, hi + 1):
            x = Vp[c + phi + Hc]
            y = Vm[c - phi + Hc]
            m = x if x > y else y
            if m < best:
                best = m
                best_phi = phi
        val[k] = best
        arg[k] = best_phi
    return val, arg


def _exhaustive_minmax_np(Vp, Vm, Hc, Hp, lo, hi, chunk=2048):
    c = np.arange(-Hp, Hp + 1)
    phis = np.arange(lo, hi + 1)
    val = np.empty(c.shape)
    arg = np.empty(c.shape, dtype=np.int64)
    for start in range(0, len(c), chunk):
        cc = c[start:start + chunk, None]
        m = np.maximum(Vp[cc + phis + Hc], Vm[cc - phis + Hc])
        j = np.argmin(m, axis=1)
        val[start:start + chunk] = m[np.arange(len(j)), j]
        arg[start:start + chunk] = phis[j]
    return val, arg


# ----------------------------------------------------------------- dispatch

if USE_NUMBA:
    lattice_level = _lattice_level_nb
    crossing_minmax = _crossing_minmax_nb
    exhaustive_minmax = _exhaustive_minmax_nb
else:
    lattice_level = _lattice_level_np
    crossing_minmax = _crossing_minmax_np
    exhaustive_minmax = _exhaustive_minmax_np

g3_value = _g3_value_np

NUMBA_KERNELS = {
    "lattice_level": _lattice_level_nb,
    "crossing_minmax": _crossing_minmax_nb,
    "exhaustive_minmax": _exhaustive_minmax_nb,
}
NUMPY_KERNELS = {
    "lattice_level": _lattice_level_np,
    "crossing_minmax": _crossing_minmax_np,
    "exhaustive_minmax": _exhaustive_minmax_np,
}
