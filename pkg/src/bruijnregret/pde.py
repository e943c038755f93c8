"""Continuum limit under the translation property.

With ``y = (x_1 - x_n, ..., x_{n-1} - x_n)`` the limit value is::

    u(x, t) = h(y, t) + mean(x),    h(y, t) = E[gbar(y + G)],  G ~ N(0, 2 (1 - t) A)

where ``gbar(y) = g(R^-1 (y, 0))`` and ``A`` is the r-covariance of the
panel.  ``h`` solves ``h_t + tr(A D^2 h) = 0`` with ``h(., 1) = gbar``.

Quadrature.  Write ``G = S z`` with ``S = sqrt(2(1-t)) A^(1/2)``.  For
payoffs that are a maximum of affine pieces:

* ``line``: rotate ``z`` by a fixed orthogonal ``Q`` and integrate exactly
  along the last rotated axis (the integrand is piecewise linear there);
  the remaining axes use tensor Gauss-Hermite nodes.  Exact for two experts.
* ``polar`` (three experts, pieces through a common apex, e.g. max): the
  integrand is homogeneous about the apex ``z*``, so in polar coordinates
  centred there the radial integral has a closed form and the angular one
  is smooth between known breakpoints (Gauss-Legendre per arc).

Smooth payoffs use plain tensor Gauss-Hermite, and five or more experts use
seeded Monte Carlo.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfcx, ndtr, roots_hermitenorm, roots_legendre

from .experts import ELLIPTIC_TOL, ExpertPanel, compute_A, smallest_eigenvalue
from .local import DegenerateGradient, xi
from .payoff import Payoff, with_dimension

QUAD_TOL = 1e-8
DEFAULT_ORDER = 64
MAX_NODES = 1 << 22
MC_SAMPLES = 1_000_000
FD_REL_STEP = 1e-4
GRAD_TOL = 1e-9
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class SingularDiffusion(ValueError):
    pass


class QuadratureNotConverged(RuntimeError):
    pass


# ------------------------------------------------------------ coordinates


@dataclass(frozen=True, eq=False)
class CoordinateMap:
    """``y = R x`` with ``y_i = x_i - x_n`` (``i < n``) and ``y_n = sum(x)``."""

    n: int
    R: np.ndarray = field(init=False)
    Rinv: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.n
        if n < 2:
            raise ValueError("n must be >= 2")
        R = np.zeros((n, n))
        R[: n - 1, : n - 1] = np.eye(n - 1)
        R[: n - 1, n - 1] = -1.0
        R[n - 1, :] = 1.0
        Rinv = np.empty((n, n))
        Rinv[:, : n - 1] = -1.0 / n
        Rinv[: n - 1, : n - 1] += np.eye(n - 1)
        Rinv[:, n - 1] = 1.0 / n
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Rinv", Rinv)

    @property
    def M(self) -> np.ndarray:
        """``x = M y`` for ``(y, 0)``: the map used inside ``gbar``."""
        return self.Rinv[:, : self.n - 1]

    @property
    def D(self) -> np.ndarray:
        """Difference rows ``R[:n-1]``: ``y = D x``."""
        return self.R[: self.n - 1]

    def to_y(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.R.T

    def to_x(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.Rinv.T


# ------------------------------------------------------------ heat kernel


def _check_elliptic(A: np.ndarray) -> float:
    lam = smallest_eigenvalue(A)
    if lam <= ELLIPTIC_TOL:
        raise SingularDiffusion(f"smallest eigenvalue of A is {lam:.3g}")
    return lam


def heat_kernel(A, y, t: float) -> float | np.ndarray:
    """Gaussian density with covariance ``2 t A`` in the dimension of ``y``.

    Accepts a stack of points (last axis is the coordinate).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if t <= 0:
        raise ValueError("t must be positive")
    _check_elliptic(A)
    y = np.asarray(y, dtype=float)
    k = A.shape[0]
    Ainv = np.linalg.inv(A)
    quad = np.einsum("...i,ij,...j->...", y, Ainv, y)
    out = np.exp(-quad / (4.0 * t)) / ((4.0 * np.pi * t) ** (k / 2.0) * math.sqrt(np.linalg.det(A)))
    return float(out) if np.ndim(out) == 0 else out


def gh_rule(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite rule for the standard normal in ``dim`` dimensions."""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = roots_hermitenorm(order)
    w = w / w.sum()
    nodes = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    weights = np.ones(1)
    for _ in range(dim):
        weights = np.multiply.outer(weights, w).reshape(-1)
    return nodes, weights


def _sym_sqrt(A: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(A)
    return (V * np.sqrt(np.maximum(lam, 0.0))) @ V.T


def _phi(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    fin = np.isfinite(v)
    out[fin] = _INV_SQRT_2PI * np.exp(-0.5 * v[fin] ** 2)
    return out


def _radial(a: np.ndarray, zz: float, m: int) -> np.ndarray:
    """``exp(-|z*|^2/2) int_0^inf r^m exp(-r a - r^2/2) dr`` with ``a = <z*, theta>``.

    Written as ``exp(-(|z*|^2 - a^2)/2) int_a^inf (v - a)^m exp(-v^2/2) dv``.
    For ``a <= 0`` every term of the binomial expansion is nonnegative; for
    ``a > 0`` the factor ``exp(-a^2/2)`` is pulled out through ``erfcx``.
    """
    a = np.asarray(a, dtype=float)
    neg = a <= 0
    out = np.empty_like(a)
    if np.any(neg):
        an = a[neg]
        e = np.exp(-0.5 * an * an)
        J = [math.sqrt(2 * math.pi) * ndtr(-an), e]
        for j in range(2, m + 1):
            J.append(an ** (j - 1) * e + (j - 1) * J[j - 2])
        I = sum(math.comb(m, i) * (-an) ** (m - i) * J[i] for i in range(m + 1))
        out[neg] = np.exp(-0.5 * (zz - an * an)) * I
    if np.any(~neg):
        ap = a[~neg]
        J = [math.sqrt(0.5 * math.pi) * erfcx(ap / math.sqrt(2.0)), np.ones_like(ap)]
        for j in range(2, m + 1):
            J.append(ap ** (j - 1) + (j - 1) * J[j - 2])
        K = sum(math.comb(m, i) * (-ap) ** (m - i) * J[i] for i in range(m + 1))
        out[~neg] = math.exp(-0.5 * zz) * K
    return out


# --------------------------------------------------------------- solution


@dataclass
class _QuadResult:
    value: float
    grad: np.ndarray  # E[grad gbar], shape (k,)
    zmoment: np.ndarray  # E[grad gbar z^T], shape (k, k)


class PdeSolution:
    """Evaluator for ``u``, ``h`` and their derivatives.

    ``order`` is the starting Gauss-Hermite order per axis; it doubles until
    two successive orders agree to ``tol``.
    """

    def __init__(self, panel: ExpertPanel, payoff: Payoff, order: int = DEFAULT_ORDER,
                 tol: float = QUAD_TOL, mc_samples: int = MC_SAMPLES, seed: int = 0,
                 max_nodes: int = MAX_NODES):
        payoff = with_dimension(payoff, panel.n)
        if not payoff.g3:
            raise ValueError("the representation formula needs a payoff with the translation property")
        self.panel = panel
        self.payoff = payoff
        self.n = panel.n
        self.k = panel.n - 1
        self.A = compute_A(panel)
        self.lambda_min = _check_elliptic(self.A)
        self.sqrtA = _sym_sqrt(self.A)
        self.coords = CoordinateMap(panel.n)
        self.order = int(order)
        self.tol = float(tol)
        self.mc_samples = int(mc_samples)
        self.seed = int(seed)
        self.max_nodes = int(max_nodes)
        self.last_error = 0.0
        self.last_order = 0
        if payoff.pieces is not None:
            C, c0 = payoff.pieces
            self._CM = np.asarray(C, dtype=float) @ self.coords.M
            self._c0 = np.asarray(c0, dtype=float)
            self._Q = self._pick_rotation()
        else:
            self._CM = None
        if self.k >= 4:
            self.method = "mc"
        elif self._CM is None:
            self.method = "gh"
        elif self.k == 2 and np.all(self._c0 == 0.0):
            self.method = "polar"
        else:
            self.method = "line"

    # -- setup

    def _pick_rotation(self, tries: int = 64) -> np.ndarray:
        """Rotation whose last axis separates the slopes of all distinct pieces best."""
        k = self.k
        if k == 1:
            return np.ones((1, 1))
        CM = self._CM
        pairs = [(i, j) for i, j in itertools.combinations(range(len(CM)), 2)
                 if not np.allclose(CM[i], CM[j], rtol=0, atol=1e-14)]
        rng = np.random.default_rng(12345)
        best, best_sep = None, -1.0
        for _ in range(tries):
            Q, Rm = np.linalg.qr(rng.normal(size=(k, k)))
            Q = Q * np.sign(np.diag(Rm))
            b = CM @ (self.sqrtA @ Q[:, -1])
            sep = min((abs(b[i] - b[j]) for i, j in pairs), default=1.0)
            if sep > best_sep:
                best, best_sep = Q, sep
        return best

    def gbar(self, y) -> np.ndarray | float:
        """``g(R^-1 (y, 0))``."""
        return self.payoff(np.asarray(y, dtype=float) @ self.coords.M.T)

    # -- line integration for max-of-affine payoffs

    def _line(self, y: np.ndarray, s: float, order: int) -> _QuadResult:
        k = self.k
        S = s * self.sqrtA
        Q = self._Q
        u, wts = gh_rule(order, k - 1)
        zb = u @ Q[:, :-1].T  # (U, k)
        CM, c0 = self._CM, self._c0
        a = (y[None, :] + zb @ S.T) @ CM.T + c0[None, :]  # (U, J)
        b = CM @ (S @ Q[:, -1])  # (J,)
        J = b.size
        scale = max(1.0, float(np.abs(b).max()))
        pairs = [(i, j) for i, j in itertools.combinations(range(J), 2)
                 if abs(b[i] - b[j]) > 1e-14 * scale]
        U = a.shape[0]
        if pairs:
            ii = np.array([p[0] for p in pairs])
            jj = np.array([p[1] for p in pairs])
            bp = (a[:, ii] - a[:, jj]) / (b[jj] - b[ii])[None, :]
            bp.sort(axis=1)
        else:
            bp = np.zeros((U, 0))
        inf = np.full((U, 1), np.inf)
        edges = np.concatenate([-inf, bp, inf], axis=1)
        lo, hi = edges[:, :-1], edges[:, 1:]
        flo, fhi = np.isfinite(lo), np.isfinite(hi)
        with np.errstate(invalid="ignore"):
            mid = np.where(flo & fhi, 0.5 * (lo + hi),
                           np.where(flo, lo + 1.0, np.where(fhi, hi - 1.0, 0.0)))
        vals = a[:, None, :] + b[None, None, :] * mid[:, :, None]
        js = np.argmax(vals, axis=2)  # (U, I)
        alpha = np.take_along_axis(a, js, axis=1)
        beta = b[js]
        P0 = ndtr(hi) - ndtr(lo)
        P1 = _phi(lo) - _phi(hi)
        E = (alpha * P0 + beta * P1).sum(axis=1)
        value = float(wts @ E)
        G = CM[js]  # (U, I, k)
        grad = np.einsum("u,ui,uik->k", wts, P0, G)
        # E[G z^T] with z = zb + Q[:, -1] w
        zm = (np.einsum("u,ui,uik,ul->kl", wts, P0, G, zb)
              + np.outer(np.einsum("u,ui,uik->k", wts, P1, G), Q[:, -1]))
        return _QuadResult(value, grad, zm)

    # -- polar integration about the apex (two difference coordinates)

    def _polar_arcs(self, W: np.ndarray) -> np.ndarray:
        """Arc endpoints in ``[0, 2 pi]`` where the active piece can change."""
        ang = [0.0, 2 * math.pi]
        for i, j in itertools.combinations(range(len(W)), 2):
            d = W[i] - W[j]
            if np.hypot(*d) <= 1e-14 * max(1.0, float(np.abs(W).max())):
                continue
            base = math.atan2(d[1], d[0]) + 0.5 * math.pi
            ang += [base % (2 * math.pi), (base + math.pi) % (2 * math.pi)]
        return np.unique(np.array(ang))

    def _polar_pass(self, zs: np.ndarray, W: np.ndarray, arcs: np.ndarray, order: int):
        x, w = roots_legendre(order)
        lo, hi = arcs[:-1], arcs[1:]
        half = 0.5 * (hi - lo)
        psi = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]  # (arcs, order)
        wt = half[:, None] * w[None, :]
        mid = 0.5 * (hi + lo)
        act = np.argmax(W @ np.stack([np.cos(mid), np.sin(mid)]), axis=0)  # active piece per arc
        th = np.stack([np.cos(psi), np.sin(psi)], axis=-1)  # (arcs, order, 2)
        a = th @ zs
        zz = float(zs @ zs)
        R1 = _radial(a, zz, 1)
        R2 = _radial(a, zz, 2)
        slope = np.einsum("aok,ak->ao", th, W[act])
        value = float((wt * slope * R2).sum()) / (2 * math.pi)
        prob = (wt * R1).sum(axis=1) / (2 * math.pi)  # per arc
        grad = prob @ self._CM[act]
        # E[1_arc z] = int (z* R1 + theta R2)
        mz = (np.einsum("ao,ao->a", wt, R1)[:, None] * zs[None, :]
              + np.einsum("ao,ao,aok->ak", wt, R2, th)) / (2 * math.pi)
        zmoment = self._CM[act].T @ mz
        return _QuadResult(value, grad, zmoment)

    def _polar(self, y: np.ndarray, s: float) -> _QuadResult:
        S = s * self.sqrtA
        zs = -np.linalg.solve(S, y)  # apex of the cone in z
        W = self._CM @ S
        arcs = self._polar_arcs(W)
        order = 32
        prev = self._polar_pass(zs, W, arcs, order)
        while True:
            order *= 2
            if order > 8192:
                raise QuadratureNotConverged("angular quadrature did not converge")
            cur = self._polar_pass(zs, W, arcs, order)
            err = abs(cur.value - prev.value) + float(np.abs(cur.grad - prev.grad).max())
            if err <= 1e-13 * max(1.0, abs(cur.value)):
                self.last_error, self.last_order = err, order
                return cur
            prev = cur

    def _gh(self, y: np.ndarray, s: float, order: int) -> float:
        z, w = gh_rule(order, self.k)
        pts = y[None, :] + s * z @ self.sqrtA.T
        return float(w @ np.asarray(self.gbar(pts)))

    def _mc(self, y: np.ndarray, s: float) -> tuple[float, float]:
        rng = np.random.default_rng(self.seed)
        z = rng.standard_normal((self.mc_samples, self.k))
        vals = np.asarray(self.gbar(y[None, :] + s * z @ self.sqrtA.T))
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))

    def _converged(self, fn: Callable[[int], object], key: Callable[[object], float], dims: int):
        order = self.order
        prev = fn(order)
        while True:
            nxt_order = 2 * order
            if nxt_order ** dims > self.max_nodes:
                raise QuadratureNotConverged(
                    f"order {order} did not reach tolerance {self.tol:g} within the node budget")
            cur = fn(nxt_order)
            err = abs(key(cur) - key(prev))
            if err <= self.tol:
                self.last_error, self.last_order = err, nxt_order
                return cur
            prev, order = cur, nxt_order

    def _line_converged(self, y: np.ndarray, s: float) -> _QuadResult:
        if self.method == "polar":
            return self._polar(y, s)
        if self.k == 1:
            self.last_error, self.last_order = 0.0, 0
            return self._line(y, s, 1)
        return self._converged(lambda o: self._line(y, s, o), lambda r: r.value, self.k - 1)

    # -- evaluators

    def _s(self, t: float) -> float:
        if t > 1.0:
            raise ValueError("t must be at most 1")
        return math.sqrt(2.0 * (1.0 - t))

    def evaluate_h(self, y, t: float) -> float:
        y = np.asarray(y, dtype=float).reshape(self.k)
        if t == 1.0:
            self.last_error = 0.0
            return float(self.gbar(y))
        s = self._s(t)
        if self.method in ("line", "polar"):
            return self._line_converged(y, s).value
        if self.method == "gh":
            return self._converged(lambda o: self._gh(y, s, o), float, self.k)
        val, se = self._mc(y, s)
        self.last_error = se
        return val

    def evaluate_u(self, x, t: float) -> float:
        x = np.asarray(x, dtype=float).reshape(self.n)
        if t == 1.0:
            return float(self.payoff(x))
        y = x[:-1] - x[-1]
        return self.evaluate_h(y, t) + float(x.mean())

    def grad_h(self, y, t: float) -> np.ndarray:
        """Gradient of ``h`` in ``y``: exact for piecewise affine payoffs, else central differences."""
        y = np.asarray(y, dtype=float).reshape(self.k)
        if self.method in ("line", "polar") and t < 1.0:
            return self._line_converged(y, self._s(t)).grad
        out = np.empty(self.k)
        for i in range(self.k):
            dy = np.zeros(self.k)
            dy[i] = FD_REL_STEP * max(1.0, abs(y[i]))
            out[i] = (self.evaluate_h(y + dy, t) - self.evaluate_h(y - dy, t)) / (2 * dy[i])
        return out

    def _h_derivatives_fd(self, y: np.ndarray, t: float):
        k = self.k
        steps = FD_REL_STEP * np.maximum(1.0, np.abs(y))
        h0 = self.evaluate_h(y, t)
        grad = np.empty(k)
        hess = np.empty((k, k))
        for i in range(k):
            e = np.zeros(k)
            e[i] = steps[i]
            hp, hm = self.evaluate_h(y + e, t), self.evaluate_h(y - e, t)
            grad[i] = (hp - hm) / (2 * steps[i])
            if self.method not in ("line", "polar"):
                hess[i, i] = (hp - 2 * h0 + hm) / steps[i] ** 2
        if self.method in ("line", "polar"):
            # central differences of the exact gradient
            for i in range(k):
                e = np.zeros(k)
                e[i] = steps[i]
                hess[:, i] = (self.grad_h(y + e, t) - self.grad_h(y - e, t)) / (2 * steps[i])
        else:
            for i, j in itertools.combinations(range(k), 2):
                ei = np.zeros(k)
                ej = np.zeros(k)
                ei[i], ej[j] = steps[i], steps[j]
                v = (self.evaluate_h(y + ei + ej, t) - self.evaluate_h(y + ei - ej, t)
                     - self.evaluate_h(y - ei + ej, t) + self.evaluate_h(y - ei - ej, t))
                hess[i, j] = hess[j, i] = v / (4 * steps[i] * steps[j])
        hess = 0.5 * (hess + hess.T)
        dt = min(1e-4, (1.0 - t) / 4.0)
        ht = (self.evaluate_h(y, t + dt) - self.evaluate_h(y, t - dt)) / (2 * dt)
        return grad, hess, ht

    def _h_derivatives_quad(self, y: np.ndarray, t: float):
        if self.method not in ("line", "polar"):
            raise ValueError("differentiated quadrature needs a piecewise affine payoff")
        s = self._s(t)
        r = self._line_converged(y, s)
        S = s * self.sqrtA
        # Gaussian integration by parts: D^2 h = E[grad gbar z^T] S^-1
        hess = r.zmoment @ np.linalg.inv(S)
        hess = 0.5 * (hess + hess.T)
        # h_t = s'(t) E[<grad gbar, A^(1/2) z>] with s' = -1/s
        ht = -np.trace(self.sqrtA @ r.zmoment.T) / s
        return r.grad, hess, ht

    def derivatives(self, x, t: float, mode: str = "fd"):
        """``(grad u, hess u, u_t)`` at ``(x, t)`` for ``t < 1``.

        ``mode='fd'`` uses central differences (the Hessian differentiates
        the exact gradient when the payoff is piecewise affine);
        ``mode='quadrature'`` differentiates under the integral.
        """
        if t >= 1.0:
            raise ValueError("derivatives need t < 1")
        x = np.asarray(x, dtype=float).reshape(self.n)
        y = x[:-1] - x[-1]
        if mode == "fd":
            gh, Hh, ht = self._h_derivatives_fd(y, t)
        elif mode == "quadrature":
            gh, Hh, ht = self._h_derivatives_quad(y, t)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        Dm = self.coords.D
        grad = Dm.T @ gh + 1.0 / self.n
        hess = Dm.T @ Hh @ Dm
        return grad, hess, float(ht)

    def gradient(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.n)
        return self.coords.D.T @ self.grad_h(x[:-1] - x[-1], t) + 1.0 / self.n

    def h0(self, y_prime, s: float) -> float:
        """Height of the level set ``{gbar = s}`` above ``y_prime`` (closed form under translation)."""
        y_prime = np.asarray(y_prime, dtype=float).reshape(self.k)
        return -self.n * float(self.gbar(y_prime)) + self.n * s

    def gbar_full(self, y) -> float:
        """``g(R^-1 y)`` for a full ``n``-vector ``y``."""
        return float(self.payoff(self.coords.to_x(y)))


# ------------------------------------------------------------- residuals


def _derivs_of(phi, x, t):
    if hasattr(phi, "derivatives"):
        return phi.derivatives(x, t)
    return phi(x, t)


def operator_residual(phi, x, t: float, panel: ExpertPanel) -> float:
    """``phi_t + 2^-(d+1) sum_m <D^2 phi xi(m), xi(m)>`` with ``xi`` taken at ``grad phi``.

    ``phi`` is a :class:`PdeSolution` or a callable returning
    ``(grad, hess, phi_t)``.
    """
    grad, hess, ut = _derivs_of(phi, x, t)
    s = float(np.sum(grad))
    if s <= GRAD_TOL:
        raise DegenerateGradient(f"<grad phi, 1> = {s:.3g}")
    z = xi(grad, panel)
    return float(ut + np.einsum("mi,ij,mj->", z, hess, z) / 2.0 ** (panel.d + 1))


def heat_residual(phi, x, t: float, panel: ExpertPanel) -> float:
    """``u_t + 2^-(d+1) sum_m <D^2 u q(m), q(m)>``, the linear form valid under translation."""
    grad, hess, ut = _derivs_of(phi, x, t)
    q = panel.table
    return float(ut + np.einsum("mi,ij,mj->", q, hess, q) / 2.0 ** (panel.d + 1))


def two_expert_residual(phi, x, t: float, panel: ExpertPanel) -> float:
    """``u_t + C# <D^2 u p_perp, p_perp> / <p, 1>^2`` with ``p = grad u`` (two experts only)."""
    if panel.n != 2:
        raise ValueError("two experts only")
    grad, hess, ut = _derivs_of(phi, x, t)
    s = float(grad.sum())
    if s <= GRAD_TOL:
        raise DegenerateGradient(f"<grad phi, 1> = {s:.3g}")
    c_sharp = float(((panel.table[:, 1] - panel.table[:, 0]) ** 2).sum() / 2.0 ** (panel.d + 1))
    perp = np.array([-grad[1], grad[0]])
    return float(ut + c_sharp * perp @ hess @ perp / s ** 2)


# --------------------------------------------------------- Monte Carlo oracle


def monte_carlo_u(panel: ExpertPanel, payoff: Payoff, x, t: float, samples: int = MC_SAMPLES,
                  seed: int = 0) -> tuple[float, float]:
    """Independent estimate of ``u(x, t) = E[g(x + M G)]`` with ``G = L z``, ``L L^T = 2(1-t)A``.

    Returns the mean and its standard error.
    """
    payoff = with_dimension(payoff, panel.n)
    x = np.asarray(x, dtype=float)
    A = compute_A(panel)
    _check_elliptic(A)
    L = np.linalg.cholesky(2.0 * (1.0 - t) * A) if t < 1 else np.zeros_like(A)
    M = CoordinateMap(panel.n).M
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, panel.n - 1))
    vals = np.asarray(payoff(x[None, :] + (z @ L.T) @ M.T))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))
