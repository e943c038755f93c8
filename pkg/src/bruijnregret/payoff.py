"""Payoff functions and numerical audits of their structural properties.

Flags carried by a :class:`Payoff`:

* ``g1_theta`` -- strict increase, ``g(x+v) >= g(x) + theta <v, 1>`` for ``v >= 0``
* ``g2`` -- positive homogeneity, ``g(s x) = s g(x)`` for ``s > 0``
* ``g3`` -- translation, ``g(x + s 1) = g(x) + s``

The max payoff is shipped with ``g1_theta=None``: raising a coordinate that
is not the maximum does not raise the payoff, so no positive ``theta`` works.
Only the weaker ``<grad g, 1> >= theta`` holds for it (with ``theta = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp, softmax

CONFIRM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Payoff:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    g1_theta: float | None = None
    g2: bool = False
    g3: bool = False
    lipschitz: float | None = None
    convex: bool = False
    # nondecreasing along the all-ones direction; the brute-force engine
    # uses this to locate the min-max crossing by bisection
    monotone_ones: bool = True
    # max-of-affine representation g(x) = max_j (C[j] @ x + c0[j]), if any
    pieces: tuple[np.ndarray, np.ndarray] | None = None
    n: int | None = None
    note: str = ""

    def __call__(self, x) -> np.ndarray | float:
        out = self.fn(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, x) -> np.ndarray:
        return self.grad(np.asarray(x, dtype=float))


def eval(g: Payoff, x) -> float:  # noqa: A001 - mirrors the operation name
    return g(x)


def _max_grad(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    idx = np.argmax(x, axis=-1)  # first maximal index on ties
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def max_payoff(n: int | None = None) -> Payoff:
    pieces = None if n is None else (np.eye(n), np.zeros(n))
    return Payoff(
        name="max",
        fn=lambda x: np.max(x, axis=-1),
        grad=_max_grad,
        g1_theta=None,
        g2=True,
        g3=True,
        lipschitz=1.0,
        convex=True,
        pieces=pieces,
        n=n,
        note="strict (G1) fails; only <grad g, 1> = 1 holds",
    )


def linear_payoff(w) -> Payoff:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be a vector")
    theta = float(w.min()) if np.all(w > 0) else None
    g3 = abs(w.sum() - 1.0) <= 1e-12
    wc = w.copy()
    return Payoff(
        name="linear:" + ",".join(repr(float(v)) for v in w),
        fn=lambda x: x @ wc,
        grad=lambda x: np.broadcast_to(wc, np.shape(x)).copy(),
        g1_theta=theta,
        g2=True,
        g3=g3,
        lipschitz=float(np.linalg.norm(w)),
        convex=True,
        monotone_ones=bool(w.sum() >= 0),
        pieces=(w[None, :].copy(), np.zeros(1)),
        n=len(w),
    )


def softmax_payoff(delta: float, n: int | None = None) -> Payoff:
    """Smoothed maximum ``delta * log(sum(exp(x / delta)))``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return Payoff(
        name=f"softmax:{delta!r}",
        fn=lambda x: delta * logsumexp(x / delta, axis=-1),
        grad=lambda x: softmax(x / delta, axis=-1),
        g1_theta=None,
        g2=False,
        g3=True,
        lipschitz=1.0,
        convex=True,
        n=n,
    )


def parse_payoff(spec: str, n: int | None = None) -> Payoff:
    """Parse ``max``, ``linear:w1,...,wn`` or ``softmax:delta``."""
    spec = spec.strip()
    kind, _, arg = spec.partition(":")
    kind = kind.lower()
    if kind == "max":
        return max_payoff(n)
    if kind == "linear":
        w = [float(t) for t in arg.split(",") if t.strip()]
        if n is not None and len(w) != n:
            raise ValueError(f"linear payoff has {len(w)} weights, panel has {n} experts")
        return linear_payoff(w)
    if kind in ("softmax", "smoothmax"):
        return softmax_payoff(float(arg), n)
    raise ValueError(f"unknown payoff spec {spec!r}")


def with_dimension(g: Payoff, n: int) -> Payoff:
    """Bind the number of experts (fills in the affine pieces of max)."""
    if g.n == n:
        return g
    if g.n is not None:
        raise ValueError(f"payoff is for n={g.n}, not n={n}")
    if g.name == "max":
        return max_payoff(n)
    if g.name.startswith("softmax:"):
        return softmax_payoff(float(g.name.split(":", 1)[1]), n)
    return g


# ------------------------------------------------------------------ audits


@dataclass
class PropertyCheck:
    flagged: bool
    max_violation: float
    confirmed: bool
    extra: dict = field(default_factory=dict)


@dataclass
class PropertyReport:
    payoff: str
    samples: int
    g1: PropertyCheck
    g2: PropertyCheck
    g3: PropertyCheck

    def as_dict(self) -> dict:
        out = {"payoff": self.payoff, "samples": self.samples}
        for key in ("g1", "g2", "g3"):
            c = getattr(self, key)
            out[key] = {"flagged": c.flagged, "max_violation": c.max_violation,
                        "confirmed": c.confirmed, **c.extra}
        return out


def check_properties(g: Payoff, samples: int = 1000, seed: int = 0, n: int | None = None) -> PropertyReport:
    """Sample-based audit of (G1)/(G2)/(G3).

    Violations are reported for every property; a property counts as
    confirmed only if it is flagged on the payoff and its worst violation is
    at most ``1e-9``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = n or g.n or 2
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=2.0, size=(samples, n))
    v = rng.uniform(0.0, 2.0, size=(samples, n))
    # zero out some coordinates so increases off the argmax get probed
    v *= rng.random((samples, n)) < 0.6
    s_pos = rng.uniform(0.1, 5.0, size=samples)
    s_any = rng.normal(scale=3.0, size=samples)

    gx = g.fn(x)
    ones = v.sum(axis=1)
    gain = g.fn(x + v) - gx
    if g.g1_theta is not None:
        viol1 = float(np.max(np.maximum(g.g1_theta * ones - gain, 0.0)))
    else:
        viol1 = float("nan")
    nz = ones > 0
    emp_theta = float(np.min(gain[nz] / ones[nz])) if np.any(nz) else float("nan")
    c1 = PropertyCheck(g.g1_theta is not None, viol1,
                       g.g1_theta is not None and viol1 <= CONFIRM_TOL,
                       {"theta": g.g1_theta, "empirical_theta": emp_theta})

    viol2 = float(np.max(np.abs(g.fn(s_pos[:, None] * x) - s_pos * gx)))
    c2 = PropertyCheck(g.g2, viol2, g.g2 and viol2 <= CONFIRM_TOL)

    viol3 = float(np.max(np.abs(g.fn(x + s_any[:, None]) - (gx + s_any))))
    c3 = PropertyCheck(g.g3, viol3, g.g3 and viol3 <= CONFIRM_TOL)
    return PropertyReport(g.name, samples, c1, c2, c3)
