"""Expert prediction tables and the constants derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .debruijn import HistoryState, enumerate_states, successor_table

ELLIPTIC_TOL = 1e-12


class PanelParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _infer_denominator(table: np.ndarray, max_den: int = 4096) -> int | None:
    for den in (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096):
        if den > max_den:
            break
        scaled = table * den
        if np.allclose(scaled, np.round(scaled), rtol=0, atol=1e-12):
            return den
    for den in range(3, max_den + 1):
        scaled = table * den
        if np.allclose(scaled, np.round(scaled), rtol=0, atol=1e-12):
            return den
    return None


@dataclass(frozen=True, eq=False)
class ExpertPanel:
    """Prediction table ``q``: row ``code`` is ``q(m)`` for the state with that code.

    ``D`` is a common denominator of all entries when one exists (entries are
    ``k/D``); the lattice value engine needs it.
    """

    table: np.ndarray
    D: int | None = None
    name: str = "custom"

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("table must be 2-D (2**d rows, n columns)")
        rows, n = t.shape
        d = rows.bit_length() - 1
        if rows < 2 or (1 << d) != rows:
            raise ValueError(f"table needs 2**d rows with d >= 1, got {rows}")
        if n < 2:
            raise ValueError("need at least two experts")
        if not np.all(np.isfinite(t)) or np.any(np.abs(t) > 1.0):
            raise ValueError("predictions must lie in [-1, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        den = self.D
        if den is None:
            den = _infer_denominator(t)
        elif not np.allclose(t * den, np.round(t * den), rtol=0, atol=1e-12):
            raise ValueError(f"entries are not on the 1/{den} grid")
        object.__setattr__(self, "D", den)

    @property
    def n(self) -> int:
        return self.table.shape[1]

    @property
    def d(self) -> int:
        return self.table.shape[0].bit_length() - 1

    @property
    def num_states(self) -> int:
        return self.table.shape[0]

    def q(self, m) -> np.ndarray:
        code = m.code if isinstance(m, HistoryState) else int(m)
        return self.table[code]

    def states(self) -> list[HistoryState]:
        return enumerate_states(self.d)

    def successors(self) -> np.ndarray:
        return successor_table(self.d)

    def relabeled(self, perm: Sequence[int]) -> "ExpertPanel":
        """Same predictions attached to permuted states (row ``i`` moves to ``perm[i]``)."""
        t = np.empty_like(self.table)
        t[np.asarray(perm)] = self.table
        return ExpertPanel(t, self.D, self.name + "-relabeled")


# ---------------------------------------------------------------- constants


def compute_vartheta(panel: ExpertPanel) -> float:
    q = panel.table
    pos = np.maximum(q, 0.0)
    neg = -np.minimum(q, 0.0)
    per_state = np.minimum((1.0 - pos).sum(axis=1), (1.0 - neg).sum(axis=1))
    return float(per_state.min())


def compute_r_table(panel: ExpertPanel) -> np.ndarray:
    """Rows ``r(m) = (q_1 - q_n, ..., q_{n-1} - q_n)``."""
    q = panel.table
    return q[:, :-1] - q[:, -1:]


def compute_A(panel: ExpertPanel) -> np.ndarray:
    r = compute_r_table(panel)
    A = r.T @ r / 2.0 ** (panel.d + 1)
    return 0.5 * (A + A.T)


def compute_B(panel: ExpertPanel) -> np.ndarray:
    q = panel.table
    B = q.T @ q / 2.0 ** (panel.d + 1)
    return 0.5 * (B + B.T)


def smallest_eigenvalue(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True, eq=False)
class PanelDiagnostics:
    n: int
    d: int
    vartheta_q: float
    r_table: np.ndarray
    A: np.ndarray
    lambda_min: float
    B: np.ndarray
    lambda_min_B: float
    e1_holds: bool
    e2_holds: bool

    @property
    def lambda_r(self) -> float:
        """Ellipticity constant as it enters rate formulas, capped at 1."""
        return min(1.0, self.lambda_min)

    @property
    def b_implies_a(self) -> bool:
        """Numerical check that ``B > 0`` forces ``A > 0``."""
        return not (self.lambda_min_B > ELLIPTIC_TOL) or self.lambda_min > ELLIPTIC_TOL

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "vartheta_q": self.vartheta_q,
            "lambda_min_A": self.lambda_min,
            "lambda_r": self.lambda_r,
            "lambda_min_B": self.lambda_min_B,
            "E1": self.e1_holds,
            "E2": self.e2_holds,
            "B_implies_A": self.b_implies_a,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
        }


def diagnostics(panel: ExpertPanel) -> PanelDiagnostics:
    vt = compute_vartheta(panel)
    A = compute_A(panel)
    B = compute_B(panel)
    lam = smallest_eigenvalue(A)
    lamB = smallest_eigenvalue(B)
    return PanelDiagnostics(
        n=panel.n,
        d=panel.d,
        vartheta_q=vt,
        r_table=compute_r_table(panel),
        A=A,
        lambda_min=lam,
        B=B,
        lambda_min_B=lamB,
        e1_holds=vt > 0.0,
        e2_holds=lam > ELLIPTIC_TOL,
    )


# ------------------------------------------------------------ panel families


def static_panel(values: Sequence[float], d: int = 1, D: int | None = None) -> ExpertPanel:
    """Each expert predicts a constant, whatever the history."""
    row = np.asarray(values, dtype=float)
    return ExpertPanel(np.tile(row, (1 << d, 1)), D, "static")


def parity_panel(
    masks: Sequence[int], d: int, amplitude: float = 1.0, signs: Sequence[int] | None = None,
    D: int | None = None,
) -> ExpertPanel:
    """Expert ``j`` predicts ``s_j * amplitude * (-1)**popcount(code & masks[j])``.

    A zero mask gives a static expert.  With ``amplitude < 1`` assumption (E1)
    holds automatically.
    """
    signs = [1] * len(masks) if signs is None else list(signs)
    codes = np.arange(1 << d)
    cols = []
    for mask, s in zip(masks, signs):
        par = np.array([bin(int(c) & int(mask)).count("1") % 2 for c in codes])
        cols.append(s * amplitude * (1 - 2 * par))
    return ExpertPanel(np.stack(cols, axis=1), D, "parity")


def random_grid_panel(n: int, d: int, D: int = 8, seed: int = 0, require_e1: bool = True) -> ExpertPanel:
    """Entries ``k/D`` drawn uniformly from ``{-D, ..., D}``."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        t = rng.integers(-D, D + 1, size=(1 << d, n)) / D
        panel = ExpertPanel(t, D, f"random(seed={seed})")
        if not require_e1 or compute_vartheta(panel) > 0:
            return panel
    raise RuntimeError("could not draw a panel satisfying (E1)")


# -------------------------------------------------------------- file format


def _format_entry(v: float) -> str:
    # repr round-trips; for power-of-two D it is the exact decimal
    return repr(float(v))


def format_panel(panel: ExpertPanel) -> str:
    D = panel.D
    lines = [f"{panel.n} {panel.d} {D if D is not None else 0}"]
    for st in panel.states():
        vals = " ".join(_format_entry(v) for v in panel.q(st))
        lines.append(f"{st} {vals}")
    return "\n".join(lines) + "\n"


def write_panel(panel: ExpertPanel, path) -> None:
    Path(path).write_text(format_panel(panel))


def parse_panel(text: str) -> ExpertPanel:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise PanelParseError(1, "empty panel file")
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 3:
        raise PanelParseError(lineno, "header must be 'n d D'")
    try:
        n, d, D = (int(p) for p in parts)
    except ValueError:
        raise PanelParseError(lineno, "header values must be integers") from None
    if n < 2 or d < 1 or D < 0:
        raise PanelParseError(lineno, "need n >= 2, d >= 1, D >= 0")
    body = lines[1:]
    if len(body) != 1 << d:
        where = body[-1][0] if body else lineno
        raise PanelParseError(where, f"expected {1 << d} state rows, found {len(body)}")
    table = np.empty((1 << d, n))
    for expected, (ln_no, ln) in zip(enumerate_states(d), body):
        toks = ln.split()
        if len(toks) != n + 1:
            raise PanelParseError(ln_no, f"expected a state and {n} predictions")
        try:
            st = HistoryState.parse(toks[0])
        except ValueError as exc:
            raise PanelParseError(ln_no, str(exc)) from None
        if st != expected:
            raise PanelParseError(ln_no, f"state {toks[0]} out of canonical order (expected {expected})")
        try:
            vals = [float(Fraction(tok)) for tok in toks[1:]]
        except (ValueError, ZeroDivisionError):
            raise PanelParseError(ln_no, "predictions must be numbers") from None
        if any(abs(v) > 1 for v in vals):
            raise PanelParseError(ln_no, "predictions must lie in [-1, 1]")
        if D > 0 and any(abs(v * D - round(v * D)) > 1e-9 for v in vals):
            raise PanelParseError(ln_no, f"predictions not on the 1/{D} grid")
        table[st.code] = vals
    if D > 0:
        table = np.round(table * D) / D
    return ExpertPanel(table, D if D > 0 else None, "file")


def read_panel(path) -> ExpertPanel:
    return parse_panel(Path(path).read_text())

