"""Command line driver.

Subcommands: ``validate``, ``value``, ``pde``, ``converge``, ``simulate``,
``local``.  Batch commands read an INI config (see ``README.md`` for the
keys); flags override the config.  Exit codes: 0 ok, 1 validation failure,
2 runtime error.

Every CSV gets a header row and ends with one comment line::

    # version=0.1.0 config_hash=<sha256 prefix> seed=<int>

Wall-clock times go to a ``timing.json`` sidecar so that CSV and summary
files are byte-identical across runs with the same config and seed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .debruijn import HistoryState, as_state
from .experts import (ExpertPanel, PanelParseError, diagnostics, parity_panel, random_grid_panel,
                      read_panel, static_panel)
from .game import GameSpec, ell_from_t, rescaled_values, value_exact
from .local import cell_gap, h_limit, h_tables, random_context
from .payoff import parse_payoff, with_dimension
from .pde import PdeSolution, monte_carlo_u
from .strategy import (BlockInvestor, ConstantInvestor, ExactInvestor, ExhaustiveMarket,
                       GradientInvestor, GreedyMarket, RandomMarket, block_length, simulate)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
ENGINES = ("auto", "brute", "path", "lattice")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _probes(text: str, n: int) -> list[tuple[np.ndarray, float]]:
    """``x1,...,xn@t`` entries separated by ``;``; ``0`` alone means the zero vector."""
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        xs, _, ts = item.partition("@")
        x = _floats(xs)
        if len(x) == 1 and n > 1:
            x = x * n
        if len(x) != n:
            raise ConfigError(f"probe {item!r} needs {n} coordinates")
        out.append((np.array(x), float(ts) if ts.strip() else 0.0))
    return out


@dataclass
class ExperimentConfig:
    panel_file: str | None = None
    family: str = "static"
    family_args: dict = field(default_factory=dict)
    payoff: str = "max"
    Ns: list[int] = field(default_factory=lambda: [64, 128, 256])
    probes: str = "0@0"
    engine: str = "auto"
    f_grid: float = 1e-3
    quad_order: int = 64
    quad_tol: float = 1e-8
    workers: int = 1
    k_rule: str = "auto"
    matchups: list[str] = field(default_factory=lambda: ["block:greedy"])
    sim_N: int = 256
    sim_seeds: list[int] = field(default_factory=lambda: [0])
    x0: str = "0"
    m0: str = ""
    local_k: list[int] = field(default_factory=lambda: [2, 3, 4])
    local_eps: list[float] = field(default_factory=lambda: [1e-2, 1e-3])
    local_contexts: int = 3
    local_scale: float = 1.0
    local_gap_max_k: int = 5
    out: str = "out"
    seed: int = 0
    source_text: str = ""

    # -- loading

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser, base: Path) -> "ExperimentConfig":
        c = cls()
        if cp.has_section("panel"):
            s = cp["panel"]
            if "file" in s:
                path = Path(s["file"])
                c.panel_file = str(path if path.is_absolute() else base / path)
            c.family = s.get("family", c.family)
            c.family_args = {k: v for k, v in s.items() if k not in ("file", "family")}
        if cp.has_section("payoff"):
            c.payoff = cp["payoff"].get("spec", c.payoff)
        if cp.has_section("sweep"):
            s = cp["sweep"]
            c.Ns = _ints(s.get("N", ",".join(map(str, c.Ns))))
            c.probes = s.get("probes", c.probes)
            c.seed = s.getint("seed", c.seed)
        if cp.has_section("engine"):
            s = cp["engine"]
            c.engine = s.get("engine", c.engine)
            c.f_grid = s.getfloat("f_grid", c.f_grid)
            c.quad_order = s.getint("quad_order", c.quad_order)
            c.quad_tol = s.getfloat("quad_tol", c.quad_tol)
            c.workers = s.getint("workers", c.workers)
        if cp.has_section("strategy"):
            s = cp["strategy"]
            c.k_rule = s.get("k", c.k_rule)
            c.matchups = [m.strip() for m in s.get("matchups", ",".join(c.matchups)).split(",") if m.strip()]
            c.sim_N = s.getint("N", c.sim_N)
            c.sim_seeds = _ints(s.get("seeds", "0"))
            c.x0 = s.get("x0", c.x0)
            c.m0 = s.get("m0", c.m0)
        if cp.has_section("local"):
            s = cp["local"]
            c.local_k = _ints(s.get("k", ",".join(map(str, c.local_k))))
            c.local_eps = _floats(s.get("eps", ",".join(map(repr, c.local_eps))))
            c.local_contexts = s.getint("contexts", c.local_contexts)
            c.local_scale = s.getfloat("scale", c.local_scale)
            c.local_gap_max_k = s.getint("gap_max_k", c.local_gap_max_k)
        if cp.has_section("output"):
            c.out = cp["output"].get("dir", c.out)
        c.validate()
        return c

    @classmethod
    def load(cls, path: str | None) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        if path is None:
            c = cls()
            c.validate()
            return c
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        text = p.read_text()
        cp.read_string(text)
        c = cls.from_parser(cp, p.parent)
        c.source_text = text
        return c

    def validate(self) -> None:
        if self.panel_file is not None and not Path(self.panel_file).is_file():
            raise ConfigError(f"panel file {self.panel_file} not found")
        if any(N < 2 for N in self.Ns) or self.sim_N < 2:
            raise ConfigError("N values must be >= 2")
        if self.f_grid <= 0 or self.quad_tol <= 0 or self.local_scale <= 0:
            raise ConfigError("tolerances must be positive")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def config_hash(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k not in ("source_text", "out", "workers")}
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def metadata(self) -> str:
        return f"# version={__version__} config_hash={self.config_hash()} seed={self.seed}"

    # -- objects

    def panel(self) -> ExpertPanel:
        if self.panel_file is not None:
            return read_panel(self.panel_file)
        a = self.family_args
        if self.family == "static":
            return static_panel(_floats(a.get("values", "1,-1")), int(a.get("d", 1)),
                                int(a["denominator"]) if "denominator" in a else None)
        if self.family == "parity":
            return parity_panel(_ints(a.get("masks", "0,1")), int(a.get("d", 1)),
                                float(a.get("amplitude", 1.0)))
        if self.family == "random":
            return random_grid_panel(int(a.get("n", 2)), int(a.get("d", 1)),
                                     int(a.get("denominator", 8)), int(a.get("seed", self.seed)))
        raise ConfigError(f"unknown panel family {self.family!r}")


# ---------------------------------------------------------------- helpers


def _write_csv(path: Path, header: list[str], rows: list[list], metadata: str,
               extra_comments: list[str] = ()) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([[_fmt(v) for v in r] for r in rows])
        for line in extra_comments:
            fh.write(line + "\n")
        fh.write(metadata + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.ndarray):
        return " ".join(repr(float(t)) for t in v)
    return str(v)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def loglog_slope(Ns, errs) -> float:
    """Least-squares slope of ``log err`` against ``log N``; nan with fewer than two positive points."""
    Ns = np.asarray(Ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = (errs > 0) & np.isfinite(errs)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(Ns[ok]), np.log(errs[ok]), 1)[0])


# -------------------------------------------------------------- commands


def cmd_validate(panel_path: str) -> tuple[int, dict]:
    panel = read_panel(panel_path)
    diag = diagnostics(panel)
    report = diag.as_dict()
    return (EXIT_OK if diag.e1_holds and diag.e2_holds else EXIT_INVALID), report


def _converge_point(args):
    cfg_panel, payoff_spec, N, x, t, engine, order, tol = args
    start = time.perf_counter()
    rec = {"N": N, "t": t, "x": x, "engine": engine, "error": ""}
    try:
        payoff = parse_payoff(payoff_spec, cfg_panel.n)
        vals = rescaled_values(cfg_panel, payoff, N, x, t, engine)
        sol = PdeSolution(cfg_panel, payoff, order=order, tol=tol)
        u = sol.evaluate_u(x, t)
        rec.update(u_N_plus=float(vals.max()), u_N_minus=float(vals.min()), u_pde=u,
                   err_plus=abs(float(vals.max()) - u), err_minus=abs(float(vals.min()) - u))
    except Exception as exc:  # recorded, never fatal for the sweep
        rec["error"] = f"{type(exc).__name__}: {exc}"
    rec["wall_time"] = time.perf_counter() - start
    return rec


CONVERGE_COLUMNS = ["N", "t", "x", "u_N_plus", "u_N_minus", "u_pde", "err_plus", "err_minus",
                    "engine", "error"]


def cmd_converge(cfg: ExperimentConfig) -> tuple[list[dict], float]:
    panel = cfg.panel()
    engine = cfg.engine if cfg.engine != "auto" else "lattice"
    jobs = [(panel, cfg.payoff, N, x, t, engine, cfg.quad_order, cfg.quad_tol)
            for N in cfg.Ns for x, t in _probes(cfg.probes, panel.n)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            records = list(ex.map(_converge_point, jobs))
    else:
        records = [_converge_point(j) for j in jobs]
    worst = {}
    for r in records:
        if not r["error"]:
            worst[r["N"]] = max(worst.get(r["N"], 0.0), r["err_plus"], r["err_minus"])
    Ns = sorted(worst)
    return records, loglog_slope(Ns, [worst[N] for N in Ns])


def _make_investor(name: str, sol, N: int, d: int, k_rule: str):
    kind, _, arg = name.partition(":")
    if kind == "exact":
        return ExactInvestor()
    if kind == "gradient":
        return GradientInvestor(sol())
    if kind == "block":
        k = block_length(N, 1) if k_rule == "auto" else (block_length(N, d) if k_rule == "d" else int(k_rule))
        return BlockInvestor(sol(), k)
    if kind == "constant":
        return ConstantInvestor(float(arg))
    raise ConfigError(f"unknown investor {name!r}")


def _make_market(name: str, sol):
    if name == "exhaustive":
        return ExhaustiveMarket()
    if name == "greedy":
        return GreedyMarket(sol())
    if name == "random":
        return RandomMarket()
    raise ConfigError(f"unknown market {name!r}")


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    panel = cfg.panel()
    payoff = with_dimension(parse_payoff(cfg.payoff, panel.n), panel.n)
    cache = {}

    def sol():
        if "s" not in cache:
            cache["s"] = PdeSolution(panel, payoff, order=cfg.quad_order, tol=cfg.quad_tol)
        return cache["s"]

    N = cfg.sim_N
    x0 = np.array(_floats(cfg.x0) * (panel.n if len(_floats(cfg.x0)) == 1 else 1))
    m0 = as_state(cfg.m0, panel.d) if cfg.m0 else HistoryState(panel.d, 0)
    summary = {"N": N, "panel": panel.name, "payoff": payoff.name, "matchups": {}}
    for mu in cfg.matchups:
        inv_name, _, mk_name = mu.partition(":")
        finals, clamps, notes = [], [], set()
        for seed in cfg.sim_seeds:
            inv = _make_investor(inv_name, sol, N, panel.d, cfg.k_rule)
            mk = _make_market(mk_name, sol)
            tr = simulate(panel, payoff, N, x0, m0, inv, mk, seed=seed)
            fname = out / f"traj_{inv_name.replace(':', '_')}_{mk_name}_seed{seed}.csv"
            fname.parent.mkdir(parents=True, exist_ok=True)
            with open(fname, "w", newline="") as fh:
                meta = f"# version={__version__} config_hash={cfg.config_hash()} seed={seed}"
                tr.write_csv(fh, payoff, meta)
            finals.append(tr.final_payoff)
            clamps.append(tr.clamps)
            notes.update(tr.notes)
        finals = np.array(finals)
        summary["matchups"][mu] = {
            "seeds": list(cfg.sim_seeds),
            "mean_final_payoff": float(finals.mean()),
            "max_final_payoff": float(finals.max()),
            "mean_scaled_payoff": float(finals.mean() / math.sqrt(N)),
            "clamps_total": int(sum(clamps)),
            "notes": sorted(notes),
        }
    return summary


LOCAL_COLUMNS = ["k", "eps", "context", "H_min", "H_mean", "H_max", "H_over_k", "h_limit",
                 "delta_0", "gap", "bound_shape", "L", "method", "error"]


def cmd_local(cfg: ExperimentConfig) -> list[list]:
    panel = cfg.panel()
    rng = np.random.default_rng(cfg.seed)
    contexts = [random_context(panel.n, rng, cfg.local_scale) for _ in range(cfg.local_contexts)]
    rows = []
    kmax = max(cfg.local_k)
    for ci, ctx in enumerate(contexts):
        tables = h_tables(ctx, panel, kmax)
        hl = h_limit(ctx, panel)
        for k in cfg.local_k:
            H = tables[k].values
            for eps in cfg.local_eps:
                gap = bound = L = float("nan")
                method, err = "", ""
                if panel.d + 1 <= k <= cfg.local_gap_max_k:
                    try:
                        cg = cell_gap(ctx, panel, HistoryState(panel.d, 0), k, eps, cfg.f_grid)
                        gap, bound, L, method = cg.lhs, cg.bound_shape, cg.value, cg.method
                    except Exception as exc:
                        err = f"{type(exc).__name__}: {exc}"
                rows.append([k, eps, ci, float(H.min()), float(H.mean()), float(H.max()),
                             float(H.mean() / k) if k else 0.0, hl, float(tables[k].deltas[0]),
                             gap, bound, L, method, err])
    return rows


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bruijnregret", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--engine", choices=ENGINES)
    common.add_argument("--quad-order", type=int, dest="quad_order")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check (E1)/(E2) for a panel file")
    p.add_argument("panel", nargs="?")

    p = sub.add_parser("value", parents=[common], help="exact game value V_N(x, ell; m)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--x", default="0", help="comma-separated regret vector")
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--m", default="", help="history, e.g. +-+ (default all -)")

    p = sub.add_parser("pde", parents=[common], help="continuum value u and derivatives")
    p.add_argument("--x", default="0")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--mc", type=int, default=0, help="also run a Monte Carlo check with this many samples")

    for name, hlp in (("converge", "u_N vs u sweep"), ("simulate", "strategy tournaments"),
                      ("local", "local-problem sweep")):
        sub.add_parser(name, parents=[common], help=hlp)
    return ap


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
        if cfg.sim_seeds == [0]:
            cfg.sim_seeds = [args.seed]
    if args.out is not None:
        cfg.out = args.out
    if args.engine is not None:
        cfg.engine = args.engine
    if args.quad_order is not None:
        cfg.quad_order = args.quad_order
    cfg.validate()
    return cfg


def _vector(text: str, n: int) -> np.ndarray:
    v = _floats(text)
    if len(v) == 1:
        v = v * n
    if len(v) != n:
        raise ConfigError(f"need {n} coordinates, got {len(v)}")
    return np.array(v)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    if args.command == "validate":
        path = args.panel
        if path is None:
            cfg = ExperimentConfig.load(args.config)
            path = cfg.panel_file
        if path is None:
            raise ConfigError("validate needs a panel file")
        code, report = cmd_validate(path)
        print(json.dumps(report, indent=2, default=_json_default))
        return code

    cfg = _apply_flags(ExperimentConfig.load(args.config), args)
    out = Path(cfg.out)
    if args.command == "value":
        panel = cfg.panel()
        payoff = parse_payoff(cfg.payoff, panel.n)
        m = as_state(args.m, panel.d) if args.m else HistoryState(panel.d, 0)
        spec = GameSpec(panel, payoff, args.N, _vector(args.x, panel.n), m, args.ell)
        print(repr(value_exact(spec, cfg.engine, cfg.f_grid)))
        return EXIT_OK
    if args.command == "pde":
        panel = cfg.panel()
        payoff = parse_payoff(cfg.payoff, panel.n)
        sol = PdeSolution(panel, payoff, order=cfg.quad_order, tol=cfg.quad_tol, seed=cfg.seed)
        x = _vector(args.x, panel.n)
        rep = {"u": sol.evaluate_u(x, args.t), "method": sol.method, "quad_error": sol.last_error}
        if args.t < 1.0:
            g, H, ut = sol.derivatives(x, args.t)
            rep.update(grad=g, hess=H, u_t=ut)
        if args.mc:
            mean, se = monte_carlo_u(panel, payoff, x, args.t, args.mc, cfg.seed)
            rep.update(mc_mean=mean, mc_se=se)
        print(json.dumps(rep, indent=2, default=_json_default))
        return EXIT_OK
    if args.command == "converge":
        records, slope = cmd_converge(cfg)
        rows = [[r.get(c, "") for c in CONVERGE_COLUMNS] for r in records]
        _write_csv(out / "converge.csv", CONVERGE_COLUMNS, rows, cfg.metadata(), [f"# fit slope={slope!r}"])
        _write_json(out / "converge_summary.json", {"slope": slope, "records": len(records),
                                                    "errors": sum(bool(r["error"]) for r in records)})
        _write_json(out / "timing.json", {"total": time.perf_counter() - t0,
                                          "points": [r["wall_time"] for r in records]})
        print(f"slope {slope:.4f} over {len(records)} records -> {out / 'converge.csv'}")
        return EXIT_OK
    if args.command == "simulate":
        summary = cmd_simulate(cfg, out)
        _write_json(out / "simulate_summary.json", summary)
        _write_json(out / "timing.json", {"total": time.perf_counter() - t0})
        print(json.dumps(summary, indent=2, default=_json_default))
        return EXIT_OK
    if args.command == "local":
        rows = cmd_local(cfg)
        _write_csv(out / "local.csv", LOCAL_COLUMNS, rows, cfg.metadata())
        _write_json(out / "timing.json", {"total": time.perf_counter() - t0})
        print(f"{len(rows)} rows -> {out / 'local.csv'}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    try:
        return run(argv)
    except PanelParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
