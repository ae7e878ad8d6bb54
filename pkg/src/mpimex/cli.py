"""Command-line front end: convergence studies, stability scans, runs and checks.

Every command writes CSV (comma separated, 17 significant digits, LF line
endings, header row) to ``--out`` or standard output. Options may also come
from a JSON document given with ``--config``; flags override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation, MpimexError, StepFailure
from .integrator import integrate, observed_slopes
from .predictor import PredictorKind
from .problems import PROBLEMS, Problem, build_problem
from .problems.model2 import model2_system
from .stability import SCAN_COLUMNS, diag_dominant_theorem_check, scan_stability
from .tableau import SCHEMES, builtin_tableau, order_condition_residuals, validate_tableau

THREADS_ENV = "MPIMEX_THREADS"


@dataclass
class RunConfig:
    problem: str = "linear3"
    scheme: str = "imex2"
    predictor: str = "strong-gs"
    dt_list: Optional[list] = None
    t0: float = 0.0
    t_final: Optional[float] = None
    params: dict = field(default_factory=dict)
    out: Optional[str] = None
    seed: int = 0
    reference: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    n_list: list = field(default_factory=lambda: [2, 4, 8])
    count: int = 100

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ContractViolation(f"unknown problem {self.problem!r}; expected one of {', '.join(PROBLEMS)}")
        if self.scheme not in SCHEMES:
            raise ContractViolation(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        if self.predictor != "monolithic":
            self.predictor = PredictorKind.parse(self.predictor).value
        if self.dt_list is not None:
            self.dt_list = [float(x) for x in self.dt_list]
        dts = self.dt_list or []
        if any(not dt > 0 for dt in dts):
            raise ContractViolation("time steps must be positive")
        if any(b >= a for a, b in zip(dts, dts[1:])):
            raise ContractViolation("dt list must be strictly decreasing")
        return self


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        return max(0, int(raw))
    except ValueError:
        raise ContractViolation(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- CSV ----------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(row.get(k)) for k in header])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# -- studies ------------------------------------------------------------------

def _final_state(problem: Problem, scheme, kind, t0, t1, dt):
    traj = integrate(problem.system, builtin_tableau(scheme), kind, problem.u0, t0, t1, dt)
    return None if traj.diverged else traj.final


def reference_solution(problem: Problem, t0, t1, dts, reference=None):
    """Exact solution when known, otherwise a fine strong-GS imex4 run."""
    reference = dict(reference or {})
    if problem.exact is not None and not reference:
        return problem.exact(t1)
    scheme = reference.get("scheme", "imex4")
    kind = reference.get("predictor", "strong-gs")
    dt = float(reference.get("dt", min(dts) / 8.0))
    ref = _final_state(problem, scheme, kind, t0, t1, dt)
    if ref is None:
        raise MpimexError("reference run diverged")
    return ref


def convergence_rows(problem: Problem, scheme, kind, dts, t0=0.0, t1=None, reference=None, workers=0):
    """One row per time step: ``dt``, primary ``error``, ``observed_slope`` and per-block errors."""
    t1 = problem.t_final if t1 is None else t1
    if not dts:
        return []
    ref = reference_solution(problem, t0, t1, dts, reference)

    def run(dt):
        try:
            u = _final_state(problem, scheme, kind, t0, t1, dt)
        except StepFailure:
            u = None
        if u is None:
            return {name: math.inf for name in problem.blocks}
        return problem.block_errors(u, ref)

    block_errs = _map(run, list(dts), workers)
    primary = [e[problem.primary_block] for e in block_errs]
    slopes = observed_slopes(list(dts), primary)
    per_block = {name: observed_slopes(list(dts), [e[name] for e in block_errs]) for name in problem.blocks}
    rows = []
    for k, (dt, errs) in enumerate(zip(dts, block_errs)):
        row = {"dt": dt, "error": primary[k], "observed_slope": slopes[k]}
        for name in problem.blocks:
            row[f"error_{name}"] = errs[name]
            row[f"slope_{name}"] = per_block[name][k]
        rows.append(row)
    return rows


def convergence_header(problem: Problem):
    header = ["dt", "error", "observed_slope"]
    if len(problem.blocks) > 1:
        for name in problem.blocks:
            header += [f"error_{name}", f"slope_{name}"]
    return header


# -- commands -----------------------------------------------------------------

def cmd_converge(cfg: RunConfig) -> int:
    problem = build_problem(cfg.problem, **cfg.params)
    rows = convergence_rows(problem, cfg.scheme, cfg.predictor, cfg.dt_list or [], cfg.t0, cfg.t_final,
                            cfg.reference, worker_count())
    write_csv(cfg.out, convergence_header(problem), rows)
    if rows and all(math.isinf(r["error"]) for r in rows):
        return 1
    return 0


def stability_grid(cfg: RunConfig) -> dict:
    """Grid axes from defaults, scalar/list params, the config grid and flags (in that order)."""
    grid = {"dt": [1.0], "lambda1": [-1.0], "lambda2": [-1.0], "alpha": [0.5]}
    for key in grid:
        if key in cfg.params:
            value = cfg.params[key]
            grid[key] = list(value) if isinstance(value, (list, tuple)) else [value]
    grid.update({k: list(v) for k, v in cfg.grid.items() if k in grid})
    if cfg.dt_list is not None:
        grid["dt"] = cfg.dt_list
    return {k: [float(x) for x in v] for k, v in grid.items()}


def cmd_stability(cfg: RunConfig) -> int:
    if cfg.problem != "model2":
        raise ContractViolation("stability scans are defined for the linear model2 family")
    rows = scan_stability(model2_system, cfg.scheme, cfg.predictor, stability_grid(cfg), workers=worker_count())
    write_csv(cfg.out, list(SCAN_COLUMNS), rows)
    return 0


def cmd_run(cfg: RunConfig) -> int:
    problem = build_problem(cfg.problem, **cfg.params)
    t1 = problem.t_final if cfg.t_final is None else cfg.t_final
    if not cfg.dt_list:
        raise ContractViolation("run needs a time step (--dt-list with one value)")
    dt = cfg.dt_list[0]
    names = list(problem.observe(problem.u0))
    header = ["t", "newton_iters"] + names
    rows = []

    def record(n, t, u):
        row = {"t": t, "newton_iters": None}
        row.update(problem.observe(u))
        rows.append(row)

    status, diverged = 0, False
    try:
        if t1 > cfg.t0:
            traj = integrate(problem.system, builtin_tableau(cfg.scheme), cfg.predictor, problem.u0, cfg.t0, t1, dt,
                             callback=record)
            for row, its in zip(rows, traj.newton_iters):
                row["newton_iters"] = int(its)
            diverged = traj.diverged
            status = 1 if diverged else 0
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        status = 2
    write_csv(cfg.out, header, rows)
    print(f"summary: problem={problem.name} scheme={cfg.scheme} predictor={cfg.predictor} steps={len(rows)} "
          f"diverged={'true' if diverged else 'false'} failed={'true' if status == 2 else 'false'}",
          file=sys.stderr if cfg.out in (None, "-") else sys.stdout)
    return status


def cmd_tableau_check(cfg: RunConfig) -> int:
    schemes = [cfg.scheme] if cfg.scheme else list(SCHEMES)
    rows, ok = [], True
    for name in schemes:
        tab = builtin_tableau(name)
        rep = validate_tableau(tab)
        res_i = order_condition_residuals(tab, "implicit")
        res_e = order_condition_residuals(tab, "explicit")
        worst = max([abs(r) for r in list(res_i) + list(res_e)], default=0.0)
        rows.append({"scheme": name, "order": tab.order, "stages": tab.s, "valid": rep.ok,
                     "max_order_residual": worst, "violations": "; ".join(rep.violations)})
        ok = ok and rep.ok and worst <= 1e-12
    write_csv(cfg.out, ["scheme", "order", "stages", "valid", "max_order_residual", "violations"], rows)
    return 0 if ok else 1


def cmd_theorem_check(cfg: RunConfig) -> int:
    dts = cfg.dt_list if cfg.dt_list else [0.1, 1.0, 10.0, 1000.0]
    rows = [diag_dominant_theorem_check(int(n), cfg.count, dts, seed=cfg.seed + k)
            for k, n in enumerate(cfg.n_list)]
    write_csv(cfg.out, ["n", "instances", "failures", "max_rho", "formula_gap", "passed"], rows)
    return 0 if all(r["passed"] for r in rows) else 1


COMMANDS = {
    "converge": cmd_converge,
    "stability": cmd_stability,
    "run": cmd_run,
    "tableau-check": cmd_tableau_check,
    "theorem-check": cmd_theorem_check,
}


# -- argument handling --------------------------------------------------------

def _float_list(text):
    text = text.strip()
    return [float(x) for x in text.split(",") if x.strip()] if text else []


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpimex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--problem", choices=PROBLEMS)
        p.add_argument("--scheme", choices=SCHEMES)
        p.add_argument("--predictor", help="predictor kind or 'monolithic'")
        p.add_argument("--dt-list", type=_float_list, help="comma-separated, strictly decreasing")
        p.add_argument("--t-final", type=float)
        p.add_argument("--t0", type=float)
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                       help="problem parameter override (JSON value)")
        if name == "converge":
            p.add_argument("--reference-scheme")
            p.add_argument("--reference-dt", type=float)
            p.add_argument("--reference-predictor")
        if name == "stability":
            for g in ("lambda1", "lambda2", "alpha"):
                p.add_argument(f"--{g}", type=_float_list, help="comma-separated grid values")
        if name == "theorem-check":
            p.add_argument("--n-list", type=_int_list)
            p.add_argument("--count", type=int)
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ContractViolation("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def make_config(args, command) -> RunConfig:
    data = _load_config(args.config)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ContractViolation(f"unknown config keys {sorted(unknown)}")
    for key in ("problem", "scheme", "predictor", "dt_list", "t_final", "t0", "out", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    params = dict(data.get("params", {}))
    params.update(dict(args.param))
    data["params"] = params
    if command == "converge":
        ref = dict(data.get("reference", {}))
        for key, attr in (("scheme", "reference_scheme"), ("dt", "reference_dt"), ("predictor", "reference_predictor")):
            if getattr(args, attr, None) is not None:
                ref[key] = getattr(args, attr)
        data["reference"] = ref
    if command == "stability":
        grid = dict(data.get("grid", {}))
        for g in ("lambda1", "lambda2", "alpha"):
            if getattr(args, g, None) is not None:
                grid[g] = getattr(args, g)
        data["grid"] = grid
    if command == "theorem-check":
        if args.n_list is not None:
            data["n_list"] = args.n_list
        if args.count is not None:
            data["count"] = args.count
    if command == "tableau-check" and "scheme" not in data:
        data["scheme"] = ""
    if command == "stability" and "problem" not in data:
        data["problem"] = "model2"
    cfg = RunConfig(**data)
    if command == "tableau-check":
        if cfg.scheme and cfg.scheme not in SCHEMES:
            raise ContractViolation(f"unknown scheme {cfg.scheme!r}")
        return cfg
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except (MpimexError, ValueError, ArithmeticError, OSError) as exc:
        print(f"mpimex {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
