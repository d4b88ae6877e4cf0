"""Command-line entry point: ``hessquot [subcommand] --config run.cfg``.

Exit status: 0 when every requested check passes, 1 when a check fails or the
solver gives up, 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics, solver
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config, validate
from .properties import run_suite
from .sphere import make_grid

log = logging.getLogger("hessquot")


def _build_parser():
    ap = argparse.ArgumentParser(prog="hessquot", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                    help="overrides the 'subcommand' key of the config")
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--resolution", type=int, nargs="+", help="grid resolution: n_theta [n_phi]")
    ap.add_argument("-q", "--quiet", action="store_true", help="only errors on stderr, nothing on stdout")
    return ap


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config, check=False) if args.config else RunConfig()
    overrides = {}
    if args.subcommand:
        overrides["subcommand"] = args.subcommand
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if args.resolution:
        overrides["resolution"] = tuple(args.resolution)
    return validate(replace(cfg, **overrides))


def _phi(cfg: RunConfig, grid, spec) -> np.ndarray:
    if cfg.phi_kind == "constant":
        return np.full(grid.size, cfg.phi_value)
    if cfg.phi_kind == "axisym_power":
        return cfg.phi_base * (1 + cfg.phi_delta * np.cos(grid.theta)) ** (-spec.m)
    path = Path(cfg.phi_path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"phi.path: cannot read {path}: {exc.strerror}") from None
    if rows and rows[0] and not _is_number(rows[0][-1]):
        rows = rows[1:]
    try:
        values = np.array([float(r[-1]) for r in rows if r], dtype=float)
    except ValueError:
        raise ConfigError(f"phi.path: {path} has a non-numeric entry in its last column") from None
    if values.size != grid.size:
        raise ConfigError(f"phi.path: {path} has {values.size} values, the grid has {grid.size} nodes")
    return values


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def _setup(cfg: RunConfig):
    spec0 = cfg.problem()
    try:
        grid = make_grid(cfg.backend, cfg.resolution, spec0.n)
    except ValueError as exc:
        raise ConfigError(f"grid.resolution/grid.backend: {exc}") from None
    return spec0.with_phi(_phi(cfg, grid, spec0)), grid


def _write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cmd_solve(cfg, out, say):
    spec, grid = _setup(cfg)
    if spec.case != "nonhomogeneous":
        raise ConfigError(f"problem.p/problem.q: solve needs p > q - l (p - q + l = {spec.growth:g}); "
                          "use the homogeneous subcommand")
    phi_report = diagnostics.check_phi(spec.phi, spec, grid)
    report = {"case": spec.case, "special_q_equals_k_plus_1": spec.special,
              "phi": phi_report.to_dict()}
    try:
        states = solver.continuation(spec, cfg.max_steps, grid=grid, tol=cfg.tol)
    except solver.ContinuationError as exc:
        solver.write_trace(exc.states, out / "trace.csv")
        report["error"] = str(exc)
        report["last_good_t"] = exc.last_t
        _write_json(out / "report.json", report)
        say(f"solver failed: {exc}")
        return 1
    solver.write_trace(states, out / "trace.csv")
    final = states[-1].u
    final.to_csv(out / "solution.csv")
    bounds = diagnostics.verify_bounds(final, spec)
    full_rank = min(s.min_eig_a for s in states)
    report.update(bounds=bounds.to_dict(), min_eig_a_along_path=full_rank,
                  steps=len(states) - 1, res_inf=states[-1].res_inf)
    ok = bounds.passed and full_rank > 0
    report["passed"] = ok
    _write_json(out / "report.json", report)
    say(f"solve: {len(states) - 1} steps, u in [{final.u.min():.10g}, {final.u.max():.10g}], "
        f"bounds {'pass' if bounds.passed else 'FAIL'}, min eig(a) along path {full_rank:.4g}")
    return 0 if ok else 1


def _cmd_homogeneous(cfg, out, say):
    spec, grid = _setup(cfg)
    if spec.case != "homogeneous" or spec.p <= 1:
        raise ConfigError("problem.p/problem.q: homogeneous needs p = q - l > 1")
    report = {"case": spec.case, "phi": diagnostics.check_phi(spec.phi, spec, grid).to_dict()}
    ok = True
    try:
        result = solver.homogeneous_solve(spec, cfg.eps_list, grid=grid, steps=cfg.max_steps,
                                          tol=cfg.tol, cauchy_tol=cfg.cauchy_tol)
    except solver.GammaError as exc:
        result = getattr(exc, "result", None)
        report["error"] = str(exc)
        ok = False
    except solver.SolverError as exc:
        report["error"] = str(exc)
        _write_json(out / "report.json", dict(report, passed=False))
        say(f"solver failed: {exc}")
        return 1
    if result is not None:
        result.field.to_csv(out / "solution.csv")
        bounds = diagnostics.verify_homogeneous(result, spec)
        ok = ok and bounds.passed
        report.update(gamma=result.gamma, eps=result.eps, gammas=result.gammas,
                      gamma_extrapolated=result.gamma_extrapolated,
                      interval=list(result.interval), bounds=bounds.to_dict(), states=result.states)
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "gamma_eps", "steps", "res_inf"])
            for st, g in zip(result.states, result.gammas):
                w.writerow([format(st["eps"], ".17g"), format(g, ".17g"), st["steps"],
                            format(st["res_inf"], ".17g")])
        say(f"homogeneous: gamma = {result.gamma:.12g} (eps = {result.eps[-1]:g}), "
            f"sequence {'Cauchy' if 'error' not in report else 'NOT Cauchy'}")
    report["passed"] = ok
    _write_json(out / "report.json", report)
    return 0 if ok else 1


def _cmd_check_phi(cfg, out, say):
    spec, grid = _setup(cfg)
    rep = diagnostics.check_phi(spec.phi, spec, grid)
    _write_json(out / "report.json", {"case": spec.case, "phi": rep.to_dict(), "passed": rep.passed})
    say(f"check-phi: case {rep.case_id}, beta {rep.beta:.6g}, min eig {rep.min_eig:.6g}: "
        f"{'pass' if rep.passed else 'FAIL'}")
    for note in rep.notes:
        say(f"  note: {note}")
    return 0 if rep.passed else 1


def _cmd_properties(cfg, out, say):
    try:
        reports = run_suite(cfg.seed, cfg.dims, cfg.trials)
    except ValueError as exc:
        raise ConfigError(f"properties.dims: {exc}") from None
    ok = all(r.passed for r in reports)
    _write_json(out / "report.json", {"seed": cfg.seed, "passed": ok,
                                      "properties": [r.to_dict() for r in reports]})
    with open(out / "properties.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "n", "P", "k", "l", "trials", "worst_violation", "slack",
                    "empirical_constant", "acceptance_rate", "pass"])
        for r in reports:
            w.writerow([r.name, *r.dims, r.trials, format(r.worst_violation, ".17g"), r.slack,
                        "" if r.empirical_constant is None else format(r.empirical_constant, ".17g"),
                        "" if r.acceptance_rate is None else r.acceptance_rate, r.passed])
    say(f"{'check':34s} {'dims':14s} {'worst':>10s}  result")
    for r in reports:
        extra = "" if r.empirical_constant is None else f"  c={r.empirical_constant:.4g}"
        say(f"{r.name:34s} {str(r.dims):14s} {r.worst_violation:10.3e}  "
            f"{'pass' if r.passed else 'FAIL'}{extra}")
    return 0 if ok else 1


_COMMANDS = {"solve": _cmd_solve, "homogeneous": _cmd_homogeneous,
             "check-phi": _cmd_check_phi, "verify-properties": _cmd_properties}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    say = (lambda msg: None) if args.quiet else print
    try:
        cfg = _resolve(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.effective").write_text(cfg.effective())
        return _COMMANDS[cfg.subcommand](cfg, out, say)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except solver.SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
