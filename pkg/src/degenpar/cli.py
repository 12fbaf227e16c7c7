"""Command-line scenario runner.

    degenpar check  --config s.yaml --out out/
    degenpar lemma  --a 1 --b 0.5 --n 3 --samples 100000 --seed 7
    degenpar solve  --config s.yaml --out out/
    degenpar verify --config s.yaml --out out/ --jobs 4
    degenpar sweep  --config s.yaml --out out/

Exit codes: 0 all checks pass, 2 checks ran and failed, 1 configuration or
runtime error. Every JSON document embeds the resolved config and its sha256.
"""
import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import LemmaBlock, clean_json, load_config
from .errors import AdmissibilityError, ConditionViolation, DegenparError, ParameterError
from .estimates import (
    SweepResult,
    Window,
    bound_ratio_fde,
    bound_ratio_heat_sz,
    bound_ratio_pme_n1,
    bound_ratio_pme_n2,
    bound_ratio_thm11,
    exact_generator,
    inequality_residual,
    liouville_sweep,
)
from .geometry import Field, ModelGeometry
from .matrix_lemma import bruteforce_sup, supremum_bound, witness
from .nonlinearity import (
    ValueRange,
    condition_report,
    fde_admissible_range,
    fde_gamma,
    heat_alpha,
    pme_alpha,
    pme_pinch,
)
from .solver import SolverConfig, Trajectory, atomic_write, residual, solution_error, solve

log = logging.getLogger("degenpar")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def render(doc):
    return json.dumps(clean_json(doc), sort_keys=True, indent=2) + "\n"


def _document(command, cfg, result, passed, seed=None):
    doc = {"command": command, "passed": bool(passed), "result": result}
    if cfg is not None:
        doc["config"] = cfg.resolved()
        doc["config_sha256"] = cfg.digest()
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def _write(out, name, text):
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / name, text)
    return out / name


# -- shared helpers ----------------------------------------------------------


def default_alpha(cfg, M):
    """α from the config, or the natural choice for the preset given sup u = M."""
    eq = cfg.equation
    if eq.alpha is not None:
        return float(eq.alpha)
    if eq.preset == "heat" or (eq.preset == "power" and eq.p == 1):
        return heat_alpha(M)
    if eq.preset == "power":
        return 0.0 if eq.p < 1 else pme_alpha(eq.p, M, eq.delta)
    raise ParameterError("custom nonlinearity needs an explicit equation.alpha")


def value_range_for(cfg, values):
    vr = cfg.analysis.value_range
    if vr is not None:
        if not vr.m <= vr.M:
            raise ParameterError("value_range needs m <= M")
        return ValueRange(vr.m, vr.M)
    return ValueRange.of(values)


def build_trajectory(cfg):
    """Trajectory from the solver or sampled from the exact initial-data family."""
    geom = cfg.build_geometry()
    nl = cfg.build_nonlinearity()
    exact = cfg.build_exact()
    t0, horizon = cfg.initial.t_start, cfg.solver.horizon
    if cfg.analysis.source == "exact":
        if exact is None:
            raise ParameterError("analysis.source 'exact' needs an exact initial-data kind")
        times = np.linspace(t0, t0 + horizon, cfg.analysis.snapshots)
        return Trajectory.from_exact(exact, geom, times, nl)
    scfg = cfg.build_solver()
    return solve(cfg.initial_field(geom), nl, horizon, scfg, boundary=exact)


# -- check -------------------------------------------------------------------


def run_check(cfg):
    nl = cfg.build_nonlinearity()
    u0 = cfg.initial_field()
    vr = value_range_for(cfg, u0.values)
    n = cfg.geometry.n
    eq = cfg.equation
    alpha = default_alpha(cfg, vr.M)
    result = {"value_range": {"m": vr.m, "M": vr.M}, "alpha": alpha, "n": n, "nonlinearity": nl.label}
    checks = {}
    try:
        report = condition_report(nl, vr, alpha, n)
        result["conditions"] = report.as_dict()
        checks["conditions"] = report.ok
    except DegenparError as exc:
        result["conditions"] = {"error": str(exc)}
        checks["conditions"] = False
    operative = "conditions"
    if eq.preset == "power" and eq.p < 1 and n >= 2:
        lo, hi = fde_admissible_range(n)
        fde = {"range": [lo, hi], "p": eq.p}
        try:
            fde["gamma"] = fde_gamma(n, eq.p)
            fde["holds"] = True
        except AdmissibilityError as exc:
            fde["holds"] = False
            fde["reason"] = str(exc)
        result["fde"] = fde
        checks["fde"] = fde["holds"]
        operative = "fde"
    elif eq.preset == "power" and eq.p > 1 and n >= 2:
        pinch = pme_pinch(n, eq.p, eq.delta, vr)
        result["pinch"] = pinch.as_dict()
        checks["pinch"] = pinch.holds
        operative = "pinch"
    result["operative"] = operative
    result["checks"] = checks
    return result, checks[operative]


# -- lemma -------------------------------------------------------------------


def run_lemma(a, b, n, samples, seed):
    bound = supremum_bound(a, b, n)
    wit = witness(a, b, n)
    empirical = bruteforce_sup(a, b, n, samples, seed)
    attained = wit.value**2
    rel = abs(attained - bound) / max(bound, 1e-300)
    result = {
        "a": a, "b": b, "n": n, "samples": samples,
        "supremum_bound": bound,
        "bruteforce_sup": empirical,
        "witness": {"A": wit.A, "v": wit.v, "value": wit.value, "value_sq": attained, "relative_gap": rel},
    }
    passed = empirical <= bound + 1e-9 and rel <= 1e-6
    return result, passed


# -- solve -------------------------------------------------------------------


def run_solve(cfg, out):
    traj = build_trajectory(cfg)
    exact = cfg.build_exact()
    result = {
        "snapshots": len(traj),
        "t_final": float(traj.times[-1]),
        "min_value": float(traj.values.min()),
        "max_value": float(traj.values.max()),
        "mass_drift": float(np.abs(traj.mass() / traj.mass()[0] - 1).max()),
    }
    if len(traj) >= 3:
        result["residual_max"] = float(residual(traj).max())
    if exact is not None:
        result["error_vs_exact"] = solution_error(traj, exact)
    if out is not None:
        traj.export(out / "trajectory", extra={"config_sha256": cfg.digest()})
    return result, bool(result["min_value"] > 0)


# -- verify ------------------------------------------------------------------


def _one_report(kind, traj, cfg, window, alpha):
    eq = cfg.equation
    n = cfg.geometry.n
    if kind == "thm11":
        return bound_ratio_thm11(traj, traj.nonlinearity, alpha, window)
    if kind == "fde":
        return bound_ratio_fde(traj, eq.p, n, window)
    if kind == "pme_n1":
        return bound_ratio_pme_n1(traj, eq.p, eq.delta, window)
    if kind == "pme_n2":
        return bound_ratio_pme_n2(traj, eq.p, eq.delta, n, window)
    if kind == "heat_sz":
        return bound_ratio_heat_sz(traj, window)
    raise ParameterError(f"unknown report {kind!r}")


def run_verify(cfg, out, jobs=1):
    traj = build_trajectory(cfg)
    nl = traj.nonlinearity
    alpha = default_alpha(cfg, float(traj.values.max()))
    result = {"alpha": alpha, "windows": []}
    passed = True
    if "residual" in cfg.analysis.reports:
        rep = inequality_residual(traj, nl, alpha)
        result["inequality_residual"] = rep.as_dict()
        passed = passed and rep.passed

    tasks = []
    for i, wb in enumerate(cfg.analysis.windows):
        window = Window(wb.x0, wb.t0, wb.R, wb.T)
        for kind in cfg.analysis.reports:
            if kind != "residual":
                tasks.append((i, kind, window))

    def work(task):
        i, kind, window = task
        try:
            rep = _one_report(kind, traj, cfg, window, alpha)
        except ConditionViolation as exc:
            return i, kind, {"refused": True, "condition": exc.condition, "reason": str(exc),
                             "details": exc.details}, None
        return i, kind, rep.as_dict(), rep

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(work, tasks))
    for i, kind, doc, rep in outcomes:
        doc = dict(doc, window_index=i, report=kind)
        result["windows"].append(doc)
        if rep is not None and out is not None:
            _write(out, f"verify_w{i:02d}_{kind}.csv", rep.detail_csv())
    return result, passed


# -- sweep -------------------------------------------------------------------


def _solver_generator(cfg, x0, t0, points, snapshots):
    exact = cfg.build_exact()
    if exact is None:
        raise ParameterError("solver-driven sweeps need an exact solution for boundary data")
    nl = cfg.build_nonlinearity()
    g = cfg.geometry

    def make(radius, T):
        geom = ModelGeometry(g.kind, g.n, x0 - radius, x0 + radius, points)
        dt = T / (snapshots - 1)
        scfg = SolverConfig(dt=dt, bc="dirichlet_exact", newton_tol=cfg.solver.newton_tol)
        u0 = Field(geom, exact.sample(geom, t0 - T), t0 - T)
        return solve(u0, nl, T, scfg, boundary=exact)

    return make


def run_sweep(cfg, out, jobs=1):
    sw = cfg.analysis.sweep
    if sw is None:
        raise ParameterError("sweep needs an analysis.sweep block")
    eq = cfg.equation
    p = eq.p if eq.preset == "power" else 1.0
    if sw.family == "fde" and not p < 1:
        raise ParameterError("fde sweep needs a power nonlinearity with p < 1")
    if sw.family == "pme" and not p > 1:
        raise ParameterError("pme sweep needs a power nonlinearity with p > 1")
    if cfg.analysis.source == "exact":
        exact = cfg.build_exact()
        if exact is None:
            raise ParameterError("exact-source sweep needs an exact initial-data kind")
        gen = exact_generator(exact, cfg.geometry.kind, cfg.geometry.n, sw.x0, sw.t0,
                              sw.points, sw.snapshots, cfg.build_nonlinearity())
    else:
        gen = _solver_generator(cfg, sw.x0, sw.t0, sw.points, sw.snapshots)

    def work(R):
        return liouville_sweep(gen, sw.family, p, sw.x0, sw.t0, [R], delta=eq.delta).rows[0]

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = tuple(pool.map(work, sw.R))
    sweep = SweepResult(sw.family, rows)
    if out is not None:
        _write(out, "sweep.csv", sweep.to_csv())
    result = sweep.as_dict()
    result["expect"] = sw.expect
    if sw.expect == "decreasing":
        passed = sweep.decreasing
    elif sw.expect == "not_decreasing":
        passed = not sweep.decreasing
    else:
        passed = True
    return result, passed


# -- entry point -------------------------------------------------------------


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", type=Path, default=d(None), help="YAML scenario file")
    parser.add_argument("--out", type=Path, default=d(Path("out")), help="output directory")
    parser.add_argument("--seed", type=int, default=d(None), help="overrides analysis.seed")
    parser.add_argument("--jobs", type=int, default=d(1), help="worker threads for windows/sweeps")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser():
    parser = argparse.ArgumentParser(prog="degenpar", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    # global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="admissibility conditions for the configured range")
    lemma = sub.add_parser("lemma", parents=[common], help="matrix supremum: bound, witness, brute force")
    lemma.add_argument("--a", type=float)
    lemma.add_argument("--b", type=float)
    lemma.add_argument("--n", type=int)
    lemma.add_argument("--samples", type=int)
    sub.add_parser("solve", parents=[common], help="integrate the scenario and write trajectory files")
    sub.add_parser("verify", parents=[common], help="bound ratios and inequality residual over windows")
    sub.add_parser("sweep", parents=[common], help="Liouville sweep table over growing windows")
    return parser


def _lemma_params(args, cfg):
    base = cfg.analysis.lemma if cfg is not None else LemmaBlock()
    merged = {
        "a": args.a if args.a is not None else base.a,
        "b": args.b if args.b is not None else base.b,
        "n": args.n if args.n is not None else base.n,
        "samples": args.samples if args.samples is not None else base.samples,
    }
    return LemmaBlock(**merged)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is None and args.command != "lemma":
            raise ParameterError(f"'{args.command}' needs --config")
        seed = args.seed if args.seed is not None else (cfg.analysis.seed if cfg else 0)
        if args.command == "check":
            result, passed = run_check(cfg)
        elif args.command == "lemma":
            lp = _lemma_params(args, cfg)
            result, passed = run_lemma(lp.a, lp.b, lp.n, lp.samples, seed)
        elif args.command == "solve":
            result, passed = run_solve(cfg, out)
        elif args.command == "verify":
            result, passed = run_verify(cfg, out, args.jobs)
        else:
            result, passed = run_sweep(cfg, out, args.jobs)
        doc = _document(args.command, cfg, result, passed, seed if args.command == "lemma" else None)
        _write(out, f"{args.command}.json", render(doc))
    except (DegenparError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = "PASS" if passed else "FAIL"
    print(f"{args.command}: {status} ({out / (args.command + '.json')})")
    return EXIT_OK if passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
