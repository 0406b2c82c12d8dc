"""Command-line interface: solve, verify, eig, and sweep subcommands.

Exit codes: 0 success / all verdicts pass, 1 solver failure or failed
verdicts, 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import field_io
from .config import RunConfig, config_from_dict, load_config
from .elliptic import (
    SolverError,
    box_spectrum_analytic,
    check_hyp,
    eigenvalues,
    smallest_eigenvalue,
    solve_lifting_U,
    solve_phi_D,
    solve_phi_N,
)
from .functional import ConfigurationError, FunctionalContext, eval_J
from .grid import GridError, ScalarField, build_domain, l2_norm, zeros_field
from .harness import certify, run_scenario_set
from .optimize import (
    find_negative_endpoint,
    minimize,
    mountain_pass,
    newton_refine,
)
from .plots import save_heatmap, save_lines


def _apply_thread_cap():
    cap = os.environ.get("KGMVAR_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=int(cap))
    except Exception:
        pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgmvar",
        description="Variational solver and verification harness for an "
        "electrostatically coupled scalar-field system on box domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--grid", type=int, help="interior nodes per axis (override)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_solve = sub.add_parser("solve", help="run one solve pipeline and write a report")
    common(p_solve)

    p_verify = sub.add_parser("verify", help="run a named verification scenario set")
    p_verify.add_argument(
        "set", nargs="?", default="all", help="th1 | mix | nonlin | qlimit | all"
    )
    common(p_verify)

    p_eig = sub.add_parser("eig", help="print low Laplacian eigenvalues for a box")
    p_eig.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p_eig.add_argument("--modes", type=int, default=3, help="number of eigenvalues (<= 10)")
    common(p_eig)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter and tabulate results")
    p_sweep.add_argument("--axis", required=True, help="q | omega | m | grid")
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated sweep values"
    )
    common(p_sweep)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "eig":
            return _cmd_eig(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return 2
    except (ConfigurationError, GridError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigurationError("this command requires --config")
    cfg = load_config(args.config)
    raw = cfg.to_dict()
    if args.grid is not None:
        raw["counts"] = [args.grid] * raw["dim"]
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = str(args.out)
    return config_from_dict(raw)


def _solve_pipeline(cfg: RunConfig) -> dict:
    """Lift, reduce, optimize, Newton-polish, certify. Returns the report body."""
    d = cfg.build_domain()
    params = cfg.build_params()
    t0 = time.perf_counter()
    lam1, _ = smallest_eigenvalue(d)
    warnings = []

    if cfg.regime in ("dirichlet", "nonlinear"):
        zeta = cfg.boundary("zeta", d)
        holds, margin = check_hyp(params, zeta, lam1)
        if not holds:
            warnings.append(
                f"spectral smallness condition fails (margin {margin:.6g}); "
                "solvability is not guaranteed"
            )
    else:
        margin = None

    if cfg.regime == "dirichlet":
        h = cfg.boundary("h", d)
        U = solve_lifting_U(d, params, h)
        Phi = solve_phi_D(d, zeta, params)
        ctx = FunctionalContext(domain=d, params=params, regime="dirichlet", U=U, Phi=Phi)
        cp = minimize(ctx, zeros_field(d), cfg.descent_config())
        refined = newton_refine(ctx, cp.v)
    elif cfg.regime == "neumann":
        h = cfg.boundary("h", d)
        theta = cfg.boundary("theta", d)
        U = solve_lifting_U(d, params, h)
        Phi, kappa = solve_phi_N(d, theta, params.q)
        ctx = FunctionalContext(
            domain=d, params=params, regime="neumann", U=U, Phi=Phi, kappa=kappa
        )
        cp = minimize(ctx, zeros_field(d), cfg.descent_config())
        refined = newton_refine(ctx, cp.v)
    else:
        model = cfg.build_model()
        Phi = solve_phi_D(d, zeta, params)
        ctx = FunctionalContext(
            domain=d, params=params, regime="nonlinear",
            U=zeros_field(d), Phi=Phi, model=model,
        )
        mp_cfg = cfg.mp_config()
        _, modes = eigenvalues(d, 1)
        seed_field = ScalarField(d, 0.1 * modes[0].values)
        endpoint = find_negative_endpoint(ctx, seed_field, mp_cfg)
        cp = mountain_pass(ctx, endpoint, mp_cfg)
        refined = newton_refine(ctx, cp.v)

    cert = certify(ctx, refined.v, refined.phi)
    elapsed = time.perf_counter() - t0
    u = ScalarField(d, refined.v.values + ctx.U.values)
    phi_total = ScalarField(d, refined.phi.values + ctx.Phi.values)
    return {
        "report": {
            "config": cfg.to_dict(),
            "lambda1": lam1,
            "hyp_margin": margin,
            "warnings": warnings,
            "optimizer": {
                "kind": cp.kind,
                "J_value": eval_J(ctx, refined.v),
                "iterations": cp.iterations,
                "grad_norm": cp.grad_norm,
                "converged": bool(cp.converged and refined.converged),
            },
            "certificate": cert,
            "u_l2": l2_norm(u),
            "timing_seconds": elapsed,
        },
        "fields": {"u": u, "phi": phi_total},
    }


def _cmd_solve(args) -> int:
    cfg = _load(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = _solve_pipeline(cfg)
    except SolverError as exc:
        report = {"config": cfg.to_dict(), "error": str(exc)}
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    report = result["report"]
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    for name, fld in result["fields"].items():
        field_io.write_csv(fld, out / f"{name}.csv")
        field_io.write_structured_points(fld, out / f"{name}.vtk", name=name)
        save_heatmap(fld, out / f"{name}.png", title=name)
    if not args.quiet:
        opt = report["optimizer"]
        print(
            f"solve: J={opt['J_value']:.6g} u_l2={report['u_l2']:.6g} "
            f"residuals=({report['certificate']['residual_matter']:.3e}, "
            f"{report['certificate']['residual_potential']:.3e}) "
            f"in {report['timing_seconds']:.2f}s -> {out}"
        )
        for w in report["warnings"]:
            print(f"warning: {w}")
    return 0


def _cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    verdicts = run_scenario_set(args.set, seed=seed, grid=args.grid)
    width = max(len(v.name) for v in verdicts)
    all_pass = all(v.passed for v in verdicts)
    if not args.quiet:
        for v in verdicts:
            flag = "PASS" if v.passed else "FAIL"
            print(f"{flag}  {v.name:<{width}}  {v.claim}")
        print(f"{sum(v.passed for v in verdicts)}/{len(verdicts)} scenarios passed")
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        doc = [
            {
                "name": v.name,
                "claim": v.claim,
                "passed": v.passed,
                "measurements": _jsonable(v.measurements),
                "details": v.details,
            }
            for v in verdicts
        ]
        (outdir / "verdicts.json").write_text(
            json.dumps(doc, indent=2) + "\n", encoding="utf-8"
        )
    return 0 if all_pass else 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _cmd_eig(args) -> int:
    n = args.grid or 31
    if args.config is not None:
        cfg = _load(args)
        d = cfg.build_domain()
    else:
        d = build_domain(args.dim, (1.0,) * args.dim, (n,) * args.dim)
    k = args.modes
    lams, _ = eigenvalues(d, k)
    analytic = box_spectrum_analytic(d, k)
    print(f"{'idx':>3}  {'discrete':>14}  {'analytic':>14}  {'rel_err':>10}  mult")
    for i, (lam, (ana, modes)) in enumerate(zip(lams, analytic), start=1):
        mult = sum(1 for a, _ in analytic if abs(a - ana) < 1e-9 * max(1.0, ana))
        rel = abs(lam - ana) / ana
        print(f"{i:>3}  {lam:>14.8f}  {ana:>14.8f}  {rel:>10.2e}  {mult}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    axis = args.axis
    if axis not in ("q", "omega", "m", "grid"):
        raise ConfigurationError(f"invalid sweep axis {axis!r}; use q | omega | m | grid")
    try:
        values = [float(x) for x in args.values.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad sweep values {args.values!r}") from exc
    if not values:
        raise ConfigurationError("empty sweep value list")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for val in values:
        raw = cfg.to_dict()
        if axis == "grid":
            raw["counts"] = [int(val)] * raw["dim"]
        else:
            raw[axis] = val
        run_cfg = config_from_dict(raw)
        result = _solve_pipeline(run_cfg)
        rep = result["report"]
        rows.append(
            {
                "value": val,
                "hyp_margin": rep["hyp_margin"],
                "J": rep["optimizer"]["J_value"],
                "u_l2": rep["u_l2"],
                "residual_matter": rep["certificate"]["residual_matter"],
                "residual_potential": rep["certificate"]["residual_potential"],
            }
        )
        if not args.quiet:
            print(f"{axis}={val:g}: J={rows[-1]['J']:.6g} u_l2={rows[-1]['u_l2']:.6g}")

    cols = list(rows[0].keys())
    lines = [",".join([axis] + cols[1:])]
    for r in rows:
        lines.append(
            ",".join(
                "{:.17g}".format(r[c]) if isinstance(r[c], float) else str(r[c])
                for c in cols
            )
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    save_lines(
        [r["value"] for r in rows],
        {"u_l2": [r["u_l2"] for r in rows], "J": [r["J"] for r in rows]},
        out / "sweep.png",
        xlabel=axis,
        title=f"sweep over {axis}",
    )
    return 0
