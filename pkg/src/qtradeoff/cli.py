"""Command-line front end.

Commands
--------
analyze       information matrices and the trade-off bound at a point
measure       construct an optimal projective measurement
verify        Monte Carlo maximum-likelihood check of a plan
radar-sweep   bound/achievement table over biphoton correlations
oracle        brute-force search for the best Fisher-information trace

Reports are UTF-8 JSON with a ``schema_version`` field. Output contains no
wall-clock data unless ``--timing`` is given, so identical inputs and seeds
give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings

import numpy as np

from . import information, measurement, montecarlo, numerics, oracle, radar
from .errors import (
    ConsistencyError, ConvergenceError, DomainError, InvalidArgumentError, ParseError,
    QTradeoffError, ResolutionError, SingularInformationError, ValidationError,
)
from .model import BUILTINS, builtin, load_model_file

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SINGULAR = 3
EXIT_CONVERGENCE = 4
EXIT_VALIDATION = 5


def exit_code_for(exc):
    if isinstance(exc, SingularInformationError):
        return EXIT_SINGULAR
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (ValidationError, DomainError, ResolutionError, ConsistencyError)):
        return EXIT_VALIDATION
    return EXIT_PARSE


# -- encoding -----------------------------------------------------------------

def _real(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ConsistencyError("non-finite value in report")
    return a.tolist()


def _cplx(a):
    a = np.asarray(a, dtype=complex)
    return _real(np.stack([a.real, a.imag], axis=-1))


def _decode_cplx(obj, what):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: expected numbers") from exc
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ParseError(f"{what}: expected a matrix of reals or of [re, im] pairs")


def _dump(report, out):
    text = json.dumps(report, indent=2, allow_nan=False, ensure_ascii=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- argument helpers ---------------------------------------------------------

def _parse_floats(text, what):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"{what}: non-finite value")
    return vals


def _parse_params(items):
    params = {}
    for item in items or ():
        if "=" not in item:
            raise ParseError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            params[k.strip()] = v
    return params


def _parse_kappas(text):
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ParseError("kappa count must be positive")
            return np.linspace(start, stop, count).tolist()
    except ValueError as exc:
        raise ParseError(f"bad kappa spec {text!r}") from exc
    raise ParseError(f"kappa spec must be 'value' or 'start:stop:count', got {text!r}")


def load_model(spec, params=None, grid_n=None, grid_w=None):
    """Resolve ``builtin:name`` or a path to an explicit-model file."""
    params = dict(params or {})
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTINS:
            raise ParseError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
        if grid_n is not None:
            params["grid_n"] = grid_n
        if grid_w is not None:
            params["grid_w"] = grid_w
        return builtin(name, params)
    return load_model_file(spec)


def _model_from_args(args):
    params = _parse_params(args.param)
    model = load_model(args.model, params, args.grid_n, args.grid_w)
    if args.point:
        x = np.array(_parse_floats(args.point, "--point"))
        if x.size != model.n:
            raise ParseError(f"--point has {x.size} values, model has {model.n} parameters")
    else:
        x = np.asarray(model.reference_point, dtype=float)
    return model, x, params


def _seed(args, notes):
    if args.seed is not None:
        return int(args.seed)
    seed = int(np.random.SeedSequence().entropy % (2**63))
    notes.append(f"no --seed given; generated seed {seed} recorded in this report")
    return seed


def _descriptor(args, model, params):
    return {
        "source": args.model,
        "name": model.name,
        "params": params,
        "grid_n": args.grid_n,
        "grid_w": args.grid_w,
        "d": model.d,
        "n": model.n,
        "labels": list(model.labels),
        "derivatives": model.derivative_mode,
    }


def _tolerances(**extra):
    tol = {
        "rank_tol": numerics.RANK_TOL,
        "spd_ratio": numerics.SPD_RATIO,
        "p_cutoff": information.P_CUTOFF,
        "null_deriv_tol": information.NULL_DERIV_TOL,
        "psd_tol": information.PSD_TOL,
        "lambda_tol": information.LAMBDA_TOL,
    }
    tol.update(extra)
    return tol


def _bound_section(bundle, report):
    return {
        "qfim": _real(bundle.qfim),
        "berry": _real(bundle.berry),
        "lambdas": _real(bundle.lambdas),
    }, {
        "gamma_bound": report.gamma_bound,
        "penalties": _real(report.penalties),
        "total_penalty": report.total_penalty,
        "gill_massar_constant": report.gill_massar_constant,
        "weak_commutativity": report.weak_commutativity,
    }


def _header(command, args, model, x, params):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "model": _descriptor(args, model, params),
        "point": _real(x),
    }


def _finish(report, args, t0, notes):
    report["warnings"] = list(notes)
    report["timing"] = {"seconds": time.perf_counter() - t0} if args.timing else None
    _dump(report, args.out)
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)


# -- commands -----------------------------------------------------------------

def cmd_analyze(args):
    t0 = time.perf_counter()
    model, x, params = _model_from_args(args)
    _, _, bundle = information.bundle_at(model, x)
    tr = information.tradeoff_bound(bundle)
    report = _header("analyze", args, model, x, params)
    report["information"], report["tradeoff"] = _bound_section(bundle, tr)
    report["seeds"] = {}
    report["tolerances"] = _tolerances()
    _finish(report, args, t0, [])
    return EXIT_OK


def _plan_section(plan):
    return {
        "outcomes": plan.outcomes,
        "has_remainder": plan.has_remainder,
        "working_dim": plan.working_dim,
        "constrained": plan.constrained,
        "basis": _cplx(plan.basis),
        "probabilities": _real(plan.probabilities),
        "coefficients": _real(plan.coefficients),
        "cfim": _real(plan.cfim),
        "errors": _real(plan.errors),
        "whitened_errors": _real(plan.whitened_errors),
        "gamma_achieved": plan.gamma_achieved,
        "B": _cplx(plan.B),
    }


def cmd_measure(args):
    t0 = time.perf_counter()
    notes = []
    model, x, params = _model_from_args(args)
    seed = _seed(args, notes)
    cfg = measurement.OptimizerConfig(method=args.method, restarts=args.restarts, seed=seed)
    shape = _parse_floats(args.shape_probs, "--shape-probs") if args.shape_probs else None
    B = None
    if args.b_matrix:
        try:
            with open(args.b_matrix, encoding="utf-8") as fh:
                B = _decode_cplx(json.load(fh), "B matrix")
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{args.b_matrix}: {exc}") from exc
        if np.allclose(B.imag, 0):
            B = B.real
    built = measurement.construct(model, x, cfg, B=B, shape=shape, b_seed=seed)
    plan = built.plan
    if plan.gamma_achieved > built.report.gamma_bound + 1e-6:
        raise ConsistencyError("achieved value exceeds the bound")
    report = _header("measure", args, model, x, params)
    report["information"], report["tradeoff"] = _bound_section(built.bundle, built.report)
    report["rotation"] = {
        "method": cfg.method,
        "residual": built.rotation.residual,
        "penalty": built.rotation.penalty,
        "converged": built.rotation.converged,
        "best_restart": built.rotation.best_restart,
    }
    report["plan"] = _plan_section(plan)
    report["seeds"] = {"seed": seed}
    report["tolerances"] = _tolerances(
        cert_tol=cfg.cert_tol, zero_entry=measurement.ZERO_ENTRY, dense_min=measurement.DENSE_MIN
    )
    _finish(report, args, t0, notes)
    return EXIT_OK


def _load_plan(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if doc.get("command") != "measure" or "plan" not in doc:
        raise ParseError(f"{path}: not a measure report")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def cmd_verify(args):
    t0 = time.perf_counter()
    notes = []
    if args.plan:
        doc = _load_plan(args.plan)
        m = doc["model"]
        if args.model is None:
            args.model = m["source"]
            args.param = [f"{k}={json.dumps(v)}" for k, v in m["params"].items()]
            args.grid_n = m.get("grid_n")
            args.grid_w = m.get("grid_w")
            if not args.point:
                args.point = ",".join(repr(v) for v in doc["point"])
        model, x, params = _model_from_args(args)
        basis = _decode_cplx(doc["plan"]["basis"], "plan basis")
        plan_seed = doc.get("seeds", {}).get("seed")
    else:
        if args.model is None:
            raise ParseError("verify needs --plan or --model")
        model, x, params = _model_from_args(args)
        plan_seed = None
    seed = _seed(args, notes)
    if not args.plan:
        built = measurement.construct(model, x, measurement.OptimizerConfig(seed=seed))
        basis = built.plan.basis
    _, _, bundle = information.bundle_at(model, x)
    tr = information.tradeoff_bound(bundle)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mc = montecarlo.simulate_estimation(
            basis, model, x, shots=args.shots, seed=seed, repetitions=args.repetitions, qfim=bundle.qfim
        )
    notes.extend(mc.warnings)
    report = _header("verify", args, model, x, params)
    report["information"], report["tradeoff"] = _bound_section(bundle, tr)
    report["monte_carlo"] = {
        "shots": mc.shots,
        "repetitions": mc.repetitions,
        "cfim": _real(mc.cfim),
        "empirical_covariance": _real(mc.covariance),
        "expected_covariance": _real(mc.expected_covariance),
        "standard_errors": _real(mc.standard_errors),
        "z_scores": _real(mc.z_scores),
        "max_abs_z": mc.max_abs_z,
        "gamma_estimate": mc.gamma_estimate,
        "gamma_expected": mc.gamma_expected,
        "gamma_relative_deviation": mc.gamma_relative_deviation,
    }
    report["seeds"] = {"seed": seed, "plan_seed": plan_seed}
    report["tolerances"] = _tolerances(min_shots=montecarlo.MIN_SHOTS)
    _finish(report, args, t0, notes)
    return EXIT_OK


def cmd_radar_sweep(args):
    kappas = _parse_kappas(args.kappa)
    grid = radar.TimeGrid(
        n_points=args.grid_n if args.grid_n is not None else radar.TimeGrid.n_points,
        half_width=args.grid_w if args.grid_w is not None else radar.TimeGrid.half_width,
    )
    rows = radar.kappa_sweep(kappas, grid)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            radar.write_sweep_csv(rows, fh)
    else:
        radar.write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_oracle(args):
    t0 = time.perf_counter()
    notes = []
    model, x, params = _model_from_args(args)
    if model.d > oracle.MAX_DIM and not args.force:
        raise ValidationError(
            f"brute-force search is limited to d <= {oracle.MAX_DIM} (model has d={model.d}); pass --force to override"
        )
    seed = _seed(args, notes)
    cfg = oracle.SearchConfig(restarts=args.restarts, iterations=args.iterations, seed=seed)
    res = oracle.brute_force_gamma(model, x, cfg, force=True)
    _, _, bundle = information.bundle_at(model, x)
    tr = information.tradeoff_bound(bundle)
    report = _header("oracle", args, model, x, params)
    report["information"], report["tradeoff"] = _bound_section(bundle, tr)
    report["oracle"] = {
        "best_gamma": res.gamma,
        "gap_to_bound": tr.gamma_bound - res.gamma,
        "best_restart": res.best_restart,
        "restart_values": _real(res.restart_values),
        "restarts": cfg.restarts,
        "iterations": cfg.iterations,
    }
    report["seeds"] = {"seed": seed}
    report["tolerances"] = _tolerances(ascent_tol=cfg.tol)
    _finish(report, args, t0, notes)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="qtradeoff", description="Multiparameter pure-state estimation trade-offs.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_opts(sp, required=True):
        sp.add_argument("--model", required=required, help="explicit-model JSON path or builtin:<name>")
        sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="builtin model parameter (repeatable)")
        sp.add_argument("--point", help="parameter point v1,v2,... (radians for angles)")
        sp.add_argument("--grid-n", type=int, help="radar grid points per axis")
        sp.add_argument("--grid-w", type=float, help="radar grid half-width in pulse widths")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="include wall-clock time in the report")

    a = sub.add_parser("analyze", help="information matrices and trade-off bound")
    model_opts(a)
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("measure", help="construct an optimal measurement")
    model_opts(m)
    m.add_argument("--seed", type=int)
    m.add_argument("--method", choices=("takagi", "ascent"), default="takagi")
    m.add_argument("--restarts", type=int, default=16)
    m.add_argument("--shape-probs", help="target outcome probabilities p1,p2,...")
    m.add_argument("--b-matrix", help="JSON file with an orthogonal/unitary B matrix")
    m.set_defaults(func=cmd_measure)

    v = sub.add_parser("verify", help="Monte Carlo check of a measurement plan")
    model_opts(v, required=False)
    v.add_argument("--plan", help="report written by 'measure'")
    v.add_argument("--shots", type=int, default=100_000)
    v.add_argument("--repetitions", type=int, default=2000)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("radar-sweep", help="bounds and achieved values over kappa")
    r.add_argument("--kappa", default="0:0.9:10", help="'start:stop:count' or a single value")
    r.add_argument("--grid-n", type=int)
    r.add_argument("--grid-w", type=float)
    r.add_argument("--out", help="CSV path (stdout if omitted)")
    r.set_defaults(func=cmd_radar_sweep)

    o = sub.add_parser("oracle", help="brute-force search over projective measurements")
    model_opts(o)
    o.add_argument("--seed", type=int)
    o.add_argument("--restarts", type=int, default=8)
    o.add_argument("--iterations", type=int, default=400)
    o.add_argument("--force", action="store_true", help=f"allow d > {oracle.MAX_DIM}")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QTradeoffError as exc:
        msg = str(exc)
        if isinstance(exc, ValidationError) and exc.rows:
            msg += f" (rows {', '.join(map(str, exc.rows))})"
        if isinstance(exc, ResolutionError) and exc.suggested_points:
            msg += f" [suggested --grid-n {exc.suggested_points}]"
        print(f"error: {msg}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
