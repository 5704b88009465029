"""Command-line interface.

Subcommands: ``run``, ``field``, ``verify``, ``reproduce`` and ``report``.

Exit codes
----------
0  success
1  a reproduction row required to pass did not pass
2  configuration error
3  a hypothesis of the scheme failed (non-positive dwell, empty polytope,
   missing bound, infeasible geometry, insufficient accuracy, a state outside
   the evaluator domain)
4  invariant violation, or the target ball was not reached by the horizon
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import glob
import json
import os
import sys
import time

import numpy as np

from . import bounds, scenarios
from .errors import (AccuracyInsufficient, ConfigError, DomainError, EmptyPolytope,
                     EvaluatorError, GeometryInfeasible, NoBoundExists, NonPositiveDwell,
                     RobSTCError)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_INVARIANT = 0, 1, 2, 3, 4
OUT_ENV = "ROBSTC_OUT"
HYPOTHESIS_ERRORS = (NonPositiveDwell, EmptyPolytope, NoBoundExists, GeometryInfeasible,
                     AccuracyInsufficient, DomainError, EvaluatorError)

# stored reference numbers of the three case studies: (value, relative tolerance)
REFERENCE = {
    ("train", "eps_min"): (0.006, 0.20),
    ("train", "field_required_accuracy"): (0.04, 0.25),
    ("cubic3d", "eps_min"): (3.5e-4, 0.20),
    ("cubic3d", "r_tilde"): (0.347, 0.015),
    ("lotka_volterra", "eps_min"): (1.3e-4, 0.20),
}


def _common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--scenario", help="train, cubic3d or lotka_volterra")
    p.add_argument("--eps", type=float, help="sensor accuracy")
    p.add_argument("--r", type=float, help="target-ball radius")
    p.add_argument("--r-star", dest="r_star", type=float, help="core-ball radius")
    p.add_argument("--alpha", type=float, help="decay relaxation factor in (0, 1)")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--strategy", choices=("midpoint", "chebyshev", "mincost"))
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./robstc_out)")
    p.add_argument("--grid", type=int, help="grid points per axis")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robstc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="simulate the closed loop")
    _common(run)
    run.add_argument("--noise", choices=("uniform-in-ball", "sphere-surface",
                                         "adversarial-radial"))
    run.add_argument("--horizon", type=float, help="simulation horizon T")
    run.add_argument("--step", type=float, help="integrator step h")
    run.add_argument("--anchor", choices=("model", "measurement", "hold"))
    run.add_argument("--ic", type=int, help="index of a single initial condition")
    run.add_argument("--no-refresh", action="store_true", help="keep the initial bounds")
    run.add_argument("--allow-infeasible-eps", action="store_true",
                     help="simulate even if eps exceeds the field requirement")
    fld = sub.add_parser("field", help="sample the maximum admissible error")
    _common(fld)
    ver = sub.add_parser("verify", help="check the scheme's hypotheses")
    _common(ver)
    rep = sub.add_parser("reproduce", help="rerun the three case studies")
    _common(rep)
    rep.add_argument("--skip-sim", action="store_true", help="bounds only, no simulations")
    rpt = sub.add_parser("report", help="tabulate run summaries in the output directory")
    _common(rpt)
    return ap


def _out_dir(args, cfg_out=None) -> str:
    d = args.out or cfg_out or os.environ.get(OUT_ENV) or "robstc_out"
    os.makedirs(d, exist_ok=True)
    return d


def spec_from_args(args, default="train"):
    cfg = scenarios.load_config(args.config) if args.config else {}
    spec, cfg_out = scenarios.spec_from_config(
        {**cfg, "scenario": args.scenario or cfg.get("scenario") or default})
    kw = {k: getattr(args, k) for k in ("eps", "r", "r_star", "alpha")
          if getattr(args, k, None) is not None}
    simkw = {}
    if getattr(args, "seed", None) is not None:
        simkw["seed"] = args.seed
    if getattr(args, "strategy", None):
        simkw["strategy"] = args.strategy
    for flag, key in (("noise", "noise"), ("horizon", "T"), ("step", "h"), ("anchor", "anchor")):
        if getattr(args, flag, None) is not None:
            simkw[key] = getattr(args, flag)
    if getattr(args, "no_refresh", False):
        simkw["refresh"] = False
    if getattr(args, "allow_infeasible_eps", False):
        kw["allow_infeasible_eps"] = True
    if getattr(args, "grid", None):
        kw["grid"] = dataclasses.replace(spec.grid, points_per_axis=args.grid)
    try:
        if simkw:
            kw["sim"] = dataclasses.replace(spec.sim, **simkw)
        spec = dataclasses.replace(spec, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec, cfg_out


def cmd_run(args) -> int:
    spec, cfg_out = spec_from_args(args)
    out = _out_dir(args, cfg_out)
    prep = scenarios.prepare(spec)
    traces = scenarios.simulate(prep, index=args.ic)
    code = EXIT_OK
    start = 0 if args.ic is None else args.ic
    for i, tr in enumerate(traces, start=start):
        stem = os.path.join(out, f"trace_{spec.name}_{i}")
        tr.to_csv(stem + ".csv")
        s = tr.write_summary(stem + ".json", prep.geometry, prep.lyap.x_star)
        print(f"{spec.name}[{i}]: steps={s['steps']} measurements={s['measurement_count']} "
              f"entry={s.get('entry_time')} contained={s.get('contained')} "
              f"violations={s['violations']} failure={s['failure']}")
        if tr.failure:
            print(f"  failure: {tr.failure}", file=sys.stderr)
            code = max(code, EXIT_HYPOTHESIS)
        elif s["violations"] or (spec.sim.T > 0 and not s.get("contained")):
            for m in tr.messages[:5]:
                print(f"  {m}", file=sys.stderr)
            code = EXIT_INVARIANT if code == EXIT_OK else code
    return code


def cmd_field(args) -> int:
    spec, cfg_out = spec_from_args(args)
    out = _out_dir(args, cfg_out)
    prep = scenarios.prepare(spec, with_field=False)
    n = prep.system.n
    if n > 3:
        raise ConfigError("full grids need n <= 3; supply explicit field points in code")
    t0 = time.perf_counter()
    fld = bounds.eps_bar_field(prep.system, prep.lyap, prep.ctx)
    path = os.path.join(out, f"field_{spec.name}.csv")
    write_field_csv(path, fld, n)
    if len(fld.points) == 0:
        print("warning: the queried region lies inside the core ball; empty grid",
              file=sys.stderr)
    else:
        print(f"{spec.name}: {len(fld.points)} points, minimum {fld.minimum:.6g} at "
              f"{np.round(fld.argmin, 6).tolist()}, required accuracy "
              f"{fld.required_accuracy:.6g} ({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


def write_field_csv(path, fld, n):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x_{i + 1}" for i in range(n)] + ["eps_bar", "eps0", "eps1",
                                                        "winning_subset"])
        for x, e, e0, e1, w in zip(fld.points, fld.eps_bar, fld.eps0, fld.eps1, fld.winning):
            wsub = "" if w is None else " ".join(str(i + 1) for i in w)
            wr.writerow([repr(float(v)) for v in x] + [repr(float(e)), repr(float(e0)),
                                                       repr(float(e1)), wsub])
        wr.writerow(["minimum", repr(float(fld.minimum))] + [""] * (n + 2))


def cmd_verify(args) -> int:
    spec, cfg_out = spec_from_args(args)
    out = _out_dir(args, cfg_out)
    rep = scenarios.verify_assumptions(spec)
    print(rep.format())
    with open(os.path.join(out, f"verify_{spec.name}.json"), "w", encoding="utf-8") as fh:
        json.dump(rep.as_dict(), fh, indent=2, default=float)
    informational = {"eps_below_eps_min", "eps_below_field_requirement"}
    required_ok = all(v.passed for v in rep.verdicts if v.name not in informational)
    return EXIT_OK if required_ok else EXIT_HYPOTHESIS


def _row(scn, quantity, value):
    ref, tol = REFERENCE.get((scn, quantity), (None, None))
    ok = None if ref is None else bool(abs(value - ref) <= tol * ref)
    return dict(scenario=scn, quantity=quantity, value=value, reference=ref,
                tolerance=tol, passed=ok)


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    rows = []
    for name in ("train", "cubic3d", "lotka_volterra"):
        spec = scenarios.get_scenario(name)
        if args.grid:
            spec = dataclasses.replace(spec, grid=dataclasses.replace(
                spec.grid, points_per_axis=args.grid))
        prep = scenarios.prepare(spec)
        rows.append(_row(name, "eps_min", prep.eps_min))
        rows.append(_row(name, "field_required_accuracy", prep.field.required_accuracy))
        rows.append(_row(name, "r_tilde", prep.geometry.r_tilde))
        if not args.skip_sim:
            try:
                traces = scenarios.simulate(prep)
                ok = all(t.failure is None and t.violation_count == 0
                         and t.summary(prep.geometry, prep.lyap.x_star)["contained"]
                         for t in traces)
            except RobSTCError:
                ok = False
            rows.append(dict(scenario=name, quantity="containment", value=float(ok),
                             reference=1.0, tolerance=0.0, passed=ok))
    with open(os.path.join(out, "reproduce.json"), "w", encoding="utf-8") as fh:
        json.dump(dict(schema_version=1, rows=rows), fh, indent=2)
    print(f"{'scenario':<16}{'quantity':<26}{'value':>12}{'reference':>12}  verdict")
    for r in rows:
        ref = "" if r["reference"] is None else f"{r['reference']:.4g}"
        verdict = {True: "PASS", False: "FAIL", None: "info"}[r["passed"]]
        print(f"{r['scenario']:<16}{r['quantity']:<26}{r['value']:>12.4g}{ref:>12}  {verdict}")
    return EXIT_MISMATCH if any(r["passed"] is False for r in rows) else EXIT_OK


def cmd_report(args) -> int:
    out = _out_dir(args)
    files = sorted(glob.glob(os.path.join(out, "trace_*.json")))
    if not files:
        print(f"no run summaries in {out}", file=sys.stderr)
        return EXIT_OK
    print(f"{'run':<28}{'meas':>6}{'entry':>10}{'contained':>11}{'viol':>6}  failure")
    for f in files:
        with open(f, encoding="utf-8") as fh:
            s = json.load(fh)
        entry = "-" if s.get("entry_time") is None else f"{s['entry_time']:.3f}"
        print(f"{os.path.basename(f)[6:-5]:<28}{s['measurement_count']:>6}{entry:>10}"
              f"{str(s.get('contained')):>11}{s['violations']:>6}  {s.get('failure') or ''}")
    return EXIT_OK


COMMANDS = dict(run=cmd_run, field=cmd_field, verify=cmd_verify, reproduce=cmd_reproduce,
                report=cmd_report)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HYPOTHESIS_ERRORS as exc:
        print(f"hypothesis failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS


if __name__ == "__main__":
    sys.exit(main())
