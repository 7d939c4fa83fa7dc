"""Command line entry point.

Exit codes: 0 success, 1 oracle tolerance breach (``verify``), 2 unreadable or
invalid scenario, 3 market failure where a path was requested.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import equilibrium as eq
from . import runner, welfare
from .model import validate
from .scenario import Scenario, ScenarioError, dump, load

OUT_ENV = "INSURANCE_EQ_OUT"
EXIT_OK, EXIT_BREACH, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2, 3
CSV_HEADER = ("s", "quantity", "value", "series")


def _num(v) -> str:
    return format(float(v), ".17g")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def write_json(path: Path, obj) -> None:
    write_atomic(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def write_long_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s, q, v, series in rows:
        w.writerow((_num(s), q, _num(v), series))
    write_atomic(path, buf.getvalue())


def _load_checked(path: str, grid: int | None = None, seed: int | None = None) -> Scenario:
    sc = load(path)
    if grid is not None:
        sc = sc.with_grid(grid)
    if seed is not None:
        sc = sc.with_seed(seed)
    result = validate(sc.params)
    if not result.ok:
        raise ScenarioError([f"{path}: {m}" for m in result.messages()])
    p = sc.params
    if sc.eps is not None and not (0 <= sc.eps <= p.eps_bar):
        raise ScenarioError([f"{path}: field 'eps': must lie in [0, eps_bar = {p.eps_bar}]"])
    return sc


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "out")


def cmd_run(args) -> int:
    sc = _load_checked(args.scenario, args.grid, args.seed)
    out = _out_dir(args.out)
    p = sc.params
    write_atomic(out / "scenario.txt", dump(sc))

    regime = runner.regime_report(sc)
    write_json(out / "regime.json", regime)
    print(f"regime: {regime['regime']}" + (f" (tau_f = {regime['tau_f']:.10g})" if regime["tau_f"] is not None else ""))
    code = EXIT_OK

    if "path" in sc.outputs:
        if regime["regime"] == "MarketFailure":
            print("no equilibrium path: market failure", file=sys.stderr)
            code = EXIT_FAILURE
        else:
            grid = eq.make_grid(p, sc.grid_points)
            q = runner.path_quantities(p, sc.eps, grid)
            label = "baseline" if sc.eps is None else f"eps={sc.eps:g}"
            write_long_csv(out / "path.csv", runner.long_rows(grid, {label: q}))
            if regime.get("tau_n") is not None:
                print(f"tau_n = {regime['tau_n']:.10g}")

    if "statics" in sc.outputs:
        write_json(out / "statics.json", runner.statics_report(sc))

    if "optimal_eps" in sc.outputs and not p.perfect_correlation:
        opt = welfare.optimal_epsilon(p, eq.make_grid(p, sc.grid_points))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("s", "eps_star", "case", "rho_bar", "rho_lo"))
        for row in zip(opt.grid, opt.eps_star, opt.case, opt.rho_bar_s, opt.rho_lo_s):
            w.writerow((_num(row[0]), _num(row[1]), int(row[2]), _num(row[3]), _num(row[4])))
        write_atomic(out / "optimal_eps.csv", buf.getvalue())
        write_json(out / "optimal_eps.json", {
            "constant": opt.constant,
            "eps_star": sorted({float(v) for v in opt.eps_star}),
            "cases": {int(c): welfare.CASE_LABELS[int(c)] for c in np.unique(opt.case)},
            "rho_bar_t0": float(opt.rho_bar_s[0]),
            "rho_lo_t0": float(opt.rho_lo_s[0]),
            "notes": opt.notes,
        })

    if "oracle" in sc.outputs:
        rep, _ = runner.run_oracle_suite(sc)
        write_json(out / "oracle.json", rep.as_dict())
        if not rep.ok:
            code = code or EXIT_BREACH
    return code


def cmd_figure(args) -> int:
    sc = _load_checked(args.scenario, args.grid)
    out = _out_dir(args.out)
    try:
        grid, family = runner.figure_family(sc, args.figure)
    except eq.RegimeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILURE
    target = out / f"figure{args.figure}.csv"
    write_long_csv(target, runner.long_rows(grid, family))
    print(f"wrote {target}")
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _load_checked(args.scenario, args.grid, args.seed)
    rep, regime = runner.run_oracle_suite(sc)
    print(f"regime: {regime['regime']}")
    if regime["regime"] != "PositiveMarket":
        if regime.get("tau_f") is not None:
            print(f"tau_f = {regime['tau_f']:.10g}")
        return EXIT_FAILURE if regime["regime"] == "MarketFailure" else EXIT_OK
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.ok else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="insurance-eq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a scenario and write the requested outputs")
    r.add_argument("scenario")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    r.add_argument("--grid", type=int, help="number of time-grid points")
    r.add_argument("--seed", type=int, help="Monte Carlo seed")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("figure", help="emit the curve family of one figure as long-format CSV")
    f.add_argument("scenario")
    f.add_argument("--figure", type=int, choices=(2, 3, 4, 5), required=True)
    f.add_argument("--out")
    f.add_argument("--grid", type=int)
    f.set_defaults(func=cmd_figure)

    v = sub.add_parser("verify", help="run the oracle suite and print one line per check")
    v.add_argument("scenario")
    v.add_argument("--grid", type=int)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(problem, file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
