"""``feederflow`` command line: validate, solve, expand, impact, sweep, compare."""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .density import CoarseGrainSpec, coarse_grain
from .errors import FeederflowError
from .io import (ConfigError, atomic_write_text, dump_json, field_csv, load_case, profile_csv,
                 resolve)
from .metrics import convergence_report, format_table, impact_sweep, rows_to_csv
from .network import discretize, validate
from .nonlinear import SolveOptions, solve_tpbv
from .perturbation import ImpactSpec, assemble, ev_impact, expand

log = logging.getLogger("feederflow")

DEFAULT_SIGMA_KM = 0.05


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feederflow", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("network", help="network JSON file (bundled names such as "
                                        "simple5km.json are found automatically)")
    common.add_argument("--grid-h-km", type=_positive(float), default=0.002)
    common.add_argument("--sigma-km", type=_positive(float), default=None,
                        help=f"Gaussian width; default from the file, else {DEFAULT_SIGMA_KM}")
    common.add_argument("--epsilon", type=_positive(float), default=0.1,
                        help="loading magnitude used to scale the densities")
    common.add_argument("--out", default="feederflow_out", help="output directory")
    common.add_argument("--tol", type=_positive(float), default=1e-10, help="Newton tolerance")
    common.add_argument("--rhs", choices=("printed", "consistent"), default="printed",
                        help="perturbation right-hand sides")

    sub.add_parser("validate", parents=[common], help="check the network and report violations")
    sub.add_parser("solve", parents=[common], help="nonlinear profile")
    p = sub.add_parser("expand", parents=[common], help="perturbation orders and assembled series")
    p.add_argument("--order", type=_positive(int), default=4)
    p = sub.add_parser("impact", parents=[common], help="EV impact from the series")
    p.add_argument("--order", type=_positive(int), default=4)
    p.add_argument("--eps-ev-fraction", type=float, default=0.4)
    p = sub.add_parser("sweep", parents=[common], help="impact error over EV fractions")
    p.add_argument("--order", type=_positive(int), default=4)
    p.add_argument("--fractions", type=_float_list, default=[0.3, 0.4, 0.5, 0.6])
    p = sub.add_parser("compare", parents=[common], help="series vs nonlinear per order")
    p.add_argument("--orders", type=_int_list, default=[1, 2, 3, 4])
    return parser


def _setup(args):
    case = load_case(args.network)
    problems = validate(case.network)
    if problems:
        raise _ValidationFailed(problems)
    grid = discretize(case.network, args.grid_h_km)
    sigma = args.sigma_km or case.sigma_km or DEFAULT_SIGMA_KM
    density = coarse_grain(case.injections, CoarseGrainSpec(sigma), grid, args.epsilon)
    return case, grid, density, sigma


class _ValidationFailed(FeederflowError):
    code = "validation"

    def __init__(self, violations):
        self.violations = violations
        super().__init__(f"{len(violations)} network violation(s)")


def _metadata(args):
    return {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__, "network": str(resolve(args.network))}


def _settings(args, sigma):
    return {"grid_h_km": args.grid_h_km, "sigma_km": sigma, "epsilon": args.epsilon,
            "rhs": args.rhs, "newton_tol": args.tol}


def _cmd_validate(args, out):
    case = load_case(args.network)
    problems = validate(case.network)
    report = {"valid": not problems, "violations": [
        {"kind": v.kind, "entity": v.entity, "detail": v.detail} for v in problems]}
    print(dump_json(report), end="")
    return 0 if not problems else 1


def _cmd_solve(args, out):
    case, grid, density, sigma = _setup(args)
    prof = solve_tpbv(case.network, density, grid, SolveOptions(newton_tol=args.tol))
    files = [atomic_write_text(out / "profile.csv", profile_csv(prof))]
    report = {"metadata": _metadata(args), "settings": _settings(args, sigma),
              "iterations": prof.info["iterations"], "residual": prof.info["residual"],
              "residuals": prof.info["residuals"], "initial_guess": prof.info["initial_guess"],
              "v_min": float(prof.v.min())}
    files.append(atomic_write_text(out / "solve_report.json", dump_json(report)))
    return files


def _cmd_expand(args, out):
    case, grid, density, sigma = _setup(args)
    series = expand(case.network, density, grid, args.order, args.rhs)
    files = []
    for n in range(1, args.order + 1):
        f = series.order(n)
        cols = {"theta_rad": f.theta, "v_pu": f.v, "s_pu": f.s, "w_pu_per_km": f.w}
        cols = {k: (grid.zeros() * float("nan") if a is None else a) for k, a in cols.items()}
        text = field_csv(grid, cols).replace("nan", "")
        files.append(atomic_write_text(out / f"order_{n}.csv", text))
    full = args.order <= series.max_full_order
    prof = assemble(series, args.epsilon, args.order, allow_partial=True)
    files.append(atomic_write_text(out / "assembled.csv", profile_csv(prof, theta=full, s=full)))
    return files


def _cmd_impact(args, out):
    case, grid, density, sigma = _setup(args)
    series = expand(case.network, density, grid, args.order, args.rhs)
    spec = ImpactSpec.from_fraction(args.epsilon, args.eps_ev_fraction, args.order)
    res = ev_impact(series, spec)
    files = [atomic_write_text(out / "impact.csv", field_csv(grid, {"delta_v_pu": res.delta_v}))]
    summary = {"metadata": _metadata(args), "settings": _settings(args, sigma),
               "eps_ev": spec.eps_ev, "eps_load": spec.eps_load, "order": spec.order,
               "max_abs": res.max_abs,
               "location": {"segment": res.location_of_max[0], "x_km": res.location_of_max[1]}}
    files.append(atomic_write_text(out / "impact_summary.json", dump_json(summary)))
    return files


def _cmd_sweep(args, out):
    case, grid, density, sigma = _setup(args)
    rows = impact_sweep(case.network, density, grid, args.fractions, args.order, args.rhs,
                        SolveOptions(newton_tol=args.tol))
    print(format_table(rows))
    return [atomic_write_text(out / "sweep.csv", rows_to_csv(rows))]


def _cmd_compare(args, out):
    case, grid, density, sigma = _setup(args)
    rows = convergence_report(case.network, density, grid, args.orders, args.rhs,
                              SolveOptions(newton_tol=args.tol))
    table = format_table(rows)
    print(table)
    return [atomic_write_text(out / "compare.csv", rows_to_csv(rows)),
            atomic_write_text(out / "compare.txt", table + "\n")]


COMMANDS = {"validate": _cmd_validate, "solve": _cmd_solve, "expand": _cmd_expand,
            "impact": _cmd_impact, "sweep": _cmd_sweep, "compare": _cmd_compare}


def _error(code, message, **extra):
    print(json.dumps({"error": {"code": code, "message": message, **extra}}, sort_keys=True))
    return 1


def run(argv=None) -> int:
    level = os.environ.get("FEEDERFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        result = COMMANDS[args.command](args, out)
    except _ValidationFailed as exc:
        return _error(exc.code, str(exc), violations=[
            {"kind": v.kind, "entity": v.entity, "detail": v.detail} for v in exc.violations])
    except ConfigError as exc:
        return _error(exc.code, str(exc), location=exc.location)
    except FeederflowError as exc:
        return _error(exc.code, str(exc))
    except OSError as exc:
        return _error("io", str(exc))
    except ValueError as exc:
        return _error("invalid_argument", str(exc))
    if isinstance(result, int):
        return result
    for path in result:
        log.info("wrote %s", path)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
