"""Command-line front end: ``rectent <subcommand> [options]``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage
error.  Output is a CSV (``--format csv``) or an aligned table, written to
standard output or to ``--out``.  Coordinates in ``--coords`` are 1-based.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import aep, coding, entropy as ent, ratedistortion as rd, sources
from .csvio import csv_text, format_number
from .geometry import DegeneracyError, QuadratureError, RootFindingError

SUBCOMMANDS = ("entropy", "marginal", "chain", "mi", "aep", "code", "gamma", "slb",
               "envelope", "rdupper", "figures")
LOG2E = 1.0 / math.log(2.0)


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rectent",
                                description="Entropy, coding and rate-distortion bounds "
                                            "for rectifiable random variables.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--source", default="circle:uniform", help="catalog source string")
    p.add_argument("--coords", default=None,
                   help="1-based comma-separated coordinates of the projected variable")
    p.add_argument("--delta", default=None, help="cell measure bound(s), comma separated")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="block length or quantizer size")
    p.add_argument("--d", type=float, default=1e-2, help="distortion level D")
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--s-points", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="quadrature tolerance")
    p.add_argument("--out", default=None, help="output file (figures: output directory)")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--bits", action="store_true", help="report entropies in bits")
    return p


# ---------------------------------------------------------------------------
# helpers


def _table_text(header, rows) -> str:
    cells = [list(header)] + [[format_number(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
                   for r in cells)


def _emit(args, header, rows) -> None:
    rows = [list(r) for r in rows]
    text = csv_text(header, rows) if args.format == "csv" else _table_text(header, rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


def _source(args):
    try:
        return sources.from_catalog(args.source)
    except sources.CatalogError as exc:
        raise UsageError(str(exc)) from None


def _coords(args, src, default=None):
    if args.coords is None:
        if default is None:
            raise UsageError("--coords is required for this subcommand")
        return default
    try:
        c = [int(v) - 1 for v in args.coords.split(",")]
    except ValueError:
        raise UsageError(f"bad --coords {args.coords!r}") from None
    if not c or min(c) < 0 or max(c) >= src.ambient_dim or len(set(c)) != len(c):
        raise UsageError(f"--coords must name distinct coordinates in 1..{src.ambient_dim}")
    return c


def _unit(args):
    return ("bits", LOG2E) if args.bits else ("nats", 1.0)


def _deltas(args, default):
    if args.delta is None:
        return default
    try:
        vals = [float(v) for v in args.delta.split(",")]
    except ValueError:
        raise UsageError(f"bad --delta {args.delta!r}") from None
    if any(not v > 0 for v in vals):
        raise UsageError("--delta values must be positive")
    return vals


def _s_grid(args, lo, hi, points, log=True):
    lo = lo if args.s_min is None else args.s_min
    hi = hi if args.s_max is None else args.s_max
    points = points if args.s_points is None else args.s_points
    if points < 2 or not (0 <= lo < hi) or (log and lo <= 0):
        raise UsageError("need 0 < s-min < s-max and s-points >= 2")
    return rd.log_grid(lo, hi, points) if log else np.linspace(lo, hi, points)


def _require_circle(src):
    if not src.name.startswith("circle:"):
        raise UsageError("this subcommand needs a circle source (circle:uniform or "
                         "circle:vonmises:<kappa>)")


# ---------------------------------------------------------------------------
# subcommands


def cmd_entropy(args):
    src = _source(args)
    unit, k = _unit(args)
    rows = []
    if src.analytic_entropy is not None:
        rows.append(("analytic", k * src.analytic_entropy, 0.0, 0))
    q = ent.entropy_quadrature(src, args.tol)
    rows.append(("quadrature", k * q.value, 0.0, 0))
    if args.samples:
        mc = ent.entropy_monte_carlo(src, args.seed, args.samples)
        rows.append(("monte_carlo", k * mc.value, k * mc.std_error, mc.n_samples))
    _emit(args, ("method", f"entropy_{unit}", "std_error", "n_samples"), rows)


def cmd_marginal(args):
    src = _source(args)
    c = _coords(args, src)
    unit, k = _unit(args)
    rows = [("coarea", k * ent.marginal_entropy(src, c, args.tol).value)]
    if len(c) == 1 and src.dim == 1:
        rows.append(("direct", k * ent.marginal_entropy_direct(src, c[0]).value))
    _emit(args, ("route", f"marginal_entropy_{unit}"), rows)


def cmd_chain(args):
    src = _source(args)
    c = _coords(args, src)
    unit, k = _unit(args)
    d = ent.joint_decomposition(src, c, args.tol)
    rows = [("joint", k * d.joint.value), ("marginal", k * d.marginal_y.value),
            ("conditional", k * d.conditional_x_given_y.value),
            ("correction", k * d.jacobian_correction.value),
            ("residual", k * d.residual)]
    _emit(args, ("term", unit), rows)


def cmd_mi(args):
    src = _source(args)
    unit, k = _unit(args)
    if len(src.factors) == 2 and args.coords is None:
        s1, s2 = src.factors
    else:
        y = _coords(args, src, default=[src.ambient_dim - 1])
        x = [i for i in range(src.ambient_dim) if i not in y]
        if x + y != list(range(src.ambient_dim)):
            raise UsageError("--coords must be the trailing block of coordinates")
        s1, s2 = ent.marginal_source(src, x), ent.marginal_source(src, y)
    dims = (s1.dim, s2.dim, src.dim)
    value = ent.mutual_information(s1, s2, src)
    _emit(args, ("m1", "m2", "m", f"mutual_information_{unit}"),
          [(*dims, value if math.isinf(value) else k * value)])


def cmd_aep(args):
    src = _source(args)
    unit, k = _unit(args)
    n = 50 if args.n is None else args.n
    eps = 0.1 if args.epsilon is None else args.epsilon
    trials = 10_000 if args.samples is None else args.samples
    rep = aep.empirical_typicality(src, n, eps, trials, args.seed)
    header = ["n", "epsilon", "trials", "empirical_prob", f"entropy_{unit}"]
    row = [n, eps, trials, rep.empirical_prob, k * rep.entropy_ref]
    if n in (1, 2):
        sw = aep.measure_sandwich(src, n, eps, report=rep, entropy_ref=rep.entropy_ref)
        header += ["measure", "lower", "upper", "delta", "sandwich_holds"]
        row += [sw.measure, sw.lower, sw.upper, sw.delta, str(sw.holds).lower()]
    _emit(args, header, [row])


def cmd_code(args):
    src = _source(args)
    n = 1 if args.n is None else args.n
    eps = 0.05 if args.epsilon is None else args.epsilon
    deltas = _deltas(args, [2 * math.pi / 2 ** j for j in range(1, 9)])
    reports = [coding.verify_codeword_bounds(src, d, n, eps) for d in deltas]
    _emit(args, coding.CODING_COLUMNS, coding.coding_rows(reports))


def cmd_gamma(args):
    _require_circle(_source(args))
    grid = _s_grid(args, 1e-2, 5e3, 61)
    gs = rd.gamma_curve(grid)
    _emit(args, ("s", "y_star", "gamma"), [(g.s, g.y_star[0], g.gamma) for g in gs])


def _reference_entropy(src):
    return aep.reference_entropy(src)


def cmd_slb(args):
    src = _source(args)
    _require_circle(src)
    grid = _s_grid(args, 1.0, 94.0, 94, log=False)
    h = _reference_entropy(src)
    r = rd.slb_sweep(h, args.d, rd.gamma_curve(grid))
    _emit(args, ("s", "R_SLB"), zip(grid, r))


def _envelope(args, src):
    h = _reference_entropy(src)
    D = np.unique(np.concatenate([rd.log_grid(5e-5, 1.0, 121), [1e-2]]))
    grid = _s_grid(args, 1e-2, 1e5, 241)
    return rd.slb_envelope(h, src.support.measure(), D, grid)


def cmd_envelope(args):
    src = _source(args)
    _require_circle(src)
    curve = _envelope(args, src)
    _emit(args, ("D", "R", "branch"), zip(curve.D, curve.R, curve.branch))


def cmd_rdupper(args):
    if args.n is not None:
        if args.n < 1:
            raise UsageError("--n must be at least 1")
        points = [rd.rd_upper_bound(args.n)]
    else:
        points = rd.rd_upper_curve(1024)
    _emit(args, ("D", "R"), [(p.D_bar, p.R) for p in points])


def cmd_figures(args):
    src = _source(args)
    _require_circle(src)
    if src.name != "circle:uniform":
        raise UsageError("figures reproduce the uniform circle only")
    if args.out is None:
        raise UsageError("figures needs --out DIRECTORY")
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"{out} is not an existing directory")
    h = _reference_entropy(src)
    gs = rd.gamma_curve(rd.log_grid(1e-2, 5e3, 61))
    rd.write_gammas_csv(gs, out / "gammas.csv")
    s_lin = np.linspace(1.0, 94.0, 94)
    rd.write_slb_sweep_csv(s_lin, rd.slb_sweep(h, 1e-2, rd.gamma_curve(s_lin)),
                           out / "slb_d01.csv")
    curve = _envelope(args, src)
    rd.write_envelope_csv(curve, out / "envelope.csv")
    upper = rd.rd_upper_curve(1024)
    rd.write_upper_csv(upper, out / "upper.csv")
    rd.write_gaps_csv(rd.gap_report(curve, upper), out / "gaps.csv")
    names = ("gammas.csv", "slb_d01.csv", "envelope.csv", "upper.csv", "gaps.csv")
    sys.stdout.write("".join(f"{out / n}\n" for n in names))


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.out is not None and args.subcommand != "figures":
        parent = Path(args.out).resolve().parent
        if not parent.is_dir():
            print(f"rectent: error: directory {parent} does not exist", file=sys.stderr)
            return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.subcommand](args)
    except (UsageError, NotImplementedError) as exc:
        print(f"rectent: error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, RootFindingError, DegeneracyError, ArithmeticError,
            AssertionError) as exc:
        print(f"rectent: numerical failure in {args.subcommand}: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rectent: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
