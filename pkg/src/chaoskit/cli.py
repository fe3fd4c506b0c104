"""
chaoskit command line.

Subcommands write CSV tables plus a ``manifest.cfg`` holding every
parameter; feeding the manifest back through ``--config`` reproduces the
run.  Exit status: 0 success, 2 invalid input, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .asymptotics import (
    alpha_index,
    default_n_max,
    error_rate,
    occupation_A,
    occupation_error_norm,
    rate_fit,
    z_table,
)
from .clt import (
    clt_report,
    limit_variance,
    sample_errors,
    scaled_walk_samples,
    write_clt_csv,
    write_samples_csv,
)
from .functionals import NotSquareIntegrable, build_additive, coeffs_1d, terminal_spectrum
from .hermite import ConvergenceError
from .payoffs import parse_payoff
from .space import FunctionalSpec, InfeasibleError, TimeGrid, project_chaos, write_spectrum_csv

COMMANDS = ("chaos", "error-rate", "occupation", "alpha", "clt")

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3


class ValidationError(ValueError):
    """Bad user input."""


# ------------------------------------------------------------------ parsing

def parse_n_list(text: str) -> list[int]:
    """
    Parse ``"2,4,8"`` or ``"4..1024"`` (doubling) or a comma mix of both.

    >>> parse_n_list("4..32")
    [4, 8, 16, 32]
    """
    out: list[int] = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ".." in item:
                lo, hi = (int(v) for v in item.split(".."))
                if lo < 1 or hi < lo:
                    raise ValueError
                n = lo
                while n <= hi:
                    out.append(n)
                    n *= 2
            else:
                n = int(item)
                if n < 1:
                    raise ValueError
                out.append(n)
        except ValueError:
            raise ValidationError(f"bad N-list entry {item!r}; use a comma list or a..b") from None
    if not out:
        raise ValidationError("empty N-list")
    return sorted(set(out))


def parse_int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad integer list {text!r}") from None
    if not vals:
        raise ValidationError("empty integer list")
    return vals


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    cfg: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-")] = value
    return cfg


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value file supplying any flag")
    p.add_argument("--out", default="chaoskit_out", help="output directory")
    p.add_argument("--T", type=float, default=1.0, help="horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaoskit",
        description="Discrete Clark-Ocone expansions and martingale-representation errors.",
    )
    parser.add_argument("--version", action="version", version=f"chaoskit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("chaos", help="project a functional and dump its chaos spectrum")
    _add_common(p)
    p.add_argument("--payoff", help="heaviside | call:<K> | power:<p> | sin")
    p.add_argument("--kind", default="terminal", choices=("terminal", "additive"),
                   help="F(W_T), or sum_i F(W_{t_i}) dt")
    p.add_argument("--method", default="closed", choices=("closed", "tensor"),
                   help="closed-form spreading or tensor quadrature")
    p.add_argument("--N-list", dest="N_list", default="2")
    p.add_argument("--n-max", dest="n_max", type=int, default=6)
    p.add_argument("--quad-order", dest="quad_order", type=int, default=64)

    p = sub.add_parser("error-rate", help="1-Mart.Err of a terminal payoff against N")
    _add_common(p)
    p.add_argument("--payoff", help="heaviside | call:<K> | power:<p> | sin")
    p.add_argument("--N-list", dest="N_list", default="2..64")
    p.add_argument("--n-max", dest="n_max", type=int, default=0,
                   help="chaos truncation (0 picks one per N)")

    p = sub.add_parser("occupation", help="occupation-time error and Z table")
    _add_common(p)
    p.add_argument("--N-list", dest="N_list", default="4..1024")
    p.add_argument("--k-max", dest="k_max", type=int, default=2001)

    p = sub.add_parser("alpha", help="finite-dimensionality index of the occupation sum")
    _add_common(p)
    p.add_argument("--N-list", dest="N_list", default="16..256")
    p.add_argument("--degrees", default="5", help="comma list of chaos degrees n")
    p.add_argument("--form", default="literal", choices=("literal", "cancelled"),
                   help="keep or drop the H_{n-1}(0)^2 prefactor of A_l")

    p = sub.add_parser("clt", help="Monte Carlo second moments of scaled error levels")
    _add_common(p)
    p.add_argument("--payoff", help="heaviside | call:<K> | power:<p> | sin")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--p-max", dest="p_max", type=int, default=1)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=513)
    p.add_argument("--quad-order", dest="quad_order", type=int, default=64)
    return parser


# ----------------------------------------------------------------- helpers

def _threads() -> int:
    raw = os.environ.get("CHAOSKIT_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ValidationError(f"CHAOSKIT_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_fit(path: Path, report):
    _write_rows(path, ["fit", "slope", "intercept", "max_residual", "from_N"], [
        ["tail_half", _fmt(report.slope), _fmt(report.intercept), _fmt(report.max_residual),
         report.fit_from],
        ["full", _fmt(report.full_slope), _fmt(report.full_intercept),
         _fmt(report.full_max_residual), report.points[0][0]],
    ])


def _rate_rows(report):
    return [[N, _fmt(e), _fmt(t)] for N, e, t in report.points]


def _require_payoff(args):
    if not args.payoff:
        raise ValidationError("--payoff is required")
    return parse_payoff(args.payoff)


def _check_positive(**vals):
    for name, v in vals.items():
        if v is None or not v > 0 or (isinstance(v, float) and not math.isfinite(v)):
            raise ValidationError(f"--{name} must be positive, got {v}")


# ---------------------------------------------------------------- commands

def cmd_chaos(args, out: Path, pool):
    F = _require_payoff(args)
    _check_positive(T=args.T, quad_order=args.quad_order)
    if args.n_max < 0:
        raise ValidationError("--n-max must be non-negative")
    for N in parse_n_list(args.N_list):
        grid = TimeGrid(N, args.T)
        if args.method == "tensor":
            spec = FunctionalSpec.terminal(F) if args.kind == "terminal" else FunctionalSpec.additive(F)
            x = project_chaos(spec, grid, args.n_max, args.quad_order)
        elif args.kind == "terminal":
            x = terminal_spectrum(coeffs_1d(F, args.T, args.n_max, args.quad_order), grid)
        else:
            x = build_additive(F, grid, args.n_max, args.quad_order)
        write_spectrum_csv(x, out / f"spectrum_N{N}.csv")
        print(f"N={N}: {len(x)} coefficients, E[X^2]={x.norm_sq():.6g}")


def cmd_error_rate(args, out: Path, pool):
    F = _require_payoff(args)
    _check_positive(T=args.T)
    Ns = parse_n_list(args.N_list)
    if args.n_max < 0:
        raise ValidationError("--n-max must be non-negative")
    fixed = args.n_max or None
    report = error_rate(lambda N: coeffs_1d(F, args.T, fixed or default_n_max(F, N)), Ns, pool)
    _write_rows(out / "rate.csv", ["N", "err_sq", "tail_bound"], _rate_rows(report))
    _write_fit(out / "fit.csv", report)
    print(f"slope (largest half) {report.slope:.6f}; full range {report.full_slope:.6f}")


def cmd_occupation(args, out: Path, pool):
    _check_positive(T=args.T)
    if args.k_max < 3:
        raise ValidationError("--k-max must be at least 3")
    Ns = parse_n_list(args.N_list)
    ests = list(pool.map(lambda N: occupation_error_norm(N, args.T, args.k_max), Ns))
    report = rate_fit([(N, e.value, e.tail_bound) for N, e in zip(Ns, ests)])
    _write_rows(out / "rate.csv", ["N", "err_sq", "tail_bound"], _rate_rows(report))
    _write_fit(out / "fit.csv", report)
    rows = z_table(Ns, range(2, args.k_max + 1), args.T)
    _write_rows(out / "z.csv", ["N", "k", "z", "bound"],
                [[N, k, _fmt(z), _fmt(b)] for N, k, z, b in rows])
    worst = max(z / b for _, _, z, b in rows)
    print(f"slope (largest half) {report.slope:.6f}; max Z/bound {worst:.4f}")


def cmd_alpha(args, out: Path, pool):
    Ns = parse_n_list(args.N_list)
    degrees = parse_int_list(args.degrees)
    if min(degrees) < 2:
        raise ValidationError("--degrees entries must be >= 2")
    cancelled = args.form == "cancelled"
    rows = []
    for n in degrees:
        vals = list(pool.map(lambda N: alpha_index(occupation_A(N, n, cancelled), n), Ns))
        rows.extend([N, n, _fmt(a)] for N, a in zip(Ns, vals))
    _write_rows(out / "alpha.csv", ["N", "n", "alpha"], rows)
    print(f"{len(rows)} index values written")


def cmd_clt(args, out: Path, pool):
    F = _require_payoff(args)
    _check_positive(T=args.T, N=args.N, samples=args.samples)
    if args.p_max < 0:
        raise ValidationError("--p-max must be non-negative")
    if args.samples < 3:
        raise ValidationError("--samples must be at least 3")
    if not 0 <= args.seed < 2**128:
        raise ValidationError("--seed must lie in [0, 2^128)")
    grid = TimeGrid(args.N, args.T)
    S = sample_errors(FunctionalSpec.terminal(F), grid, args.p_max, args.samples, args.seed)
    limits = [limit_variance(F, args.T, p, args.grid_points, args.quad_order).value
              for p in range(args.p_max + 1)]
    rep = clt_report(S, limits, args.N, args.seed)
    write_clt_csv(rep, out / "clt.csv")
    write_samples_csv(S, out / "samples.csv")
    P = args.p_max + 1
    _write_rows(out / "cross_cov.csv", ["p", "q", "cov", "se"],
                [[i, j, _fmt(rep.cross_cov[i, j]), _fmt(rep.cross_cov_se[i, j])]
                 for i in range(P) for j in range(i + 1, P)])
    walk = clt_report(scaled_walk_samples(grid, args.p_max, args.samples, args.seed),
                      [args.T] * P, args.N, args.seed)
    write_clt_csv(walk, out / "walk.csv")
    for p, v, e, l, z in rep.rows():
        print(f"p={p}: sample_var={v:.6g} se={e:.3g} limit={l:.6g} z={z:+.3f}")


HANDLERS = {
    "chaos": cmd_chaos,
    "error-rate": cmd_error_rate,
    "occupation": cmd_occupation,
    "alpha": cmd_alpha,
    "clt": cmd_clt,
}


def _manifest(path: Path, command: str, args, wall: float):
    skip = {"command", "config"}
    flags = {a.dest: a.option_strings[-1].lstrip("-")
             for a in build_parser()._subparsers._group_actions[0].choices[command]._actions
             if a.option_strings and a.dest not in ("help",)}
    lines = [
        "# chaoskit run manifest",
        f"# version = {__version__}",
        f"# wall_time_s = {wall:.3f}",
        f"command = {command}",
    ]
    for dest, value in sorted(vars(args).items()):
        if dest in skip or value is None:
            continue
        lines.append(f"{flags.get(dest, dest)} = {value}")
    path.write_text("\n".join(lines) + "\n")


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    cfg = read_config(known.config)
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        command = cfg.get("command")
        if command not in COMMANDS:
            raise ValidationError("no subcommand given and none recorded in the config")
        argv = [command] + argv
    elif cfg.get("command", command) != command:
        raise ValidationError(f"config is for {cfg['command']!r}, not {command!r}")
    subparser = parser._subparsers._group_actions[0].choices[command]
    by_flag = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            by_flag[opt.lstrip("-")] = action.dest
    defaults = {}
    for key, value in cfg.items():
        if key in ("command", "config"):
            continue
        dest = by_flag.get(key) or by_flag.get(key.replace("_", "-"))
        if dest is None:
            raise ValidationError(f"unknown config key {key!r} for {command}")
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    return argv


def run(argv: list[str] | None = None) -> int:
    """Execute one command; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except ValidationError as exc:
        print(f"chaoskit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_INVALID
    out = Path(args.out)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            HANDLERS[args.command](args, out, pool)
    except (InfeasibleError, ConvergenceError, NotSquareIntegrable, FloatingPointError) as exc:
        print(f"chaoskit: numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, OSError) as exc:
        print(f"chaoskit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _manifest(out / "manifest.cfg", args.command, args, time.perf_counter() - start)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
