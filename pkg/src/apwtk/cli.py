"""apwtk command line: gen, analyze, decompose, select.

Exit codes: 0 ok, 2 invalid input, 3 certificate violated, 4 construction failed.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import commands
from .errors import CertificateError, ConstructionError, InvalidArgument
from .serialize import read_set_signal, read_signal, write_text

EXIT_OK, EXIT_INVALID, EXIT_CERTIFICATE, EXIT_CONSTRUCTION = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.add_argument("--metric", default="euclidean", choices=("euclidean", "chebyshev"))
    p.add_argument("--threads", type=int, help="worker threads for scans (default: $APWTK_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apwtk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a signal or set-valued signal CSV from a generator spec")
    _common(g)
    g.add_argument("--grid", required=True, help="t0,h,n")
    g.add_argument("--spec", required=True, help="generator spec: inline JSON or a JSON file")
    g.add_argument("--seed", type=int, help="seed for stochastic generators without their own")
    g.add_argument("--name", default="signal")

    a = sub.add_parser("analyze", help="seminorms, J_p, almost periods, Fourier exponents, class")
    _common(a)
    a.add_argument("--input", required=True)
    a.add_argument("--p", type=float, default=1.0)
    a.add_argument("--ladder", help="window lengths l1,l2,...")
    a.add_argument("--eps", type=float, default=0.1)
    a.add_argument("--delta", help="J_p measure fractions d1,d2,...", default="0.1,0.01")
    a.add_argument("--tau-range", help="lo,hi")
    a.add_argument("--tau-step", type=float)
    a.add_argument("--lambda-range", help="lo,hi")
    a.add_argument("--top-k", type=int, default=16)
    a.add_argument("--floor", type=float, default=1e-3)

    d = sub.add_parser("decompose", help="mask family with rho(f, x_j) < eps on T_j")
    _common(d)
    d.add_argument("--input", required=True)
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--b", type=float, help="separator base period (default from the dominant exponent)")
    d.add_argument("--depth", type=int, default=2)
    d.add_argument("--tail-budget", type=float)
    d.add_argument("--class-eps", type=float, default=0.25)
    d.add_argument("--ladder")
    d.add_argument("--tau-step", type=float)

    s = sub.add_parser("select", help="selections of a set-valued signal")
    _common(s)
    s.add_argument("--input-set", required=True, help="set-valued CSV t,k,v1,...")
    s.add_argument("--input", help="target signal g (modes eps and modulus)")
    s.add_argument("--mode", default="eps", choices=("eps", "modulus", "net", "dense"))
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--eps-prime", type=float)
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--b", type=float)
    s.add_argument("--eta", help="kind,params e.g. linear,1 or power,1,0.5")
    s.add_argument("--maxlevel", type=int, default=4)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--count", type=int, default=2)
    s.add_argument("--eps-ladder", default="0.5,0.25")
    s.add_argument("--plot", action="store_true", help="also write t, rho(g,F), rho(f,g) columns")
    return ap


def dispatch(args: argparse.Namespace) -> dict:
    pf = commands.parse_floats
    if args.command == "gen":
        return commands.run_gen(commands.load_spec(args.spec), commands.parse_grid(args.grid), args.metric, args.seed, args.name)
    if args.command == "analyze":
        return commands.run_analyze(
            read_signal(args.input, args.metric),
            p=args.p,
            ladder=pf(args.ladder),
            eps=args.eps,
            deltas=pf(args.delta),
            tau_range=pf(args.tau_range),
            tau_step=args.tau_step,
            lambda_range=pf(args.lambda_range),
            top_k=args.top_k,
            floor=args.floor,
        )
    if args.command == "decompose":
        return commands.run_decompose(
            read_signal(args.input, args.metric),
            args.eps,
            b=args.b,
            depth=args.depth,
            tail_budget=args.tail_budget,
            class_eps=args.class_eps,
            ladder=pf(args.ladder),
            tau_step=args.tau_step,
        )
    F = read_set_signal(args.input_set, args.metric)
    g = read_signal(args.input, args.metric) if args.input else None
    return commands.run_select(
        F,
        g,
        mode=args.mode,
        eps=args.eps,
        depth=args.depth,
        b=args.b,
        eta=args.eta,
        maxlevel=args.maxlevel,
        n=args.n,
        eps_prime=args.eps_prime,
        count=args.count,
        eps_ladder=pf(args.eps_ladder),
        plot=args.plot,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("apwtk: --threads must be at least 1", file=sys.stderr)
            return EXIT_INVALID
        os.environ["APWTK_THREADS"] = str(args.threads)
    try:
        files = dispatch(args)
        out = Path(args.out)
        # refuse before writing anything so a run never half-overwrites
        if not args.force:
            for name in files:
                if (out / name).exists():
                    raise InvalidArgument(f"{out / name} exists (use --force to overwrite)")
        for name, text in sorted(files.items()):
            write_text(out / name, text, force=True)
    except InvalidArgument as exc:
        print(f"apwtk: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CertificateError as exc:
        print(f"apwtk: certificate violated: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except ConstructionError as exc:
        level = f" (level {exc.level})" if exc.level is not None else ""
        print(f"apwtk: construction failed{level}: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    for name in sorted(files):
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
