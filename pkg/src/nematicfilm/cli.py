"""Command-line entry point: run / sweep / wmap."""

from __future__ import annotations

import argparse

from . import harness


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="artifact directory (default: runs/<recipe>)")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="nematicfilm",
        description="Thin-film nematic simulator: solve, sweep, and map "
                    "defect energies from INI configs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one recipe config")
    p_run.add_argument("config", help="INI config file")
    _add_out(p_run)

    p_sw = sub.add_parser("sweep", help="sweep eps, k, or resolution")
    p_sw.add_argument("config", help="INI config file")
    p_sw.add_argument("--param", required=True,
                      choices=["eps", "k", "resolution"])
    p_sw.add_argument("--from", dest="start", type=float, required=True,
                      help="first parameter value")
    p_sw.add_argument("--to", dest="stop", type=float, required=True,
                      help="last parameter value")
    p_sw.add_argument("--rungs", type=int, required=True,
                      help="number of sweep points")
    _add_out(p_sw)

    p_w = sub.add_parser("wmap", help="renormalized-energy landscape / argmin")
    p_w.add_argument("config", help="INI config file")
    p_w.add_argument("--k", type=int, default=None,
                     help="number of defects (default: boundary k)")
    p_w.add_argument("--scan", type=int, default=None,
                     help="coarse lattice points per axis")
    p_w.add_argument("--workers", type=int, default=None,
                     help="thread count (or set NEMATICFILM_WORKERS)")
    _add_out(p_w)

    args = ap.parse_args(argv)
    if args.command == "run":
        return harness.run(args.config, out_dir=args.out)
    if args.command == "sweep":
        return harness.sweep(args.config, args.param, args.start, args.stop,
                             args.rungs, out_dir=args.out)
    return harness.wmap(args.config, k=args.k, scan=args.scan,
                        out_dir=args.out, workers=args.workers)


if __name__ == "__main__":
    raise SystemExit(main())
