"""Command-line front end.

Subcommands::

    timtin gdof <channel.json> <txconfig.json>
    timtin zest <channel.json> [--n --b --seed --max-iter --tol
                                --trace out.csv --dump-config out.json]
    timtin decompose <channel.json> (--decomposition file | --threshold t)
    timtin sweep --config file
    timtin converge --config file [--dump-config out.json]
    timtin neighboring --S s --M m --K k

Exit codes: 0 success, 1 validation failure (bad arguments, malformed
files, unsupported topology), 2 verification failure (a scheme failed its
recomputation check).  CSV goes to the config's ``output`` path or stdout.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .channel import load_channel
from .decomposition import decomposition_by_threshold, load_decomposition
from .errors import ValidationError, VerificationError
from .experiments import (
    format_rows,
    parse_config,
    run_converge,
    run_decompose,
    run_neighboring,
    run_sweep,
)
from .gdof import gdof_of_config, load_txconfig, save_txconfig
from .zest import run_zest, write_trace_csv

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as validation errors so
    the process exits with code 1, not argparse's default 2."""

    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="timtin", description="GDoF tools for interference networks")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gdof", help="GDoF of a transmit configuration on a channel")
    g.add_argument("channel")
    g.add_argument("txconfig")
    g.set_defaults(func=_cmd_gdof)

    z = sub.add_parser("zest", help="run the distributed vector/power iteration")
    z.add_argument("channel")
    z.add_argument("--n", type=int, default=2)
    z.add_argument("--b", type=int, default=1)
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--max-iter", type=int, default=100)
    z.add_argument("--tol", type=float, default=1e-6)
    z.add_argument("--trace", metavar="OUT.CSV")
    z.add_argument("--dump-config", metavar="OUT.JSON")
    z.set_defaults(func=_cmd_zest)

    d = sub.add_parser("decompose", help="report a network's split-processing values")
    d.add_argument("channel")
    grp = d.add_mutually_exclusive_group(required=True)
    grp.add_argument("--decomposition", metavar="FILE")
    grp.add_argument("--threshold", type=float)
    d.set_defaults(func=_cmd_decompose)

    s = sub.add_parser("sweep", help="mean sum-rate vs SNR experiment")
    s.add_argument("--config", required=True)
    s.set_defaults(func=_cmd_sweep)

    c = sub.add_parser("converge", help="per-iteration trace experiment")
    c.add_argument("--config", required=True)
    c.add_argument("--dump-config", metavar="OUT.JSON")
    c.set_defaults(func=_cmd_converge)

    nb = sub.add_parser("neighboring", help="closed form vs construction on a ring")
    nb.add_argument("--S", type=int, required=True)
    nb.add_argument("--M", type=int, required=True)
    nb.add_argument("--K", type=int, required=True)
    nb.set_defaults(func=_cmd_neighboring)
    return p


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _gdof_rows(d: np.ndarray) -> list[tuple]:
    rows: list[tuple] = [(str(k + 1), float(v)) for k, v in enumerate(d)]
    rows.append(("sum", float(d.sum())))
    return rows


def _cmd_gdof(args) -> int:
    spec = load_channel(args.channel)
    tx = load_txconfig(args.txconfig)
    d = gdof_of_config(spec, tx)
    _emit(format_rows(("user", "gdof"), _gdof_rows(d)), None)
    return 0


def _cmd_zest(args) -> int:
    spec = load_channel(args.channel)
    res = run_zest(
        spec,
        n=args.n,
        b=args.b,
        seed=args.seed,
        max_iter=args.max_iter,
        tol=args.tol,
    )
    if args.trace:
        write_trace_csv(args.trace, res.rows, spec.K)
    if args.dump_config:
        save_txconfig(args.dump_config, res.tx)
    rows = _gdof_rows(res.d)
    rows.append(("iterations", str(res.iterations)))
    rows.append(("converged", "true" if res.converged else "false"))
    _emit(format_rows(("user", "gdof"), rows), None)
    return 0


def _cmd_decompose(args) -> int:
    spec = load_channel(args.channel)
    if args.decomposition is not None:
        dspec, decomp = load_decomposition(args.decomposition)
        if dspec.K != spec.K or not np.array_equal(dspec.alpha, spec.alpha):
            raise ValidationError(
                "decomposition-channel-mismatch: the decomposition file describes "
                "a different network than the channel file"
            )
    else:
        decomp = decomposition_by_threshold(spec, args.threshold)
    report = run_decompose(spec, decomp)
    rows = [
        ("tin_sym", report["tin_sym"]),
        ("tim_sym", report["tim_sym"]),
        ("product", report["product"]),
        ("outer", report["outer"]),
        ("factor", report["factor"]),
    ]
    _emit(format_rows(("quantity", "value"), rows), None)
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    rows = run_sweep(cfg)
    header = ("snr_db", "algorithm", "mean_sum_rate", "std_sum_rate", "n_realizations")
    text = format_rows(header, rows)
    _emit(text, cfg.output)
    return 0


def _cmd_converge(args) -> int:
    cfg = parse_config(args.config)
    rows, finals = run_converge(cfg)
    if args.dump_config:
        if "zest" not in finals:
            raise ValidationError(
                "nothing to dump: --dump-config needs 'zest' among the algorithms"
            )
        save_txconfig(args.dump_config, finals["zest"].tx)
    header = ("algorithm", "iter", "sum_rate", "sum_gdof")
    _emit(format_rows(header, rows), cfg.output)
    return 0


def _cmd_neighboring(args) -> int:
    report = run_neighboring(args.S, args.M, args.K)
    rows = [
        ("S", str(report["S"])),
        ("M", str(report["M"])),
        ("K", str(report["K"])),
        ("d_sym", report["d_sym"]),
        ("achieved_min", report["achieved_min"]),
    ]
    _emit(format_rows(("quantity", "value"), rows), None)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
