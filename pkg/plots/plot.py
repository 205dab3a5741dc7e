#!/usr/bin/env python3
"""Render experiment CSVs to PNG figures.

Two commands, matching the two CSV layouts the ``timtin`` CLI emits:

``plot.py sweep <in.csv> -o <out.png>``
    Mean sum rate versus SNR, one error-bar curve per algorithm.  Expects
    columns ``snr_db, algorithm, mean_sum_rate, std_sum_rate,
    n_realizations``.

``plot.py converge <in.csv> -o <out.png>``
    Per-iteration traces, one curve per algorithm.  Expects columns
    ``algorithm, iter, sum_rate, sum_gdof``.  Algorithms with a sum-rate
    trace go on the left axis; exponent-only traces (sum GDoF) go on a
    dashed right axis.

Only the CSV files couple this tool to the producer; it has no other
dependency on the experiment code.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SWEEP_COLUMNS = ("snr_db", "algorithm", "mean_sum_rate", "std_sum_rate", "n_realizations")
CONVERGE_COLUMNS = ("algorithm", "iter", "sum_rate", "sum_gdof")


def read_rows(path: str, required: tuple[str, ...]) -> list[dict]:
    """Rows of a CSV file as dicts, after checking the header."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in required if c not in fields]
        if missing:
            raise ValueError(f"{path}: missing column {missing[0]!r}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _by_algorithm(rows: list[dict]) -> dict[str, list[dict]]:
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["algorithm"], []).append(row)
    return groups


def _colors():
    return plt.rcParams["axes.prop_cycle"].by_key()["color"]


def plot_sweep(path: str):
    """Figure with one mean-sum-rate-vs-SNR curve per algorithm."""
    rows = read_rows(path, SWEEP_COLUMNS)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    colors = _colors()
    for i, (alg, entries) in enumerate(sorted(_by_algorithm(rows).items())):
        entries.sort(key=lambda r: float(r["snr_db"]))
        snr = [float(r["snr_db"]) for r in entries]
        mean = [float(r["mean_sum_rate"]) for r in entries]
        std = [float(r["std_sum_rate"]) for r in entries]
        ax.errorbar(
            snr,
            mean,
            yerr=std,
            marker="o",
            capsize=3,
            label=alg,
            color=colors[i % len(colors)],
        )
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("mean sum rate (bits per channel use)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def _series(entries: list[dict], column: str) -> list[float] | None:
    """The column as floats if every row has a value, else None."""
    if any(r[column] == "" for r in entries):
        return None
    return [float(r[column]) for r in entries]


def plot_converge(path: str):
    """Figure with one per-iteration curve per algorithm.

    Sum-rate traces share the left axis; algorithms reporting only sum
    GDoF get a dashed curve on a right-hand axis.
    """
    rows = read_rows(path, CONVERGE_COLUMNS)
    fig, ax_rate = plt.subplots(figsize=(7.0, 4.5))
    ax_gdof = None
    colors = _colors()
    for i, (alg, entries) in enumerate(sorted(_by_algorithm(rows).items())):
        entries.sort(key=lambda r: int(float(r["iter"])))
        iters = [int(float(r["iter"])) for r in entries]
        color = colors[i % len(colors)]
        rates = _series(entries, "sum_rate")
        if rates is not None:
            ax_rate.plot(iters, rates, marker="o", label=alg, color=color)
            continue
        gdofs = _series(entries, "sum_gdof")
        if gdofs is None:
            raise ValueError(
                f"{path}: algorithm {alg!r} has neither a complete "
                "sum_rate nor a complete sum_gdof trace"
            )
        if ax_gdof is None:
            ax_gdof = ax_rate.twinx()
            ax_gdof.set_ylabel("sum GDoF")
        ax_gdof.plot(iters, gdofs, marker="s", linestyle="--", label=alg, color=color)
    ax_rate.set_xlabel("iteration")
    ax_rate.set_ylabel("sum rate (bits per channel use)")
    ax_rate.grid(True, alpha=0.3)
    handles, labels = ax_rate.get_legend_handles_labels()
    if ax_gdof is not None:
        more_h, more_l = ax_gdof.get_legend_handles_labels()
        handles += more_h
        labels += more_l
    ax_rate.legend(handles, labels)
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot.py", description="render experiment CSVs to PNG"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep", "mean sum rate vs SNR, one curve per algorithm"),
        ("converge", "per-iteration traces, one curve per algorithm"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("csv", help="input CSV file")
        p.add_argument("-o", "--output", required=True, help="output PNG path")
        p.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        fig = plot_sweep(args.csv) if args.command == "sweep" else plot_converge(args.csv)
        fig.savefig(args.output, dpi=args.dpi)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        plt.close("all")
    return 0


if __name__ == "__main__":
    sys.exit(main())
