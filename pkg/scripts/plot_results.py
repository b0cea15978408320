"""Plot kl_curves.csv and mse_summary.csv written by the CLI or the run_* scripts.

Needs matplotlib (``pip install -e .[plot]``).

    python3 scripts/plot_results.py results
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_kl(path, out):
    curve = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["mean_kl"]:
                curve[int(row["i"])] = float(row["mean_kl"])
    idx = sorted(curve)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(idx, [curve[i] for i in idx])
    ax.set_xlabel("number of outliers")
    ax.set_ylabel("mean KL(F || F_hat)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_mse(path, out):
    series = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            series[row["algorithm"]].append((float(row["P_o"]), float(row["mean_mse"])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for alg, pts in series.items():
        pts.sort()
        ax.semilogy([p for p, _ in pts], [m for _, m in pts], marker="o", label=alg)
    ax.set_xlabel("outlier probability P_o")
    ax.set_ylabel("mean MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results", nargs="?", default="results")
    args = ap.parse_args()
    d = Path(args.results)
    if (d / "kl_curves.csv").exists():
        plot_kl(d / "kl_curves.csv", d / "kl_curve.png")
        print(d / "kl_curve.png")
    if (d / "mse_summary.csv").exists():
        plot_mse(d / "mse_summary.csv", d / "mse_vs_po.png")
        print(d / "mse_vs_po.png")


if __name__ == "__main__":
    main()
