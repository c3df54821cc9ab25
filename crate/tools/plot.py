"""Plot the CSV reports written by `pmms all`.

Usage: python tools/plot.py OUT_DIR [--paths 30] [--save FIG_DIR]
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

PREDICTORS = ["ltdmps_partial", "ltdmps_full", "lt_only", "dm_only", "tm", "ip"]
COMPONENTS = ["scan_ms", "auth_ms", "reassoc_ms", "load_ms", "prediction_ms", "total_ms"]


def accuracy_per_path(out: Path, n: int):
    df = pd.read_csv(out / "accuracy.csv")
    paths = df[df.scope == "path"].copy()
    paths["path_id"] = paths.path_id.astype(int)
    first = sorted(paths.path_id.unique())[:n]
    fig, ax = plt.subplots(figsize=(10, 4))
    for p in PREDICTORS:
        rows = paths[(paths.predictor == p) & paths.path_id.isin(first)]
        ax.plot(rows.path_id, rows.accuracy_pct, marker="o", ms=3, label=p)
    ax.set(xlabel="path", ylabel="accuracy (%)", title=f"Prediction accuracy, first {n} paths")
    ax.legend(ncol=3, fontsize=8)
    return fig


def rank_histogram(out: Path, _n: int):
    df = pd.read_csv(out / "accuracy_ranks.csv")
    df = df[df["rank"].astype(str) != "none"]
    df["rank"] = df["rank"].astype(int)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / len(PREDICTORS)
    for i, p in enumerate(PREDICTORS):
        rows = df[df.predictor == p]
        ax.bar(rows["rank"] + i * width, rows["count"], width=width, label=p)
    ax.set(xlabel="frequency rank", ylabel="transitions", title="Frequency rank")
    ax.legend(fontsize=8)
    return fig


def delay_components(out: Path, n: int):
    df = pd.read_csv(out / "delay_paths.csv").head(n)
    fig, ax = plt.subplots(figsize=(10, 4))
    for c in COMPONENTS:
        ax.plot(df.path_id, df[c], marker=".", label=c.removesuffix("_ms"))
    ax.set(xlabel="path", ylabel="mean delay (ms)", title="Handoff delay per path")
    ax.legend(ncol=3, fontsize=8)
    return fig


def drops(out: Path, n: int):
    df = pd.read_csv(out / "drops.csv").head(n)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(df.path_id, df.dropped_bits_with, marker=".", label="with reservation")
    ax.plot(df.path_id, df.dropped_bits_without, marker=".", label="without reservation")
    ax.set(xlabel="path", ylabel="bits dropped", title="Dropped bits")
    ax.legend()
    return fig


def load_mix(out: Path, n: int):
    df = pd.read_csv(out / "delay_paths.csv").head(n)
    fig, ax = plt.subplots(figsize=(10, 4))
    bottom = None
    for c in ["load_low", "load_medium", "load_high"]:
        ax.bar(df.path_id, df[c], bottom=bottom, label=c.removeprefix("load_"))
        bottom = df[c] if bottom is None else bottom + df[c]
    ax.set(xlabel="path", ylabel="handoffs", title="Load class per handoff")
    ax.legend()
    return fig


def rssi_trace(out: Path, _n: int):
    df = pd.read_csv(out / "rssi_trace.csv")
    first = df[df.transition == df.transition.min()]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.semilogy(first["sample"], first.current_rssi_w, marker="o", label="current AP")
    ax.semilogy(first["sample"], first.next_rssi_w, marker="o", label="next AP")
    ax.set(xlabel="sample", ylabel="RSSI (W)", title="RSSI along one transition")
    ax.legend()
    return fig


FIGURES = {
    "accuracy": accuracy_per_path,
    "ranks": rank_histogram,
    "delay": delay_components,
    "drops": drops,
    "load": load_mix,
    "rssi": rssi_trace,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--paths", type=int, default=30)
    ap.add_argument("--save", type=Path, default=None)
    args = ap.parse_args()

    save = args.save or args.out_dir / "figures"
    save.mkdir(parents=True, exist_ok=True)
    for name, make in FIGURES.items():
        fig = make(args.out_dir, args.paths)
        fig.tight_layout()
        fig.savefig(save / f"{name}.png", dpi=120)
        plt.close(fig)
        print(save / f"{name}.png")


if __name__ == "__main__":
    main()
