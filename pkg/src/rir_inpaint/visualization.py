"""
Figures rendered from the plot-ready CSVs.
"""

from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .logger import get_logger  # noqa: E402

METRIC_LABELS = {"nmse_db": "NMSE [dB]", "cd": "Cosine distance"}


def setup_plot_style():
    """Shared rcParams for all figures."""
    plt.rcParams.update({
        "font.family": ["DejaVu Sans"],
        "axes.grid": True,
        "grid.alpha": 0.3,
        "figure.dpi": 100,
    })


def create_metric_vs_ratio_chart(plot_data: pd.DataFrame, metric: str, output_dir: Path) -> Optional[Path]:
    """
    Line chart of one metric against the mask ratio, one line per method.

    Args:
        plot_data: Long-format table (mask_ratio, metric, method, value)
        metric: "nmse_db" or "cd"
        output_dir: Directory to save the chart

    Returns:
        Path of the saved figure, or None when there is no data
    """
    rows = plot_data[plot_data["metric"] == metric]
    if rows.empty:
        return None

    setup_plot_style()
    plt.figure(figsize=(6, 4))
    for method, group in rows.groupby("method"):
        group = group.sort_values("mask_ratio")
        plt.plot(group["mask_ratio"], group["value"], marker="o", label=method)
    plt.xlabel("Mask ratio")
    plt.ylabel(METRIC_LABELS.get(metric, metric))
    plt.legend()
    plt.tight_layout()
    path = output_dir / f"{metric}_vs_ratio.png"
    plt.savefig(path, dpi=150, bbox_inches="tight")
    plt.close()
    return path


def create_edc_chart(curves: pd.DataFrame, output_dir: Path) -> Optional[Path]:
    """Energy decay curves of the ground truth and each reconstruction."""
    if curves.empty:
        return None

    setup_plot_style()
    plt.figure(figsize=(6, 4))
    for method, group in curves.groupby("method", sort=True):
        plt.plot(group["time_s"], group["edc_db"], label=method)
    plt.ylim(-60, 2)
    plt.xlabel("Time [s]")
    plt.ylabel("EDC [dB]")
    plt.legend()
    plt.tight_layout()
    path = output_dir / "edc.png"
    plt.savefig(path, dpi=150, bbox_inches="tight")
    plt.close()
    return path


def create_sir_chart(summary: pd.DataFrame, output_dir: Path) -> Optional[Path]:
    """Grouped bars of mean SIR per mask and variant, one panel per noise type."""
    if summary.empty:
        return None

    setup_plot_style()
    noise_types = sorted(summary["noise_type"].unique())
    fig, axes = plt.subplots(1, len(noise_types), figsize=(6 * len(noise_types), 4), squeeze=False)
    for ax, noise_type in zip(axes[0], noise_types):
        rows = summary[summary["noise_type"] == noise_type].copy()
        rows["label"] = rows["variant"].where(rows["method"] == "none", rows["variant"] + " (" + rows["method"] + ")")
        table = rows.pivot_table(index="mask", columns="label", values="sir_db", aggfunc="mean", sort=False)
        table.plot.bar(ax=ax, rot=0)
        ax.set_title(f"{noise_type} noise")
        ax.set_ylabel("SIR improvement [dB]")
        ax.set_xlabel("")
    fig.tight_layout()
    path = output_dir / "sir.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def create_loss_chart(loss: pd.DataFrame, output_dir: Path) -> Optional[Path]:
    if loss.empty:
        return None

    setup_plot_style()
    plt.figure(figsize=(6, 4))
    plt.semilogy(loss["epoch"], loss["loss"], marker=".")
    plt.xlabel("Epoch")
    plt.ylabel("Training loss")
    plt.tight_layout()
    path = output_dir / "loss.png"
    plt.savefig(path, dpi=150, bbox_inches="tight")
    plt.close()
    return path


def create_all_visualizations(results_dir: Union[str, Path], output_dir: Union[str, Path]) -> List[Path]:
    """
    Create every chart whose source CSV exists in the results directory.

    Args:
        results_dir: Directory holding plot_data.csv, edc_curves.csv,
            summary_beamform.csv and loss_trace.csv
        output_dir: Output directory path

    Returns:
        Paths of the written figures
    """
    results_path = Path(results_dir)
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    def load(name):
        path = results_path / name
        return pd.read_csv(path) if path.is_file() else pd.DataFrame()

    written = []
    plot_data = load("plot_data.csv")
    if not plot_data.empty:
        for metric in METRIC_LABELS:
            written.append(create_metric_vs_ratio_chart(plot_data, metric, output_path))
    written.append(create_edc_chart(load("edc_curves.csv"), output_path))
    written.append(create_sir_chart(load("summary_beamform.csv"), output_path))
    written.append(create_loss_chart(load("loss_trace.csv"), output_path))

    written = [p for p in written if p is not None]
    get_logger("visualization").info(f"Saved {len(written)} figures to: {output_path}")
    return written
