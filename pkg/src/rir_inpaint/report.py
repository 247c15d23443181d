"""
Result tables and report generation for reconstruction and beamforming
experiments.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .logger import get_logger

VARIANT_ORDER = ("Mics", "Full", "Missing", "Inpainted")
PLOT_METRICS = ("nmse_db", "cd")


def save_csv(df: pd.DataFrame, output_path: Union[str, Path], index: bool = False) -> Path:
    """
    Save a table as CSV (comma separated, '.' decimal, LF line endings).

    Args:
        df: Table to save
        output_path: Path to save the CSV
        index: Whether to write the index column

    Returns:
        Path of the written file
    """
    output_path = Path(output_path)
    df.to_csv(output_path, index=index, encoding="utf-8", lineterminator="\n", float_format="%.10g")
    get_logger("report").info(f"CSV saved to: {output_path} ({len(df)} rows)")
    return output_path


def save_loss_trace(loss_trace: Sequence[float], output_path: Union[str, Path]) -> Path:
    df = pd.DataFrame({"epoch": np.arange(1, len(loss_trace) + 1), "loss": list(loss_trace)})
    return save_csv(df, output_path)


def merge_results(directory: Union[str, Path]) -> Tuple[Optional[pd.DataFrame], Optional[pd.DataFrame]]:
    """
    Concatenate every recon_results*.csv and beamform_results*.csv in a directory.

    Returns:
        (reconstruction rows or None, beamforming rows or None)
    """
    directory = Path(directory)
    merged = []
    for pattern in ("recon_results*.csv", "beamform_results*.csv"):
        files = sorted(directory.glob(pattern))
        if not files:
            merged.append(None)
            continue
        frames = [pd.read_csv(f, keep_default_na=True) for f in files]
        df = pd.concat(frames, ignore_index=True).drop_duplicates().reset_index(drop=True)
        get_logger("report").info(f"Merged {len(files)} files matching {pattern}: {len(df)} rows")
        merged.append(df)
    return merged[0], merged[1]


def plot_data(recon: pd.DataFrame) -> pd.DataFrame:
    """
    Long-format NMSE/CD versus mask ratio for the random masks, averaged
    over seeds.

    Returns:
        DataFrame with columns mask_ratio, metric, method, value
    """
    columns = ["mask_ratio", "metric", "method", "value"]
    random_rows = recon[recon["mask"].astype(str).str.startswith("random")]
    random_rows = random_rows.dropna(subset=list(PLOT_METRICS))
    if random_rows.empty:
        return pd.DataFrame(columns=columns)

    means = random_rows.groupby(["mask_ratio", "backend"], as_index=False)[list(PLOT_METRICS)].mean()
    long = means.melt(id_vars=["mask_ratio", "backend"], var_name="metric", value_name="value")
    long = long.rename(columns={"backend": "method"})[columns]
    return long.sort_values(["metric", "method", "mask_ratio"], kind="mergesort").reset_index(drop=True)


def summarize_reconstruction(recon: pd.DataFrame) -> pd.DataFrame:
    """Dist per backend (rows) and fixed mask (columns)."""
    fixed = recon[~recon["mask"].astype(str).str.startswith("random")].dropna(subset=["dist"])
    if fixed.empty:
        return pd.DataFrame()
    table = fixed.pivot_table(index="backend", columns="mask", values="dist", aggfunc="mean")
    return table.sort_index().sort_index(axis=1)


def summarize_beamforming(beamform: pd.DataFrame) -> pd.DataFrame:
    """Mean SIR and SI-SDR over SNRs per noise type, mask, variant and method."""
    keys = ["noise_type", "mask", "variant", "method"]
    table = beamform.groupby(keys, as_index=False)[["sir_db", "si_sdr_db"]].mean()
    order = {name: i for i, name in enumerate(VARIANT_ORDER)}
    table["_order"] = table["variant"].map(order)
    table = table.sort_values(["noise_type", "mask", "_order", "method"], kind="mergesort")
    return table.drop(columns="_order").reset_index(drop=True)


def _markdown_table(headers: List[str], rows: List[List[Any]]) -> str:
    def fmt(value):
        if isinstance(value, (float, np.floating)):
            return "n/a" if np.isnan(value) else f"{value:.3f}"
        return str(value)

    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(fmt(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


def generate_markdown_report(
    tables: Dict[str, pd.DataFrame], t60: Optional[pd.DataFrame], config: Any = None
) -> str:
    """
    Generate the Markdown experiment report.

    Args:
        tables: "dist" and/or "beamform" summary tables
        t60: T60 comparison rows, if available
        config: Experiment configuration (echoed in the overview)

    Returns:
        Markdown formatted report string
    """
    report = "# RIR Reconstruction Report\n\n## Overview\n"
    if config is not None:
        report += (
            f"- **Array**: {config.array_preset}\n"
            f"- **Room**: {' × '.join(f'{d:g}' for d in config.room_dimensions)} m, T60 {config.room_t60} s\n"
            f"- **RIR length**: {config.rir_length} samples @ {config.sample_rate} Hz\n"
            f"- **Backends**: {', '.join(config.backends)}\n"
            f"- **Seed**: {config.seed}\n"
        )

    dist = tables.get("dist")
    if dist is not None and not dist.empty:
        report += "\n## Alignment with the true array response (Dist, lower is better)\n\n"
        headers = ["backend"] + [str(c) for c in dist.columns]
        rows = [[backend] + list(values) for backend, values in zip(dist.index, dist.to_numpy())]
        report += _markdown_table(headers, rows)

    beamform = tables.get("beamform")
    if beamform is not None and not beamform.empty:
        report += "\n## MVDR results averaged over SNRs\n\n"
        report += _markdown_table(
            ["noise", "mask", "variant", "method", "SIR [dB]", "SI-SDR [dB]"],
            beamform[["noise_type", "mask", "variant", "method", "sir_db", "si_sdr_db"]].values.tolist(),
        )

    if t60 is not None and not t60.empty:
        report += "\n## Reverberation time of a reconstructed microphone\n\n"
        report += _markdown_table(
            ["method", "mic", "T60 [s]", "reliable"],
            t60[["method", "mic", "t60_s", "reliable"]].values.tolist(),
        )

    report += (
        "\n## Output files\n\n"
        "1. **summary_dist.csv**: Dist per backend and mask\n"
        "2. **summary_beamform.csv**: SIR / SI-SDR per variant, averaged over SNRs\n"
        "3. **plot_data.csv**: NMSE and CD versus mask ratio (long format)\n"
    )
    return report


def save_markdown_report(
    tables: Dict[str, pd.DataFrame],
    t60: Optional[pd.DataFrame],
    output_path: Union[str, Path],
    config: Any = None,
) -> Path:
    """
    Save markdown report to file.

    Args:
        tables: Summary tables
        t60: T60 comparison rows
        output_path: Path to save the report
        config: Experiment configuration

    Returns:
        Path of the written report
    """
    output_path = Path(output_path)
    report = generate_markdown_report(tables, t60, config)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report)

    get_logger("report").info(f"Markdown report saved to: {output_path}")
    return output_path
