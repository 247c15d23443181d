"""
Unit tests for report.py module.
"""

import numpy as np
import pandas as pd
import pytest

from rir_inpaint.config import ExperimentConfig
from rir_inpaint.report import (
    generate_markdown_report,
    merge_results,
    plot_data,
    save_csv,
    save_loss_trace,
    save_markdown_report,
    summarize_beamforming,
    summarize_reconstruction,
)

pytestmark = pytest.mark.unit


@pytest.fixture
def recon_rows():
    """Reconstruction rows: two fixed masks and one random ratio over two seeds."""
    return pd.DataFrame([
        {"mask": "mask0", "mask_ratio": 0.25, "seed": -1, "num_missing": 4, "backend": "sci",
         "nmse_db": -12.0, "cd": 0.10, "dist": 40.0, "dist_mean": 0.04, "flag": ""},
        {"mask": "mask0", "mask_ratio": 0.25, "seed": -1, "num_missing": 4, "backend": "diffusion",
         "nmse_db": -15.0, "cd": 0.05, "dist": 30.0, "dist_mean": 0.03, "flag": ""},
        {"mask": "mask3", "mask_ratio": 0.75, "seed": -1, "num_missing": 12, "backend": "sci",
         "nmse_db": 3.0, "cd": 0.90, "dist": 400.0, "dist_mean": 0.40, "flag": ""},
        {"mask": "random", "mask_ratio": 0.5, "seed": 0, "num_missing": 8, "backend": "sci",
         "nmse_db": -4.0, "cd": 0.30, "dist": 100.0, "dist_mean": 0.1, "flag": ""},
        {"mask": "random", "mask_ratio": 0.5, "seed": 1, "num_missing": 8, "backend": "sci",
         "nmse_db": -6.0, "cd": 0.50, "dist": 120.0, "dist_mean": 0.12, "flag": ""},
    ])


@pytest.fixture
def beamform_rows():
    """Beamforming rows at two SNRs."""
    rows = []
    for snr, offset in ((-5.0, 0.0), (5.0, 2.0)):
        rows += [
            {"noise_type": "directional", "snr_db": snr, "mask": "mask0", "variant": "Mics",
             "method": "none", "sir_db": 0.0, "si_sdr_db": -5.0 + offset},
            {"noise_type": "directional", "snr_db": snr, "mask": "mask0", "variant": "Inpainted",
             "method": "sci", "sir_db": 8.0 + offset, "si_sdr_db": 1.0 + offset},
            {"noise_type": "directional", "snr_db": snr, "mask": "mask0", "variant": "Full",
             "method": "none", "sir_db": 12.0 + offset, "si_sdr_db": 3.0 + offset},
        ]
    return pd.DataFrame(rows)


class TestSaveCsv:
    """Test cases for save_csv."""

    def test_csv_creation(self, recon_rows, temp_dir):
        """Test CSV file creation and LF line endings."""
        path = save_csv(recon_rows, temp_dir / "recon_results.csv")

        assert path.exists()
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        df = pd.read_csv(path)
        assert len(df) == 5
        assert df.iloc[0]["backend"] == "sci"
        assert df.iloc[1]["nmse_db"] == -15.0

    def test_loss_trace(self, temp_dir):
        path = save_loss_trace([0.9, 0.5, 0.25], temp_dir / "loss_trace.csv")
        df = pd.read_csv(path)
        assert df["epoch"].tolist() == [1, 2, 3]
        assert df["loss"].tolist() == [0.9, 0.5, 0.25]


class TestMergeResults:
    """Test cases for merge_results."""

    def test_merges_and_drops_duplicates(self, recon_rows, beamform_rows, temp_dir):
        save_csv(recon_rows.iloc[:3], temp_dir / "recon_results.csv")
        save_csv(recon_rows.iloc[2:], temp_dir / "recon_results_seed1.csv")
        save_csv(beamform_rows, temp_dir / "beamform_results.csv")

        recon, beamform = merge_results(temp_dir)

        assert len(recon) == 5
        assert len(beamform) == 6

    def test_empty_directory(self, temp_dir):
        assert merge_results(temp_dir) == (None, None)


class TestTables:
    """Test cases for the summary tables."""

    def test_plot_data_averages_seeds(self, recon_rows):
        """Test long-format NMSE/CD rows for random masks."""
        long = plot_data(recon_rows)

        assert list(long.columns) == ["mask_ratio", "metric", "method", "value"]
        assert len(long) == 2
        nmse_row = long[long["metric"] == "nmse_db"].iloc[0]
        assert nmse_row["value"] == pytest.approx(-5.0)
        cd_row = long[long["metric"] == "cd"].iloc[0]
        assert cd_row["value"] == pytest.approx(0.4)

    def test_plot_data_without_random_rows(self, recon_rows):
        long = plot_data(recon_rows[recon_rows["mask"] != "random"])
        assert long.empty
        assert list(long.columns) == ["mask_ratio", "metric", "method", "value"]

    def test_summarize_reconstruction(self, recon_rows):
        table = summarize_reconstruction(recon_rows)

        assert list(table.index) == ["diffusion", "sci"]
        assert list(table.columns) == ["mask0", "mask3"]
        assert table.loc["sci", "mask3"] == 400.0
        assert np.isnan(table.loc["diffusion", "mask3"])

    def test_summarize_beamforming(self, beamform_rows):
        """Test averaging over SNRs with variants in canonical order."""
        table = summarize_beamforming(beamform_rows)

        assert table["variant"].tolist() == ["Mics", "Full", "Inpainted"]
        full = table[table["variant"] == "Full"].iloc[0]
        assert full["sir_db"] == pytest.approx(13.0)
        assert full["si_sdr_db"] == pytest.approx(4.0)


class TestMarkdownReport:
    """Test cases for generate_markdown_report / save_markdown_report."""

    @pytest.fixture
    def t60_rows(self):
        return pd.DataFrame([
            {"method": "truth", "mic": 3, "t60_s": 0.31, "reliable": True},
            {"method": "sci", "mic": 3, "t60_s": np.nan, "reliable": False},
        ])

    def test_report_structure(self, recon_rows, beamform_rows, t60_rows):
        """Test report sections."""
        tables = {"dist": summarize_reconstruction(recon_rows), "beamform": summarize_beamforming(beamform_rows)}

        report = generate_markdown_report(tables, t60_rows, ExperimentConfig())

        assert report.startswith("# RIR Reconstruction Report")
        assert "## Overview" in report
        assert "- **Array**: ula16" in report
        assert "| backend | mask0 | mask3 |" in report
        assert "| diffusion | 30.000 | n/a |" in report
        assert "## MVDR results averaged over SNRs" in report
        assert "| truth | 3 | 0.310 | True |" in report
        assert "| sci | 3 | n/a | False |" in report

    def test_report_without_tables(self):
        report = generate_markdown_report({}, None)
        assert "## Overview" in report
        assert "Dist" not in report.split("## Output files")[0]

    def test_report_file_creation(self, recon_rows, temp_dir):
        """Test report file is written."""
        path = save_markdown_report({"dist": summarize_reconstruction(recon_rows)}, None, temp_dir / "report.md")

        assert path.exists()
        content = path.read_text(encoding="utf-8")
        assert "# RIR Reconstruction Report" in content
