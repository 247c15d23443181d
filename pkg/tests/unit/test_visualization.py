"""
Unit tests for visualization.py module.
"""

from unittest.mock import MagicMock, patch

import pandas as pd
import pytest

from rir_inpaint.visualization import (
    create_all_visualizations,
    create_edc_chart,
    create_loss_chart,
    create_metric_vs_ratio_chart,
    create_sir_chart,
    setup_plot_style,
)

pytestmark = pytest.mark.unit


@pytest.fixture
def long_plot_data():
    """Long-format NMSE/CD rows for two methods."""
    rows = []
    for method, base in (("sci", -5.0), ("diffusion", -8.0)):
        for ratio in (0.3, 0.5, 0.7):
            rows.append({"mask_ratio": ratio, "metric": "nmse_db", "method": method, "value": base + 10 * ratio})
            rows.append({"mask_ratio": ratio, "metric": "cd", "method": method, "value": ratio / 2})
    return pd.DataFrame(rows)


@pytest.fixture
def sir_summary():
    return pd.DataFrame([
        {"noise_type": "diffuse", "mask": "mask0", "variant": "Mics", "method": "none", "sir_db": 0.0, "si_sdr_db": -3.0},
        {"noise_type": "diffuse", "mask": "mask0", "variant": "Full", "method": "none", "sir_db": 6.0, "si_sdr_db": 2.0},
        {"noise_type": "diffuse", "mask": "mask0", "variant": "Inpainted", "method": "sci", "sir_db": 4.0, "si_sdr_db": 1.0},
        {"noise_type": "directional", "mask": "mask0", "variant": "Full", "method": "none", "sir_db": 15.0, "si_sdr_db": 5.0},
    ])


@pytest.mark.mock
class TestSetupPlotStyle:
    """Test cases for setup_plot_style function."""

    @patch("rir_inpaint.visualization.plt")
    def test_style_update(self, mock_plt):
        """Test shared rcParams."""
        setup_plot_style()

        style = mock_plt.rcParams.update.call_args[0][0]
        assert style["font.family"] == ["DejaVu Sans"]
        assert style["axes.grid"] is True


@pytest.mark.mock
class TestMetricChart:
    """Test cases for create_metric_vs_ratio_chart function."""

    @patch("rir_inpaint.visualization.plt")
    def test_one_line_per_method(self, mock_plt, long_plot_data, temp_dir):
        """Test one plotted line per method."""
        create_metric_vs_ratio_chart(long_plot_data, "nmse_db", temp_dir)

        assert mock_plt.plot.call_count == 2
        mock_plt.ylabel.assert_called_with("NMSE [dB]")
        mock_plt.close.assert_called_once()

    @patch("rir_inpaint.visualization.plt")
    def test_chart_save_path(self, mock_plt, long_plot_data, temp_dir):
        path = create_metric_vs_ratio_chart(long_plot_data, "cd", temp_dir)

        assert path == temp_dir / "cd_vs_ratio.png"
        mock_plt.savefig.assert_called_with(path, dpi=150, bbox_inches="tight")

    @patch("rir_inpaint.visualization.plt")
    def test_missing_metric_no_chart(self, mock_plt, long_plot_data, temp_dir):
        """Test no chart creation without rows for the metric."""
        assert create_metric_vs_ratio_chart(long_plot_data, "dist", temp_dir) is None
        mock_plt.figure.assert_not_called()


class TestOtherCharts:
    """Test cases for the EDC, SIR and loss charts."""

    @patch("rir_inpaint.visualization.plt")
    def test_empty_inputs_no_chart(self, mock_plt, temp_dir):
        assert create_edc_chart(pd.DataFrame(), temp_dir) is None
        assert create_sir_chart(pd.DataFrame(), temp_dir) is None
        assert create_loss_chart(pd.DataFrame(), temp_dir) is None
        mock_plt.figure.assert_not_called()
        mock_plt.subplots.assert_not_called()

    @patch("rir_inpaint.visualization.plt")
    def test_edc_one_curve_per_method(self, mock_plt, temp_dir):
        curves = pd.DataFrame({
            "method": ["truth", "truth", "sci", "sci"],
            "time_s": [0.0, 0.1, 0.0, 0.1],
            "edc_db": [0.0, -20.0, 0.0, -18.0],
        })

        path = create_edc_chart(curves, temp_dir)

        assert mock_plt.plot.call_count == 2
        assert path == temp_dir / "edc.png"

    def test_sir_chart_renders(self, sir_summary, temp_dir):
        """Test a real SIR figure is written with one panel per noise type."""
        path = create_sir_chart(sir_summary, temp_dir)

        assert path.exists()
        assert path.stat().st_size > 0

    def test_loss_chart_renders(self, temp_dir):
        path = create_loss_chart(pd.DataFrame({"epoch": [1, 2, 3], "loss": [1.0, 0.5, 0.3]}), temp_dir)
        assert path.exists()


class TestCreateAllVisualizations:
    """Test cases for create_all_visualizations function."""

    @patch("rir_inpaint.visualization.create_loss_chart")
    @patch("rir_inpaint.visualization.create_sir_chart")
    @patch("rir_inpaint.visualization.create_edc_chart")
    @patch("rir_inpaint.visualization.create_metric_vs_ratio_chart")
    def test_all_charts_requested(self, mock_metric, mock_edc, mock_sir, mock_loss, long_plot_data, temp_dir):
        """Test every chart function is called when plot data exists."""
        long_plot_data.to_csv(temp_dir / "plot_data.csv", index=False)
        mock_metric.return_value = MagicMock()
        mock_edc.return_value = None
        mock_sir.return_value = None
        mock_loss.return_value = None

        written = create_all_visualizations(temp_dir, temp_dir / "figures")

        assert mock_metric.call_count == 2
        mock_edc.assert_called_once()
        mock_sir.assert_called_once()
        mock_loss.assert_called_once()
        assert len(written) == 2

    def test_output_directory_creation(self, temp_dir):
        """Test the figures directory is created even without data."""
        output_dir = temp_dir / "figures"

        written = create_all_visualizations(temp_dir, output_dir)

        assert output_dir.exists()
        assert written == []

    def test_integration_with_real_data(self, long_plot_data, sir_summary, temp_dir):
        long_plot_data.to_csv(temp_dir / "plot_data.csv", index=False)
        sir_summary.to_csv(temp_dir / "summary_beamform.csv", index=False)

        written = create_all_visualizations(temp_dir, temp_dir / "figures")

        names = sorted(p.name for p in written)
        assert names == ["cd_vs_ratio.png", "nmse_db_vs_ratio.png", "sir.png"]
        assert all(p.exists() for p in written)
