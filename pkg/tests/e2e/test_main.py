"""
End-to-end tests for main.py module.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from main import build_parser, cli

from rir_inpaint.archive import import_rir_archive

pytestmark = pytest.mark.e2e

DESK_CONFIG = """\
# Desk-scale run
room.t60 = 0.2
array.preset = ula
array.num_mics = 8
noise.types = directional
snr.list = 0
mask.presets = mask0
mask.random_ratios = 0.5
mask.random_seeds = 0
rir.length = 256
stft.frame_length = 128
stft.hop = 64
stft.fft_size = 128
signal.duration = 0.5
signal.lead_in = 0.25
"""


@pytest.fixture
def config_file(temp_dir):
    path = temp_dir / "desk.cfg"
    path.write_text(DESK_CONFIG, encoding="utf-8")
    return path


class TestMainScript:
    """End-to-end tests for the main script."""

    @pytest.fixture
    def main_script_path(self):
        """Path to the main.py script."""
        return Path(__file__).parent.parent.parent / "main.py"

    def test_main_script_exists(self, main_script_path):
        """Test that main.py exists and is executable."""
        assert main_script_path.exists()
        assert main_script_path.is_file()

    def test_help(self, main_script_path):
        result = subprocess.run(
            [sys.executable, str(main_script_path), "--help"], capture_output=True, text=True, timeout=120
        )
        assert result.returncode == 0
        assert "eval-beamform" in result.stdout

    def test_parser_commands(self):
        """Test each subcommand parses with the shared options."""
        parser = build_parser()
        for command in ("simulate", "train", "reconstruct", "eval-recon", "eval-beamform", "report"):
            args = parser.parse_args([command, "--seed", "3", "--out-dir", "run"])
            assert args.command == command
            assert args.seed == 3
            assert args.out_dir == "run"


class TestCommands:
    """Run the subcommands through cli()."""

    def test_simulate(self, config_file, temp_dir):
        out_dir = temp_dir / "run"

        assert cli(["simulate", "--config", str(config_file), "--out-dir", str(out_dir)]) == 0

        rirs, geometry = import_rir_archive(out_dir / "ground_truth.rira")
        assert rirs.shape == (256, 8)
        assert geometry.num_mics == 8
        manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["config"]["output.dir"] == str(out_dir)

    def test_simulate_is_deterministic(self, config_file, temp_dir):
        """Test two runs with the same seed produce identical archives."""
        for name in ("a", "b"):
            assert cli(["simulate", "--config", str(config_file), "--out-dir", str(temp_dir / name)]) == 0

        manifests = [json.loads((temp_dir / name / "manifest.json").read_text(encoding="utf-8")) for name in "ab"]
        assert manifests[0]["sha256"] == manifests[1]["sha256"]

    def test_eval_recon(self, config_file, temp_dir):
        out_dir = temp_dir / "run"

        assert cli(["eval-recon", "--config", str(config_file), "--out-dir", str(out_dir), "--seed", "3"]) == 0

        results = pd.read_csv(out_dir / "recon_results.csv")
        assert sorted(results["mask"]) == ["mask0", "random_0.5"]
        assert (out_dir / "t60_comparison.csv").is_file()

    def test_simulate_then_reconstruct(self, config_file, temp_dir):
        out_dir = temp_dir / "run"
        common = ["--config", str(config_file), "--out-dir", str(out_dir)]
        assert cli(["simulate", *common]) == 0

        assert cli(["reconstruct", *common, "--backend", "sci"]) == 0

        truth, _ = import_rir_archive(out_dir / "ground_truth.rira")
        estimate, _ = import_rir_archive(out_dir / "reconstructed.rira")
        np.testing.assert_array_equal(estimate.data[:, [0, 2, 4, 6]], truth.data[:, [0, 2, 4, 6]])
        assert not np.array_equal(estimate.data, truth.data)

    def test_eval_then_report(self, config_file, temp_dir):
        """Test the evaluation commands followed by the report."""
        out_dir = temp_dir / "run"
        common = ["--config", str(config_file), "--out-dir", str(out_dir)]

        assert cli(["eval-recon", *common]) == 0
        assert cli(["eval-beamform", *common]) == 0
        assert cli(["report", *common]) == 0

        assert (out_dir / "summary_beamform.csv").is_file()
        report = (out_dir / "report.md").read_text(encoding="utf-8")
        assert "# RIR Reconstruction Report" in report
        assert len(pd.read_csv(out_dir / "beamform_results.csv")) == 4


TINY_DIFFUSION = """\
diffusion.timesteps = 4
diffusion.patch_height = 16
diffusion.patch_width = 8
diffusion.stride_rows = 16
diffusion.stride_cols = 8
diffusion.channels = 8
diffusion.depth = 1
diffusion.time_dim = 8
diffusion.epochs = 1
diffusion.batch_size = 16
diffusion.num_rooms = 1
"""


@pytest.mark.slow
class TestDeterminism:
    """Every subcommand writes byte-identical outputs for a fixed seed."""

    OUTPUTS = {
        "simulate": ["ground_truth.rira"],
        "train": ["model.rdm", "loss_trace.csv"],
        "reconstruct": ["reconstructed.rira"],
        "eval-recon": ["recon_results.csv", "t60_comparison.csv", "edc_curves.csv"],
        "eval-beamform": ["beamform_results.csv"],
        "report": ["report.md", "summary_dist.csv", "summary_beamform.csv"],
    }

    def test_two_runs_match(self, temp_dir):
        config_path = temp_dir / "tiny.cfg"
        config_path.write_text(DESK_CONFIG + TINY_DIFFUSION, encoding="utf-8")

        for name in ("a", "b"):
            common = ["--config", str(config_path), "--out-dir", str(temp_dir / name), "--seed", "5"]
            for command in self.OUTPUTS:
                assert cli([command, *common]) == 0, command

        for command, files in self.OUTPUTS.items():
            for file_name in files:
                first = (temp_dir / "a" / file_name).read_bytes()
                second = (temp_dir / "b" / file_name).read_bytes()
                assert first == second, f"{command}: {file_name} differs"


class TestExitCodes:
    """Test cases for cli() exit codes."""

    def test_unknown_flag(self):
        assert cli(["simulate", "--frobnicate"]) == 2

    def test_missing_command(self):
        assert cli([]) == 2

    def test_config_error(self, temp_dir):
        path = temp_dir / "bad.cfg"
        path.write_text("room.t60 = 0.3\nroom.colour = blue\n", encoding="utf-8")

        assert cli(["simulate", "--config", str(path), "--out-dir", str(temp_dir / "run")]) == 2

    def test_unknown_mask_preset(self, temp_dir):
        path = temp_dir / "bad.cfg"
        path.write_text(DESK_CONFIG.replace("mask.presets = mask0", "mask.presets = mask0, mask7"), encoding="utf-8")

        assert cli(["eval-beamform", "--config", str(path), "--out-dir", str(temp_dir / "run")]) == 2

    def test_missing_config_file(self, temp_dir):
        assert cli(["simulate", "--config", str(temp_dir / "absent.cfg")]) == 2

    def test_diffusion_without_model(self, config_file, temp_dir):
        """Test that the diffusion backend requires a model file."""
        args = ["reconstruct", "--config", str(config_file), "--out-dir", str(temp_dir), "--backend", "diffusion"]
        assert cli(args) == 2

    def test_missing_input_archive(self, config_file, temp_dir):
        args = ["reconstruct", "--config", str(config_file), "--input", str(temp_dir / "absent.rira")]
        assert cli(args + ["--out-dir", str(temp_dir / "run")]) == 1

    def test_report_without_results(self, config_file, temp_dir):
        assert cli(["report", "--config", str(config_file), "--out-dir", str(temp_dir / "empty")]) == 1
