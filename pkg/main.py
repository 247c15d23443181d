"""
RIR Reconstruction Tool

Main entry point for simulating room impulse responses, training the
diffusion inpainter, reconstructing missing microphones and running the
reconstruction and beamforming evaluations.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Add src to Python path for imports
sys.path.insert(0, str(Path(__file__).parent / "src"))

from rir_inpaint.config import ConfigError, load_config
from rir_inpaint.core import RirInpaintError
from rir_inpaint.experiments import ExperimentRunner
from rir_inpaint.logger import get_logger


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Configuration file (key = value)")
    common.add_argument("--seed", type=int, default=None, help="Overrides the configured seed")
    common.add_argument("--out-dir", default=None, help="Output directory (overrides output.dir)")

    parser = argparse.ArgumentParser(description="RIR reconstruction for microphone arrays")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("simulate", parents=[common], help="Write the simulated ground-truth archive")

    train = commands.add_parser("train", parents=[common], help="Train the diffusion model")
    train.add_argument("--model", default=None, help="Model file (default: <out-dir>/model.rdm)")

    reconstruct = commands.add_parser("reconstruct", parents=[common], help="Fill missing microphones of an archive")
    reconstruct.add_argument("--input", default=None, help="Input archive (default: <out-dir>/ground_truth.rira)")
    reconstruct.add_argument("--output", default=None, help="Output archive (default: <out-dir>/reconstructed.rira)")
    reconstruct.add_argument("--backend", choices=["sci", "diffusion"], default=None, help="Reconstruction backend")

    commands.add_parser("eval-recon", parents=[common], help="NMSE / CD / Dist per mask and backend")
    commands.add_parser("eval-beamform", parents=[common], help="MVDR SIR / SI-SDR per mask and variant")

    report = commands.add_parser("report", parents=[common], help="Merge result CSVs into summaries")
    report.add_argument("--plots", action="store_true", help="Also render PNG figures")
    return parser


def run_command(args: argparse.Namespace) -> None:
    """
    Run one subcommand.

    Args:
        args: Parsed command-line arguments
    """
    config = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out_dir)
    if args.command in ("eval-recon", "eval-beamform") and "diffusion" in config.backends:
        config.require_model()
    if args.command == "reconstruct" and (args.backend or config.backends[0]) == "diffusion":
        config.require_model()

    runner = ExperimentRunner(config)
    if args.command == "simulate":
        runner.run_simulate()
    elif args.command == "train":
        runner.run_train(args.model)
    elif args.command == "reconstruct":
        runner.run_reconstruct(args.input, args.output, args.backend)
    elif args.command == "eval-recon":
        runner.run_eval_recon()
    elif args.command == "eval-beamform":
        runner.run_eval_beamform()
    elif args.command == "report":
        runner.run_report(plots=args.plots)


def cli(argv: Optional[List[str]] = None) -> int:
    """
    Command-line interface.

    Returns:
        0 on success, 2 on usage or configuration errors, 1 on runtime errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0

    logger = get_logger("main")
    try:
        run_command(args)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return 2
    except (RirInpaintError, ValueError, OSError, RuntimeError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return 1
    return 0


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
