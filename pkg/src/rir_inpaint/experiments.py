"""
Experiment orchestration: scene construction, masks, reconstruction and
beamforming evaluations, training-set simulation and the per-command
output files.
"""

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import resample_poly

from .archive import export_rir_archive, import_rir_archive
from .beamform import (
    apply_beamformer,
    estimate_noise_cov,
    mvdr_weights,
    null_projection_dist,
    steering_for_stft,
    stft,
)
from .config import MASK_PRESETS, ExperimentConfig
from .core import InvalidInputError, MicMask, RirMatrix, normalize_patch, tile_patches
from .diffusion import (
    DenoiserModel,
    NoiseSchedule,
    TrainResult,
    load_model,
    reconstruct_rir,
    save_model,
    train_denoiser,
)
from .interp import sci_interpolate
from .logger import get_logger, setup_logger
from .metrics import align_signals, cosine_distance, edc, estimate_t60, nmse, si_sdr, sir_improvement
from .report import (
    save_csv,
    save_loss_trace,
    save_markdown_report,
    summarize_beamforming,
    summarize_reconstruction,
    plot_data,
    merge_results,
)
from .roomsim import (
    ArrayGeometry,
    NoiseSpec,
    RoomSpec,
    frame,
    grid,
    make_source_signal,
    noise_source_position,
    render_scene,
    simulate_rir,
    three_rows,
    ula,
)
from .utils import ensure_output_directory, read_wav, sha256_file, write_json, write_wav

# Index sets for a 16-microphone array
FIXED_MASKS_16 = {
    "mask0": ("missing", (3, 7, 10, 14)),
    "mask1": ("missing", tuple(range(1, 16, 2))),
    "mask2": ("measured", (0, 5, 10, 15)),
    "mask3": ("measured", (0, 1, 2, 3)),
}
VARIANTS = ("Mics", "Full", "Missing", "Inpainted")
T60_MASK_RATIO = 0.5


def _scaled_indices(indices, num_mics: int) -> List[int]:
    if num_mics == 16:
        return list(indices)
    return sorted({int(round(i * (num_mics - 1) / 15.0)) for i in indices})


def make_mask(preset: str, num_mics: int, ratio: Optional[float] = None, seed: int = 0) -> MicMask:
    """
    Build a microphone mask.

    Presets mask0-mask3 use fixed index sets for 16 microphones (mask0 and
    mask2 scaled proportionally for other sizes, mask1 always drops the odd
    indices, mask3 stays one-sided); "all" keeps
    every microphone; "random" removes exactly round(ratio * N) microphones
    drawn without replacement.

    Args:
        preset: One of mask0..mask3, all, random
        num_mics: Array size N
        ratio: Missing fraction for the random preset
        seed: Seed for the random preset

    Returns:
        MicMask
    """
    if num_mics < 1:
        raise InvalidInputError(f"Array size must be positive, got {num_mics}")
    if preset == "all":
        return MicMask.all_true(num_mics)
    if preset == "random":
        if ratio is None or not 0.0 < ratio < 1.0:
            raise InvalidInputError(f"Random mask ratio must lie in (0, 1), got {ratio}")
        num_missing = int(round(ratio * num_mics))
        if num_missing >= num_mics:
            raise InvalidInputError(f"Ratio {ratio} leaves no measured microphone out of {num_mics}")
        missing = np.random.default_rng(seed).choice(num_mics, size=num_missing, replace=False)
        return MicMask.from_missing(num_mics, sorted(int(i) for i in missing))
    if preset not in FIXED_MASKS_16:
        raise InvalidInputError(f"Unknown mask preset '{preset}', expected one of {MASK_PRESETS}")

    kind, indices = FIXED_MASKS_16[preset]
    if preset == "mask1":
        indices = range(1, num_mics, 2)
    elif preset == "mask3" and num_mics != 16:
        indices = range(max(2, num_mics // 4))
    else:
        indices = _scaled_indices(indices, num_mics)
    if kind == "missing":
        return MicMask.from_missing(num_mics, indices)
    return MicMask.from_measured(num_mics, indices)


def noise_only_frames(lead_in: int, frame_length: int, hop: int) -> int:
    """Number of leading STFT frames that lie entirely inside the noise-only lead-in."""
    span = lead_in + (frame_length - hop) - frame_length
    return span // hop + 1 if span >= 0 else 0


class ExperimentRunner:
    """
    Runs the experiment commands for one configuration.
    """

    def setup_logging(self):
        """
        Configure logging for the run, with the log file next to the outputs.
        """
        setup_logger("rir_inpaint", log_dir=Path(self.config.output_dir) / "logs")
        self.logger = get_logger("experiments")
        self.logger.info(
            f"Initialized ExperimentRunner: array {self.config.array_preset}, seed {self.config.seed}"
        )

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the runner.

        Args:
            config: Experiment configuration
        """
        self.config = config
        self.setup_logging()
        self._truth: Optional[Tuple[RirMatrix, ArrayGeometry]] = None
        self._model: Optional[Tuple[DenoiserModel, NoiseSchedule]] = None

    # Scene construction

    def room(self, t60: Optional[float] = None) -> RoomSpec:
        cfg = self.config
        return RoomSpec(
            dimensions=cfg.room_dimensions,
            absorption=cfg.room_absorption if t60 is None else None,
            t60=cfg.room_t60 if t60 is None else t60,
            max_reflection_order=cfg.room_max_order,
        )

    def geometry(self, offset: Optional[np.ndarray] = None) -> ArrayGeometry:
        cfg = self.config
        if cfg.array_preset in ("ula16", "ula"):
            num_mics = 16 if cfg.array_preset == "ula16" else cfg.array_num_mics
            geometry = ula(num_mics, cfg.array_spacing, cfg.array_center, cfg.source_distance)
        elif cfg.array_preset == "three_rows":
            geometry = three_rows(source_distance=cfg.source_distance)
        elif cfg.array_preset == "frame":
            geometry = frame(source_distance=cfg.source_distance)
        else:
            geometry = grid(source_distance=cfg.source_distance)
        if offset is not None:
            geometry = ArrayGeometry(
                geometry.mic_positions + offset, geometry.source_position + offset, geometry.name
            )
        return geometry

    def ground_truth(self) -> Tuple[RirMatrix, ArrayGeometry]:
        """Simulated source-to-array RIRs of the configured room."""
        if self._truth is None:
            geometry = self.geometry()
            rirs = simulate_rir(self.room(), geometry, self.config.rir_length, self.config.sample_rate)
            self._truth = (rirs, geometry)
        return self._truth

    def noise_rirs(self, geometry: ArrayGeometry) -> RirMatrix:
        position = noise_source_position(geometry, self.config.noise_distance, self.config.noise_angle_deg)
        return simulate_rir(
            self.room(), geometry.with_source(position), self.config.rir_length, self.config.sample_rate
        )

    def source_signal(self) -> np.ndarray:
        """The configured WAV file, or bandlimited pink-noise bursts."""
        cfg = self.config
        if not cfg.source_wav:
            return make_source_signal(cfg.signal_duration, cfg.sample_rate, cfg.seed)
        signal, rate = read_wav(cfg.source_wav)
        if rate != cfg.sample_rate:
            self.logger.info(f"Resampling {cfg.source_wav} from {rate} Hz to {cfg.sample_rate} Hz")
            signal = resample_poly(signal, cfg.sample_rate, rate)
        if signal.size < cfg.rir_length:
            raise InvalidInputError(
                f"Source WAV has {signal.size} samples, fewer than the RIR length {cfg.rir_length}"
            )
        return signal

    # Reconstruction

    def model(self) -> Tuple[DenoiserModel, NoiseSchedule]:
        if self._model is None:
            path = self.config.require_model()
            model, schedule, _ = load_model(path)
            self.logger.info(f"Loaded denoiser from {path} (T={schedule.T})")
            self._model = (model, schedule)
        return self._model

    def reconstruct(
        self, measured: RirMatrix, mask: MicMask, backend: str, geometry: ArrayGeometry
    ) -> RirMatrix:
        """
        Fill the missing columns with the given backend.

        Args:
            measured: Matrix whose measured columns hold data
            mask: Measured/missing flags
            backend: "sci" or "diffusion"
            geometry: Array geometry (SCI interpolation axis)

        Returns:
            Full RirMatrix
        """
        if backend == "sci":
            return sci_interpolate(measured, mask, geometry.path_coordinates())
        if backend == "diffusion":
            model, schedule = self.model()
            settings = self.config.diffusion
            result = reconstruct_rir(
                measured,
                mask,
                model,
                schedule,
                settings.patch_grid(),
                seed=self.config.seed,
                resample_jumps=settings.resample_jumps,
                batch_size=settings.inference_batch,
            )
            return result.rirs
        raise InvalidInputError(f"Unknown backend '{backend}'")

    def _mask_conditions(self, num_mics: int) -> List[Dict]:
        cfg = self.config
        conditions = [
            {"mask": preset, "seed": -1, "mask_obj": make_mask(preset, num_mics)}
            for preset in cfg.mask_presets
        ]
        for ratio in cfg.random_ratios:
            for seed in cfg.random_seeds:
                conditions.append({
                    "mask": f"random_{ratio:g}",
                    "seed": int(seed),
                    "mask_obj": make_mask("random", num_mics, ratio, seed),
                })
        return conditions

    def run_reconstruction_eval(self) -> pd.DataFrame:
        """
        Score every (mask × backend) reconstruction against the ground truth.

        Returns:
            DataFrame with columns mask, mask_ratio, seed, num_missing, backend,
            nmse_db, cd, dist, dist_mean, flag
        """
        truth, geometry = self.ground_truth()
        conditions = self._mask_conditions(truth.num_mics)
        self.logger.info(
            f"Reconstruction eval: {len(conditions)} masks × {len(self.config.backends)} backends"
        )

        rows = []
        for condition in conditions:
            mask = condition["mask_obj"]
            for backend in self.config.backends:
                row = {
                    "mask": condition["mask"],
                    "mask_ratio": mask.ratio,
                    "seed": condition["seed"],
                    "num_missing": mask.L,
                    "backend": backend,
                    "nmse_db": np.nan,
                    "cd": np.nan,
                    "dist": np.nan,
                    "dist_mean": np.nan,
                    "flag": "",
                }
                if mask.all_measured:
                    row["flag"] = "no_missing_columns"
                    rows.append(row)
                    continue

                estimate = self.reconstruct(truth, mask, backend, geometry)
                cos = cosine_distance(truth, estimate, mask)
                dist = null_projection_dist(truth, estimate)
                row.update(
                    nmse_db=nmse(truth, estimate, mask),
                    cd=cos.value,
                    dist=dist.total,
                    dist_mean=dist.mean,
                    flag="degenerate_columns" if cos.degenerate_columns else "",
                )
                self.logger.info(
                    f"{condition['mask']} (seed {condition['seed']}) {backend}: "
                    f"NMSE {row['nmse_db']:.2f} dB, CD {row['cd']:.4f}, Dist {row['dist']:.4f}"
                )
                rows.append(row)

        df = pd.DataFrame(rows)
        return df.sort_values(["mask", "seed", "backend"], kind="mergesort").reset_index(drop=True)

    def t60_comparison(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """
        EDC and T60 of one missing microphone under a 50 % random mask, for
        the ground truth and every backend.

        Returns:
            (T60 rows, long-format EDC curves)
        """
        truth, geometry = self.ground_truth()
        seed = self.config.random_seeds[0] if self.config.random_seeds else 0
        mask = make_mask("random", truth.num_mics, T60_MASK_RATIO, seed)
        mic = int(mask.missing[0])

        sources = {"ground_truth": truth}
        for backend in self.config.backends:
            sources[backend] = self.reconstruct(truth, mask, backend, geometry)

        t60_rows, curves = [], []
        times = np.arange(truth.num_samples) / truth.sample_rate
        for method, rirs in sources.items():
            curve = edc(rirs.column(mic))
            estimate = estimate_t60(curve, truth.sample_rate)
            t60_rows.append({
                "method": method,
                "mic": mic,
                "t60_s": estimate.seconds,
                "reliable": estimate.reliable,
                "slope_db_per_s": estimate.slope,
            })
            curves.append(pd.DataFrame({"method": method, "time_s": times, "edc_db": curve}))
        return pd.DataFrame(t60_rows), pd.concat(curves, ignore_index=True)

    # Beamforming

    def _variant_output(self, weights, spectra: Dict[str, np.ndarray], channels, length: int) -> Dict[str, np.ndarray]:
        stft_cfg = self.config.stft
        return {
            name: apply_beamformer(weights, values[channels], stft_cfg, length)
            for name, values in spectra.items()
        }

    def run_beamforming_eval(self, wav_dir: Optional[Path] = None) -> pd.DataFrame:
        """
        Score the Mics / Full / Missing / Inpainted MVDR variants for every
        mask preset, noise type and SNR.

        The noise covariance is estimated from the noise-only lead-in frames
        of the mixture. SIR is the improvement over the reference microphone;
        SI-SDR is measured against the dry source after delay alignment.

        Args:
            wav_dir: Directory for enhanced WAVs (None disables export)

        Returns:
            DataFrame with columns mask, variant, method, noise_type, snr_db,
            sir_db, si_sdr_db, si_sdr_lag
        """
        cfg = self.config
        stft_cfg = cfg.stft
        truth, geometry = self.ground_truth()
        noise_rirs = self.noise_rirs(geometry) if "directional" in cfg.noise_types else None
        source = self.source_signal()
        lead_in = cfg.lead_in_samples
        ref = cfg.reference_mic
        num_frames = noise_only_frames(lead_in, stft_cfg.frame_length, stft_cfg.hop)

        masks = {preset: make_mask(preset, truth.num_mics) for preset in cfg.mask_presets}
        steering_full = steering_for_stft(truth, stft_cfg)
        estimates = {}
        for preset, mask in masks.items():
            for backend in cfg.backends:
                estimates[(preset, backend)] = steering_for_stft(
                    self.reconstruct(truth, mask, backend, geometry), stft_cfg
                )

        self.logger.info(
            f"Beamforming eval: {len(masks)} masks, noise {list(cfg.noise_types)}, "
            f"SNRs {list(cfg.snr_list)}, {num_frames} noise-only frames"
        )
        rows = []
        for noise_type in cfg.noise_types:
            spec = NoiseSpec(kind=noise_type, rirs=noise_rirs, geometry=geometry)
            for index, snr in enumerate(cfg.snr_list):
                scene = render_scene(
                    truth, source, spec, snr_db=snr, white_snr_db=cfg.white_snr_db,
                    seed=cfg.seed + index, reference_mic=ref, lead_in=lead_in,
                )
                length = scene.num_samples
                spectra = {
                    "speech": stft(scene.clean, stft_cfg),
                    "noise": stft(scene.noise_total, stft_cfg),
                    "mixture": stft(scene.mixture, stft_cfg),
                }
                if num_frames > 0:
                    noise_frames = spectra["mixture"][:, :num_frames]
                else:
                    self.logger.warning("No noise-only lead-in frames; estimating covariance from the noise component")
                    noise_frames = spectra["noise"]
                cov = estimate_noise_cov(noise_frames)
                speech_in = scene.clean[ref, lead_in:]
                noise_in = scene.noise_total[ref, lead_in:]

                def score(outputs):
                    sir = sir_improvement(outputs["speech"][lead_in:], outputs["noise"][lead_in:], speech_in, noise_in)
                    ref_a, est_a, lag = align_signals(source, outputs["mixture"][lead_in:], truth.num_samples)
                    return sir, si_sdr(ref_a, est_a), lag

                mic_outputs = {
                    "speech": scene.clean[ref], "noise": scene.noise_total[ref], "mixture": scene.mixture[ref]
                }
                all_channels = np.arange(truth.num_mics)
                full_outputs = self._variant_output(
                    mvdr_weights(steering_full, cov), spectra, all_channels, length
                )
                shared = {"Mics": (mic_outputs, "none"), "Full": (full_outputs, "none")}
                shared_scores = {name: score(out) for name, (out, _) in shared.items()}

                for preset, mask in masks.items():
                    outputs = {name: (out, method) for name, (out, method) in shared.items()}
                    scores = dict(shared_scores)
                    channels = mask.measured
                    missing_steer = steering_full.values[:, channels]
                    missing_out = self._variant_output(
                        mvdr_weights(missing_steer, cov.select(channels)), spectra, channels, length
                    )
                    outputs["Missing"] = (missing_out, "none")
                    scores["Missing"] = score(missing_out)
                    for backend in cfg.backends:
                        key = f"Inpainted/{backend}"
                        out = self._variant_output(
                            mvdr_weights(estimates[(preset, backend)], cov), spectra, all_channels, length
                        )
                        outputs[key] = (out, backend)
                        scores[key] = score(out)

                    for name, (out, method) in outputs.items():
                        sir, sdr, lag = scores[name]
                        variant = name.split("/")[0]
                        rows.append({
                            "mask": preset,
                            "variant": variant,
                            "method": method,
                            "noise_type": noise_type,
                            "snr_db": float(snr),
                            "sir_db": sir,
                            "si_sdr_db": sdr,
                            "si_sdr_lag": lag,
                        })
                        if wav_dir is not None:
                            suffix = "" if method == "none" else f"_{method}"
                            write_wav(
                                Path(wav_dir) / f"{noise_type}_{snr:+g}dB_{preset}_{variant}{suffix}.wav",
                                out["mixture"], cfg.sample_rate,
                            )
                    self.logger.debug(f"{noise_type} {snr:+g} dB {preset}: {len(outputs)} variants scored")

                if wav_dir is not None:
                    write_wav(Path(wav_dir) / f"{noise_type}_{snr:+g}dB_clean.wav", source, cfg.sample_rate)

        df = pd.DataFrame(rows)
        order = {name: i for i, name in enumerate(VARIANTS)}
        df["_variant_order"] = df["variant"].map(order)
        df = df.sort_values(
            ["noise_type", "mask", "_variant_order", "method", "snr_db"], kind="mergesort"
        ).drop(columns="_variant_order")
        return df.reset_index(drop=True)

    # Training

    def simulate_training_set(self) -> np.ndarray:
        """
        Normalized patches from rooms with random T60 and array placement.

        Returns:
            Array of shape (P, patch_height, patch_width)
        """
        cfg = self.config
        settings = cfg.diffusion
        rng = np.random.default_rng(cfg.seed)
        patches = []
        for room_index in range(settings.num_rooms):
            t60 = float(rng.uniform(settings.t60_min, settings.t60_max))
            offset = rng.uniform(-0.5, 0.5, size=3) * np.array([1.0, 1.0, 0.2])
            geometry = self.geometry(offset)
            rirs = simulate_rir(self.room(t60=t60), geometry, cfg.rir_length, cfg.sample_rate)
            tiles, _ = tile_patches(rirs, settings.patch_grid())
            patches.extend(normalize_patch(tile)[0] for tile in tiles)
            self.logger.info(f"Training room {room_index + 1}/{settings.num_rooms}: T60 {t60:.3f} s, {len(tiles)} patches")
        return np.stack(patches)

    def train(self) -> TrainResult:
        cfg = self.config
        settings = cfg.diffusion
        patches = self.simulate_training_set()
        width = settings.patch_grid().fit((cfg.rir_length, self.geometry().num_mics)).patch_width
        return train_denoiser(
            patches,
            settings.make_schedule(),
            settings.train_config(cfg.seed),
            settings.denoiser_config(patch_width=width),
        )

    # Commands

    def run_simulate(self) -> Path:
        """Write the ground-truth archive and a manifest."""
        output_path = ensure_output_directory(self.config.output_dir)
        rirs, geometry = self.ground_truth()
        archive_path = export_rir_archive(output_path / "ground_truth.rira", rirs, geometry)
        write_json(output_path / "manifest.json", {
            "command": "simulate",
            "config": self.config.to_dict(),
            "archive": archive_path.name,
            "shape": list(rirs.shape),
            "sample_rate": rirs.sample_rate,
            "sha256": sha256_file(archive_path),
        })
        self.logger.info(f"Simulation complete! Results saved to: {output_path}")
        return archive_path

    def run_train(self, model_path: Optional[Path] = None) -> Path:
        """Train the denoiser and write the model file and loss trace."""
        output_path = ensure_output_directory(self.config.output_dir)
        result = self.train()
        model_path = Path(model_path) if model_path else output_path / "model.rdm"
        save_model(model_path, result.model, self.config.diffusion.make_schedule(), {
            "loss_trace": result.loss_trace,
            "array_preset": self.config.array_preset,
            "seed": self.config.seed,
        })
        save_loss_trace(result.loss_trace, output_path / "loss_trace.csv")
        self.logger.info(f"Training complete! Model saved to: {model_path}")
        return model_path

    def run_reconstruct(
        self, input_path: Optional[Path] = None, output_path: Optional[Path] = None, backend: Optional[str] = None
    ) -> Path:
        """Reconstruct an archive under the configured mask."""
        cfg = self.config
        out_dir = ensure_output_directory(cfg.output_dir)
        input_path = Path(input_path) if input_path else out_dir / "ground_truth.rira"
        output_path = Path(output_path) if output_path else out_dir / "reconstructed.rira"
        backend = backend or cfg.backends[0]

        rirs, geometry = import_rir_archive(input_path)
        if cfg.mask_missing:
            mask = MicMask.from_missing(rirs.num_mics, cfg.mask_missing)
        else:
            mask = make_mask(cfg.mask_preset, rirs.num_mics, cfg.mask_ratio, cfg.mask_seed)
        self.logger.info(f"Reconstructing {mask.L} of {mask.size} microphones with {backend}")
        estimate = self.reconstruct(rirs, mask, backend, geometry)
        return export_rir_archive(output_path, estimate, geometry)

    def run_eval_recon(self) -> Path:
        """Reconstruction metrics, plot data and the EDC/T60 comparison."""
        output_path = ensure_output_directory(self.config.output_dir)
        results = self.run_reconstruction_eval()
        csv_path = save_csv(results, output_path / "recon_results.csv")
        save_csv(plot_data(results), output_path / "plot_data.csv")
        t60, curves = self.t60_comparison()
        save_csv(t60, output_path / "t60_comparison.csv")
        save_csv(curves, output_path / "edc_curves.csv")
        self.logger.info(f"Reconstruction eval complete! Results saved to: {output_path}")
        return csv_path

    def run_eval_beamform(self) -> Path:
        """Beamforming metrics and enhanced WAVs."""
        output_path = ensure_output_directory(self.config.output_dir)
        results = self.run_beamforming_eval(wav_dir=ensure_output_directory(output_path / "wav"))
        csv_path = save_csv(results, output_path / "beamform_results.csv")
        self.logger.info(f"Beamforming eval complete! Results saved to: {output_path}")
        return csv_path

    def run_report(self, plots: bool = False) -> Path:
        """Merge result CSVs into summary tables and a Markdown report."""
        output_path = ensure_output_directory(self.config.output_dir)
        recon, beamform = merge_results(output_path)
        if recon is None and beamform is None:
            raise InvalidInputError(f"No result CSVs found in {output_path}")

        tables = {}
        if recon is not None:
            tables["dist"] = summarize_reconstruction(recon)
            save_csv(tables["dist"], output_path / "summary_dist.csv", index=True)
            save_csv(plot_data(recon), output_path / "plot_data.csv")
        if beamform is not None:
            tables["beamform"] = summarize_beamforming(beamform)
            save_csv(tables["beamform"], output_path / "summary_beamform.csv")

        t60_path = output_path / "t60_comparison.csv"
        t60 = pd.read_csv(t60_path) if t60_path.is_file() else None
        report_path = save_markdown_report(tables, t60, output_path / "report.md", self.config)

        if plots:
            from .visualization import create_all_visualizations

            create_all_visualizations(output_path, output_path / "figures")
        self.logger.info(f"Report complete! Results saved to: {report_path}")
        return report_path
