"""
TOFFE Command Line

generate -> train -> infer -> eval -> sweep, each step reproducible from
the run config and its seed. Every command stores the resolved config next
to its outputs.

    toffe gen --config config/toffe.yaml --scale 0.25
    toffe train-ofs --bin 4
    toffe train-ofpd
    toffe infer --events data/dataset/events/test_b4_test-1_circle_clockwise_o0.tofe
    toffe infer --sequence test_b4_test-1_circle_clockwise_o0
    toffe eval --max-pixE 6 --max-dirE 20
    toffe sweep
    toffe noise-sweep
"""

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from modules.cascade import CascadeError, infer_stream, render_overlay, write_flows_csv
from modules.config import ConfigError, ConfigManager, RunConfig
from modules.evaluation import (
    EvalReport,
    EvaluationError,
    dt_sweep,
    evaluate,
    format_sweep_table,
    load_model_set,
    model_dir,
    noise_sweep,
    ofpd_checkpoint_path,
    ofs_checkpoint_path,
    write_noise_csv,
    write_sweep_csv,
    write_windows_csv,
)
from modules.events import EventError, read_events
from modules.logger import get_logger, setup_logging
from modules.models import (
    ModelError,
    load_examples,
    save_ofpd,
    save_ofs,
    split_validation,
    train_ofpd,
    train_ofs,
)
from modules.neuro import NeuroError
from modules.simcam import (
    CameraModel,
    Manifest,
    SimulationError,
    SpeedBinTable,
    derive_seed,
    find_sequence,
    generate_dataset,
    load_manifest,
    plan_dataset,
)

logger = get_logger(__name__)

DEFAULT_CONFIG = "config/toffe.yaml"
RESOLVED_CONFIG_NAME = "config.yaml"

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_THRESHOLD = 3

PROJECT_ERRORS = (
    ConfigError,
    FileNotFoundError,
    EventError,
    SimulationError,
    NeuroError,
    ModelError,
    CascadeError,
    EvaluationError,
)


class ToffeRunner:
    """Runs pipeline commands against one resolved run config"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.camera = CameraModel(**dataclasses.asdict(config.camera))
        self.table = SpeedBinTable.from_ranges(config.bins.ranges, config.bins.programmed_max)

    @property
    def seed(self) -> int:
        return self.config.run.seed

    @property
    def dt(self) -> int:
        return self.config.binning.dt_us

    def _store_config(self, directory: Path) -> None:
        ConfigManager.save_config(self.config, Path(directory) / RESOLVED_CONFIG_NAME)

    def _manifest(self) -> Manifest:
        return load_manifest(self.config.paths.dataset_dir)

    def cmd_gen(self) -> Manifest:
        """Plan and generate the train/test dataset"""
        settings = self.config.dataset
        specs = plan_dataset(settings, self.table, self.seed)
        logger.info("Planned dataset", sequences=len(specs), scale=settings.scale)
        manifest = generate_dataset(
            self.config.paths.dataset_dir, specs, self.camera, self.table, self.seed, workers=settings.workers
        )
        self._store_config(manifest.root)
        return manifest

    def _examples(self, windows_per_sequence: int) -> Tuple[list, list, Manifest]:
        manifest = self._manifest()
        train_specs, val_specs = split_validation(
            manifest.split("train"), self.config.dataset.val_fraction, self.seed
        )
        if not train_specs:
            raise ModelError(f"dataset {manifest.root} has no training sequences")
        B = self.config.binning.B
        train = load_examples(manifest, train_specs, self.dt, B, windows_per_sequence, self.seed)
        val = load_examples(manifest, val_specs, self.dt, B, windows_per_sequence, self.seed)
        return train, val, manifest

    def cmd_train_ofs(self, bins: Optional[Sequence[int]] = None) -> List[Path]:
        """Train one OFS network per requested speed bin (all bins by default)"""
        train, val, manifest = self._examples(self.config.ofs.windows_per_sequence)
        shape = (manifest.camera.height, manifest.camera.width)
        out_dir = model_dir(self.config.paths.checkpoint_dir, self.dt)

        written = []
        for k in bins or range(self.table.n_bins, 0, -1):
            if not 1 <= k <= self.table.n_bins:
                raise ModelError(f"speed bin {k} outside 1..{self.table.n_bins}")
            model, curve = train_ofs(
                train, val, k, self.table, self.config.ofs, derive_seed(self.seed, f"ofs:{k}"), shape
            )
            path = ofs_checkpoint_path(self.config.paths.checkpoint_dir, self.dt, k)
            save_ofs(path, model, {"dt_us": self.dt, "B": self.config.binning.B, "seed": self.seed})
            curve.write_csv(out_dir / f"ofs_bin{k}_curve.csv")
            written.append(path)
        self._store_config(out_dir)
        return written

    def cmd_train_ofpd(self) -> Path:
        """Train the pose and direction network on ground-truth-separated events"""
        train, val, manifest = self._examples(self.config.ofpd.windows_per_sequence)
        train = [ex for ex in train if ex.object_grid.any()]
        val = [ex for ex in val if ex.object_grid.any()]
        shape = (manifest.camera.height, manifest.camera.width)

        model, curve = train_ofpd(train, val, self.config.ofpd, derive_seed(self.seed, "ofpd"), shape)
        path = ofpd_checkpoint_path(self.config.paths.checkpoint_dir, self.dt)
        save_ofpd(path, model, {"dt_us": self.dt, "B": self.config.binning.B, "seed": self.seed})
        out_dir = model_dir(self.config.paths.checkpoint_dir, self.dt)
        curve.write_csv(out_dir / "ofpd_curve.csv")
        self._store_config(out_dir)
        return path

    def sequence_events(self, name: str) -> Path:
        """Event file of a dataset sequence, looked up by its manifest name"""
        manifest = self._manifest()
        spec = find_sequence(manifest, name)
        if spec is None:
            raise SimulationError(f"no sequence named {name!r} in {manifest.root}")
        return manifest.root / spec.events_path

    def cmd_infer(self, events_path: Path, out_dir: Optional[Path] = None) -> Path:
        """ObjectFlow CSV (and optional overlays) for one event file"""
        events = read_events(events_path)
        models = load_model_set(self.config.paths.checkpoint_dir, self.dt, self.table.n_bins)
        out_dir = Path(out_dir or Path(self.config.paths.output_dir) / "infer" / Path(events_path).stem)
        inference = self.config.inference

        flows = []
        windows = infer_stream(
            events,
            models.ofs_models,
            models.ofpd_model,
            self.table,
            self.dt,
            self.config.binning.B,
            inference.min_support,
            inference.close_kernel,
            inference.workers,
        )
        for volume, trace in windows:
            flows.extend(trace.flows)
            if inference.overlays and trace.flows:
                render_overlay(volume, trace, self.table.n_bins, out_dir / "overlays" / f"{volume.t_start:010d}.png")

        csv_path = out_dir / "flows.csv"
        rows = write_flows_csv(flows, csv_path)
        self._store_config(out_dir)
        logger.info(
            "Inference finished",
            events=len(events),
            duration_us=events.duration_us(),
            flows=rows,
            output=str(csv_path),
        )
        return csv_path

    def _eval_kwargs(self) -> dict:
        inference = self.config.inference
        return {
            "min_support": inference.min_support,
            "close_kernel": inference.close_kernel,
            "workers": inference.workers,
            "seed": self.seed,
        }

    def cmd_eval(self) -> EvalReport:
        manifest = self._manifest()
        models = load_model_set(self.config.paths.checkpoint_dir, self.dt, self.table.n_bins)
        report = evaluate(manifest, manifest.split("test"), models, self.config.binning.B, **self._eval_kwargs())

        out_dir = Path(self.config.paths.output_dir) / "eval" / f"dt{self.dt}"
        write_windows_csv(report, out_dir / "windows.csv")
        write_sweep_csv([report], out_dir / "summary.csv")
        self._store_config(out_dir)
        print(format_sweep_table([report]))
        print(
            f"bin accuracy {report.bin_accuracy:.3f}  detection rate {report.detection_rate:.3f}  "
            f"detections per bin {report.detections_per_bin()}"
        )
        return report

    def cmd_sweep(self) -> List[EvalReport]:
        manifest = self._manifest()
        checkpoints = self.config.paths.checkpoint_dir
        reports = dt_sweep(
            manifest,
            manifest.split("test"),
            self.config.evaluation.dts,
            lambda dt: load_model_set(checkpoints, dt, self.table.n_bins),
            self.config.binning.B,
            **self._eval_kwargs(),
        )
        out_dir = Path(self.config.paths.output_dir) / "sweep"
        write_sweep_csv(reports, out_dir / "sweep.csv")
        self._store_config(out_dir)
        print(format_sweep_table(reports))
        return reports

    def cmd_noise_sweep(self) -> List[EvalReport]:
        manifest = self._manifest()
        models = load_model_set(self.config.paths.checkpoint_dir, self.dt, self.table.n_bins)
        reports = noise_sweep(
            manifest,
            manifest.split("test"),
            self.config.evaluation.noise_rates,
            models,
            self.config.binning.B,
            **self._eval_kwargs(),
        )
        out_dir = Path(self.config.paths.output_dir) / "noise" / f"dt{self.dt}"
        write_noise_csv(reports, out_dir / "noise.csv")
        self._store_config(out_dir)
        for r in reports:
            print(
                f"noise {r.noise_rate:>8.0f} ev/s  bin accuracy {r.bin_accuracy:.3f}  "
                f"pixE {r.pixE:.3f}  dirE {r.dirE:.3f}  spike rate {r.spike_rate:.3f}"
            )
        return reports


def check_thresholds(report: EvalReport, args: argparse.Namespace) -> List[str]:
    """Names of violated thresholds; NaN metrics count as violations"""
    checks = [
        ("pixE", args.max_pixE, report.pixE, False),
        ("dirE", args.max_dirE, report.dirE, False),
        ("speedE", args.max_speedE, report.speedE, False),
        ("bin_accuracy", args.min_bin_accuracy, report.bin_accuracy, True),
    ]
    failed = []
    for name, limit, value, at_least in checks:
        if limit is None:
            continue
        ok = value >= limit if at_least else value <= limit
        if not ok or np.isnan(value):
            failed.append(f"{name}={value:.4f} (limit {limit})")
    return failed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toffe", description="Object flow from event streams")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG, help="Run config (YAML path or name under config/)")
    common.add_argument("--seed", type=int, help="Override run.seed")
    common.add_argument("--dt", type=int, help="Override binning.dt_us")
    common.add_argument("--dev", action="store_true", help="Debug logging in human-readable form")

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Generate the synthetic dataset")
    gen.add_argument("--scale", type=float, help="Keep this fraction of each split")

    train_ofs_cmd = sub.add_parser("train-ofs", parents=[common], help="Train OFS networks")
    train_ofs_cmd.add_argument("--bin", type=int, action="append", dest="bins", help="Speed bin (repeatable; default all)")

    sub.add_parser("train-ofpd", parents=[common], help="Train the OFPD network")

    infer = sub.add_parser("infer", parents=[common], help="Run cascade inference on an event file")
    source = infer.add_mutually_exclusive_group(required=True)
    source.add_argument("--events", type=Path, help="Event file (.tofe)")
    source.add_argument("--sequence", help="Dataset sequence name from the manifest")
    infer.add_argument("--out", type=Path, help="Output directory")
    infer.add_argument("--overlays", action="store_true", help="Render overlay PNGs")

    ev = sub.add_parser("eval", parents=[common], help="Evaluate on the test split")
    ev.add_argument("--max-pixE", type=float, dest="max_pixE")
    ev.add_argument("--max-dirE", type=float, dest="max_dirE")
    ev.add_argument("--max-speedE", type=float, dest="max_speedE")
    ev.add_argument("--min-bin-accuracy", type=float, dest="min_bin_accuracy")

    sub.add_parser("sweep", parents=[common], help="dt sweep over evaluation.dts")
    sub.add_parser("noise-sweep", parents=[common], help="Noise sweep over evaluation.noise_rates")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = ConfigManager().load_config(args.config)
    if args.seed is not None:
        config = config.replace("run", seed=args.seed)
    if args.dt is not None:
        config = config.replace("binning", dt_us=args.dt)
    if getattr(args, "scale", None) is not None:
        config = config.replace("dataset", scale=args.scale)
    if getattr(args, "overlays", False):
        config = config.replace("inference", overlays=True)
    return config


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.dev:
        setup_logging(log_level="DEBUG", json_format=False)
    else:
        setup_logging(log_level=config.logging.level, json_format=config.logging.json)
    logger.info("Command started", command=args.command, seed=config.run.seed, dt_us=config.binning.dt_us)

    runner = ToffeRunner(config)
    if args.command == "gen":
        runner.cmd_gen()
    elif args.command == "train-ofs":
        runner.cmd_train_ofs(args.bins)
    elif args.command == "train-ofpd":
        runner.cmd_train_ofpd()
    elif args.command == "infer":
        events = args.events or runner.sequence_events(args.sequence)
        runner.cmd_infer(events, args.out)
    elif args.command == "eval":
        failed = check_thresholds(runner.cmd_eval(), args)
        if failed:
            logger.error("Acceptance thresholds violated", failed=failed)
            return EXIT_THRESHOLD
    elif args.command == "sweep":
        runner.cmd_sweep()
    elif args.command == "noise-sweep":
        runner.cmd_noise_sweep()
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except PROJECT_ERRORS as e:
        logger.error("Command failed", command=args.command, error=str(e), error_type=type(e).__name__)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
