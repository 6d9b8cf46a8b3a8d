"""
Evaluation Harness

Runs the cascade over held-out sequences, matches the primary detection of
every window to the ground truth at the window midpoint, and drives the dt
and noise sweeps.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from .metrics import EvalReport, MissingModelError, WindowResult, primary_flow, window_errors
from ..cascade import infer_stream
from ..logger import get_logger
from ..models import OfpdModel, OfsModel, load_ofpd, load_ofs, match_ground_truth
from ..simcam import Manifest, SequenceSpec, SpeedBinTable, derive_seed, inject_noise

logger = get_logger(__name__)

SWEEP_COLUMNS = ("dt", "pixE", "dirE", "speedE")
NOISE_COLUMNS = ("noise_rate", "pixE", "dirE", "speedE", "bin_accuracy", "detection_rate", "spike_rate")
WINDOW_COLUMNS = (
    "sequence", "t_start_us", "gt_bin", "pred_bin", "pixE", "dirE", "speedE", "spike_pixels", "input_pixels"
)

# Full-resolution reference results per dt (us): pixE px, dirE deg, speedE m/s.
REFERENCE_ROWS: Dict[int, tuple] = {
    5000: (14.135, 25.842, 19.948),
    2000: (8.406, 14.345, 16.677),
    1000: (6.626, 13.817, 11.867),
    500: (5.355, 10.769, 10.649),
    200: (5.404, 24.411, 15.632),
}


@dataclass(frozen=True, eq=False)
class ModelSet:
    """OFS models (fastest bin first) and the OFPD model trained for one dt"""
    dt: int
    ofs_models: List[OfsModel]
    ofpd_model: OfpdModel


def model_dir(checkpoint_dir: Union[str, Path], dt: int) -> Path:
    return Path(checkpoint_dir) / f"dt{dt}"


def ofs_checkpoint_path(checkpoint_dir: Union[str, Path], dt: int, bin_k: int) -> Path:
    return model_dir(checkpoint_dir, dt) / f"ofs_bin{bin_k}.tofc"


def ofpd_checkpoint_path(checkpoint_dir: Union[str, Path], dt: int) -> Path:
    return model_dir(checkpoint_dir, dt) / "ofpd.tofc"


def load_model_set(checkpoint_dir: Union[str, Path], dt: int, n_bins: int) -> ModelSet:
    """
    Raises:
        MissingModelError: a checkpoint for dt is absent
    """
    paths = [ofs_checkpoint_path(checkpoint_dir, dt, k) for k in range(n_bins, 0, -1)]
    paths.append(ofpd_checkpoint_path(checkpoint_dir, dt))
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        logger.error("Missing checkpoints", dt=dt, missing=missing)
        raise MissingModelError(f"no trained models for dt={dt}: missing {', '.join(missing)}")

    ofs_models = [load_ofs(p)[0] for p in paths[:-1]]
    ofpd_model, _ = load_ofpd(paths[-1])
    return ModelSet(dt, ofs_models, ofpd_model)


def evaluate(
    manifest: Manifest,
    specs: Sequence[SequenceSpec],
    models: ModelSet,
    B: int,
    min_support: int = 10,
    close_kernel: int = 5,
    workers: int = 1,
    noise_rate: float = 0.0,
    seed: int = 0,
) -> EvalReport:
    """
    Evaluate every full window of the given sequences.

    Extra uniform noise at noise_rate events/s is injected per sequence with
    a seed derived from the sequence name; noise_rate 0 leaves the data as is.

    Raises:
        MissingGroundTruthError: a window midpoint has no ground truth
    """
    table = manifest.table
    tolerance = 1e6 / manifest.camera.sample_rate
    report = EvalReport(models.dt, noise_rate)
    eval_logger = logger.bind(dt=models.dt, noise_rate=noise_rate)

    for spec in specs:
        events, gt = manifest.load_sequence(spec)
        t_end = int(round(spec.duration_s * 1e6))
        if noise_rate > 0:
            rng = np.random.default_rng(derive_seed(seed, f"noise:{spec.name}:{noise_rate}"))
            events = inject_noise(events, noise_rate, 0, t_end, rng)

        windows = infer_stream(
            events, models.ofs_models, models.ofpd_model, table, models.dt, B,
            min_support, close_kernel, workers, t_end=t_end,
        )
        eval_logger.debug("Evaluating sequence", sequence=spec.name, speed_bin=spec.speed_bin)
        for volume, trace in windows:
            sample = match_ground_truth(gt, volume.t_start, volume.dt, tolerance, spec.name)
            flow = primary_flow(trace.flows)
            errors = window_errors(flow, sample) if flow else (None, None, None)
            report.windows.append(
                WindowResult(
                    sequence=spec.name,
                    t_start=volume.t_start,
                    gt_bin=sample.speed_bin,
                    pred_bin=flow.speed_bin if flow else 0,
                    pixE=errors[0],
                    dirE=errors[1],
                    speedE=errors[2],
                    spike_pixels=sum(s.output.support for s in trace.stages),
                    input_pixels=int(volume.event_grid().sum()),
                )
            )

    summary = {
        k: (round(v, 4) if isinstance(v, float) else v)
        for k, v in report.summary().items()
        if k not in ("dt", "noise_rate")
    }
    eval_logger.info("Evaluated", **summary)
    return report


def dt_sweep(
    manifest: Manifest,
    specs: Sequence[SequenceSpec],
    dts: Iterable[int],
    models_for_dt: Union[Mapping[int, ModelSet], Callable[[int], ModelSet]],
    B: int,
    **kwargs,
) -> List[EvalReport]:
    """
    One report per dt.

    Raises:
        MissingModelError: no models for one of the dts
    """
    reports = []
    for dt in dts:
        if callable(models_for_dt):
            models = models_for_dt(dt)
        elif dt in models_for_dt:
            models = models_for_dt[dt]
        else:
            raise MissingModelError(f"no trained models for dt={dt}")
        reports.append(evaluate(manifest, specs, models, B, **kwargs))
    return reports


def noise_sweep(
    manifest: Manifest,
    specs: Sequence[SequenceSpec],
    noise_rates: Iterable[float],
    models: ModelSet,
    B: int,
    **kwargs,
) -> List[EvalReport]:
    """One report per injected noise rate, same models throughout"""
    return [evaluate(manifest, specs, models, B, noise_rate=rate, **kwargs) for rate in noise_rates]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_sweep_csv(reports: Sequence[EvalReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for r in reports:
            writer.writerow([r.dt, _fmt(r.pixE), _fmt(r.dirE), _fmt(r.speedE)])
    return path


def write_noise_csv(reports: Sequence[EvalReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(NOISE_COLUMNS)
        for r in reports:
            writer.writerow([_fmt(r.noise_rate)] + [_fmt(getattr(r, c)) for c in NOISE_COLUMNS[1:]])
    return path


def write_windows_csv(report: EvalReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(WINDOW_COLUMNS)
        for w in report.windows:
            writer.writerow(
                [
                    w.sequence,
                    w.t_start,
                    w.gt_bin,
                    w.pred_bin,
                    "" if w.pixE is None else _fmt(w.pixE),
                    "" if w.dirE is None else _fmt(w.dirE),
                    "" if w.speedE is None else _fmt(w.speedE),
                    w.spike_pixels,
                    w.input_pixels,
                ]
            )
    return path


def format_sweep_table(reports: Sequence[EvalReport], with_reference: bool = True) -> str:
    """Measured rows, then the published reference row for each dt"""
    lines = [f"{'dt':>8} {'pixE':>9} {'dirE':>9} {'speedE':>9}  source"]
    for r in reports:
        lines.append(f"{r.dt:>8d} {r.pixE:>9.3f} {r.dirE:>9.3f} {r.speedE:>9.3f}  measured")
    if with_reference:
        for r in reports:
            ref: Optional[tuple] = REFERENCE_ROWS.get(r.dt)
            if ref:
                lines.append(f"{r.dt:>8d} {ref[0]:>9.3f} {ref[1]:>9.3f} {ref[2]:>9.3f}  reference")
    return "\n".join(lines)
