"""
Cascade Inference

OFS stages run from the fastest speed bin to the slowest. Each stage's
window output is closed, inverted and multiplied into the input of the next
stage, so events are claimed by the fastest bin that fires on them. Every
stage with enough spiking pixels then goes through OFPD; those runs are
independent and may execute concurrently.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .morphology import CascadeError, CascadeOrderError, CascadeShapeError, apply_mask, make_mask
from ..events import BinnedVolume, EventStream, bin_events, iter_windows
from ..logger import get_logger
from ..models import OfpdModel, OfsModel, OfsOutput, ofpd_forward, ofs_forward
from ..simcam import SpeedBinTable

logger = get_logger(__name__)

FLOW_COLUMNS = ("t_start_us", "dt_us", "bin", "cx", "cy", "dir_rad", "rep_speed", "support")


@dataclass(frozen=True)
class ObjectFlow:
    """One detected object in one window"""
    t_start: int
    dt: int
    speed_bin: int
    center: Tuple[float, float]
    direction: float
    representative_speed: float
    support: int

    def __post_init__(self) -> None:
        if self.speed_bin < 1:
            raise CascadeError(f"speed bin must be at least 1, got {self.speed_bin}")
        if self.support < 0:
            raise CascadeError(f"support must be non-negative, got {self.support}")


@dataclass(frozen=True, eq=False)
class CascadeStage:
    speed_bin: int
    input: BinnedVolume
    output: OfsOutput
    mask: np.ndarray


@dataclass(frozen=True, eq=False)
class CascadeTrace:
    """Every stage of one window, fastest bin first, plus the stitched flows"""
    stages: List[CascadeStage] = field(default_factory=list)
    flows: List[ObjectFlow] = field(default_factory=list)

    @property
    def remainder(self) -> Optional[BinnedVolume]:
        """Input left over after the slowest stage"""
        if not self.stages:
            return None
        last = self.stages[-1]
        return apply_mask(last.input, last.mask)


def check_models(ofs_models: Sequence[OfsModel], ofpd_model: OfpdModel, table: SpeedBinTable) -> None:
    """
    Raises:
        CascadeOrderError: bins are not strictly descending or not in the table
        CascadeShapeError: models disagree on spatial shape
    """
    bins = [m.speed_bin for m in ofs_models]
    if any(a <= b for a, b in zip(bins, bins[1:])):
        raise CascadeOrderError(f"OFS models must be ordered fastest bin first, got bins {bins}")
    if any(not 1 <= k <= table.n_bins for k in bins):
        raise CascadeOrderError(f"OFS bins {bins} outside 1..{table.n_bins}")
    shapes = {m.shape for m in ofs_models} | {ofpd_model.shape}
    if len(shapes) > 1:
        raise CascadeShapeError(f"models disagree on spatial shape: {sorted(shapes)}")


def run_cascade(
    volume: BinnedVolume,
    ofs_models: Sequence[OfsModel],
    ofpd_model: OfpdModel,
    table: SpeedBinTable,
    min_support: int = 10,
    close_kernel: int = 5,
    workers: int = 1,
) -> CascadeTrace:
    """
    Full cascade over one window, keeping every intermediate.

    Raises:
        CascadeOrderError, CascadeShapeError: see check_models; also a
            volume whose grid differs from the models'
    """
    check_models(ofs_models, ofpd_model, table)
    if volume.shape != ofpd_model.shape:
        raise CascadeShapeError(f"volume grid {volume.shape} does not match model shape {ofpd_model.shape}")

    stages: List[CascadeStage] = []
    current = volume
    for model in ofs_models:
        output = ofs_forward(model, current)
        mask = make_mask(output.aggregate, close_kernel)
        stages.append(CascadeStage(model.speed_bin, current, output, mask))
        current = apply_mask(current, mask)

    detected = [s for s in stages if s.output.support >= min_support]
    grids = [s.output.aggregate for s in detected]
    if workers > 1 and len(grids) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(grids))) as pool:
            predictions = list(pool.map(lambda g: ofpd_forward(ofpd_model, g), grids))
    else:
        predictions = [ofpd_forward(ofpd_model, g) for g in grids]

    flows = [
        ObjectFlow(
            t_start=volume.t_start,
            dt=volume.dt,
            speed_bin=stage.speed_bin,
            center=pred.center,
            direction=pred.direction,
            representative_speed=table.representative_speed(stage.speed_bin),
            support=stage.output.support,
        )
        for stage, pred in zip(detected, predictions)
    ]
    flows.sort(key=lambda f: -f.speed_bin)

    logger.debug(
        "Cascade window",
        t_start=volume.t_start,
        events=volume.total(),
        supports=[s.output.support for s in stages],
        flows=len(flows),
    )
    return CascadeTrace(stages, flows)


def cascade_infer(
    volume: BinnedVolume,
    ofs_models: Sequence[OfsModel],
    ofpd_model: OfpdModel,
    table: SpeedBinTable,
    min_support: int = 10,
    close_kernel: int = 5,
    workers: int = 1,
) -> List[ObjectFlow]:
    """ObjectFlows of one window, fastest bin first"""
    return run_cascade(volume, ofs_models, ofpd_model, table, min_support, close_kernel, workers).flows


def infer_stream(
    events: EventStream,
    ofs_models: Sequence[OfsModel],
    ofpd_model: OfpdModel,
    table: SpeedBinTable,
    dt: int,
    B: int,
    min_support: int = 10,
    close_kernel: int = 5,
    workers: int = 1,
    t_end: Optional[int] = None,
) -> Iterable[Tuple[BinnedVolume, CascadeTrace]]:
    """
    Run the cascade over every full window of an event stream.

    Events after the last full window are not processed; their count is
    logged at debug level.
    """
    if t_end is None:
        t_end = events.duration_us()
    covered = 0
    for t_start in iter_windows(t_end, dt):
        volume = bin_events(events, t_start, dt, B, events.height, events.width)
        covered = t_start + dt
        yield volume, run_cascade(volume, ofs_models, ofpd_model, table, min_support, close_kernel, workers)

    dropped = int(np.count_nonzero(events.t >= covered))
    if dropped:
        logger.debug("Dropped events after the last full window", dropped=dropped, covered_until=covered, dt=dt)


def write_flows_csv(flows: Iterable[ObjectFlow], path: Union[str, Path]) -> int:
    """Write flows (header always present); returns the row count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(FLOW_COLUMNS)
        for flow in flows:
            writer.writerow(
                [
                    flow.t_start,
                    flow.dt,
                    flow.speed_bin,
                    repr(flow.center[0]),
                    repr(flow.center[1]),
                    repr(flow.direction),
                    repr(flow.representative_speed),
                    flow.support,
                ]
            )
            count += 1
    return count


def read_flows_csv(path: Union[str, Path], n_bins: Optional[int] = None) -> List[ObjectFlow]:
    """
    Raises:
        CascadeError: a row names a speed bin outside 1..n_bins
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        flows = [
            ObjectFlow(
                t_start=int(row["t_start_us"]),
                dt=int(row["dt_us"]),
                speed_bin=int(row["bin"]),
                center=(float(row["cx"]), float(row["cy"])),
                direction=float(row["dir_rad"]),
                representative_speed=float(row["rep_speed"]),
                support=int(row["support"]),
            )
            for row in reader
        ]
    if n_bins is not None:
        bad = [flow.speed_bin for flow in flows if flow.speed_bin > n_bins]
        if bad:
            raise CascadeError(f"{path}: speed bins {sorted(set(bad))} outside 1..{n_bins}")
    return flows
