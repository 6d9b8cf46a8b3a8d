"""
Metrics

Per-window errors against ground truth and the EvalReport aggregate. All
aggregates are plain means of per-window values.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..cascade import ObjectFlow
from ..simcam import GroundTruthSample, wrap_angle


class EvaluationError(RuntimeError):
    """Base class for evaluation errors"""


class MissingModelError(EvaluationError):
    """No trained checkpoint for a requested dt or speed bin"""


def window_errors(pred: ObjectFlow, gt: GroundTruthSample) -> Tuple[float, float, float]:
    """
    (pixE px, dirE deg, speedE m/s) of one prediction.

    dirE is the wrapped absolute angle difference, in [0, 180].
    """
    pix = math.hypot(pred.center[0] - gt.center_px[0], pred.center[1] - gt.center_px[1])
    direction = abs(math.degrees(float(wrap_angle(pred.direction - gt.direction_px))))
    speed = abs(pred.representative_speed - gt.speed)
    return pix, direction, speed


@dataclass(frozen=True)
class WindowResult:
    sequence: str
    t_start: int
    gt_bin: int
    pred_bin: int
    pixE: Optional[float]
    dirE: Optional[float]
    speedE: Optional[float]
    spike_pixels: int
    input_pixels: int

    @property
    def detected(self) -> bool:
        return self.pred_bin > 0


def primary_flow(flows: List[ObjectFlow]) -> Optional[ObjectFlow]:
    """Flow with the largest support; ties go to the faster bin"""
    if not flows:
        return None
    return max(flows, key=lambda f: (f.support, f.speed_bin))


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


@dataclass
class EvalReport:
    """Errors and detection statistics over a set of windows"""
    dt: int
    noise_rate: float = 0.0
    windows: List[WindowResult] = field(default_factory=list)

    def _detected(self) -> List[WindowResult]:
        return [w for w in self.windows if w.detected]

    @property
    def samples(self) -> int:
        return len(self.windows)

    @property
    def pixE(self) -> float:
        return _mean([w.pixE for w in self._detected()])  # type: ignore[misc]

    @property
    def dirE(self) -> float:
        return _mean([w.dirE for w in self._detected()])  # type: ignore[misc]

    @property
    def speedE(self) -> float:
        return _mean([w.speedE for w in self._detected()])  # type: ignore[misc]

    @property
    def detection_rate(self) -> float:
        return len(self._detected()) / self.samples if self.samples else float("nan")

    @property
    def bin_accuracy(self) -> float:
        """Fraction of windows whose primary detection has the true bin"""
        if not self.samples:
            return float("nan")
        return sum(w.pred_bin == w.gt_bin for w in self.windows) / self.samples

    @property
    def spike_rate(self) -> float:
        """OFS spiking pixels per input event pixel"""
        inputs = sum(w.input_pixels for w in self.windows)
        return sum(w.spike_pixels for w in self.windows) / inputs if inputs else 0.0

    def detections_per_bin(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for w in self._detected():
            counts[w.pred_bin] = counts.get(w.pred_bin, 0) + 1
        return dict(sorted(counts.items()))

    def per_sequence(self) -> Dict[str, "EvalReport"]:
        groups: Dict[str, EvalReport] = {}
        for w in self.windows:
            groups.setdefault(w.sequence, EvalReport(self.dt, self.noise_rate)).windows.append(w)
        return groups

    def summary(self) -> Dict[str, float]:
        return {
            "dt": self.dt,
            "noise_rate": self.noise_rate,
            "samples": self.samples,
            "pixE": self.pixE,
            "dirE": self.dirE,
            "speedE": self.speedE,
            "bin_accuracy": self.bin_accuracy,
            "detection_rate": self.detection_rate,
            "spike_rate": self.spike_rate,
        }
