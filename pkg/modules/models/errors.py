"""Model errors"""

from typing import Dict, Optional


class ModelError(RuntimeError):
    """Base class for model and training errors"""


class MissingGroundTruthError(ModelError):
    """No ground-truth sample close enough to a window midpoint"""

    def __init__(self, sequence: str, t_us: float):
        self.sequence = sequence
        self.t_us = t_us
        super().__init__(f"{sequence}: no ground truth near t={t_us:.0f} us")


class TrainingDivergedError(ModelError):
    """Loss or gradients went non-finite during training"""

    def __init__(self, epoch: int, batch: int, param_norms: Dict[str, float], parameter: Optional[str] = None):
        self.epoch = epoch
        self.batch = batch
        self.param_norms = param_norms
        self.parameter = parameter
        where = f" in gradient of {parameter!r}" if parameter else ""
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}{where}; parameter norms {param_norms}")
