"""
Training Utilities

Shared batching, divergence checks and training-curve logs for both
networks.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Sequence, Union

import numpy as np

from .errors import TrainingDivergedError
from ..logger import get_logger

logger = get_logger(__name__)


@dataclass
class TrainingCurve:
    """Per-epoch metrics; epoch 0 is the untrained model"""
    columns: Sequence[str]
    rows: List[Dict[str, float]] = field(default_factory=list)

    def add(self, **values: Any) -> None:
        self.rows.append({c: values[c] for c in self.columns})

    def column(self, name: str) -> List[float]:
        return [row[name] for row in self.rows]

    @property
    def final(self) -> Dict[str, float]:
        return self.rows[-1] if self.rows else {}

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(self.columns))
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return path


def iterate_batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Shuffled index batches covering range(n) once"""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def param_norms(params: Mapping[str, np.ndarray]) -> Dict[str, float]:
    return {name: float(np.linalg.norm(value)) for name, value in sorted(params.items())}


def check_loss(loss: float, epoch: int, batch: int, params: Mapping[str, np.ndarray]) -> None:
    """Raise TrainingDivergedError with diagnostics when the loss is not finite"""
    if not math.isfinite(loss):
        norms = param_norms(params)
        logger.error("Training diverged", epoch=epoch, batch=batch, loss=loss, param_norms=norms)
        raise TrainingDivergedError(epoch, batch, norms)
