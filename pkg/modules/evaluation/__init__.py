"""
Evaluation Module

pixE / dirE / speedE metrics, bin accuracy, and the dt and noise sweeps.
"""

from .metrics import EvalReport, EvaluationError, MissingModelError, WindowResult, primary_flow, window_errors
from .harness import (
    NOISE_COLUMNS,
    REFERENCE_ROWS,
    SWEEP_COLUMNS,
    ModelSet,
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

__all__ = [
    "EvalReport",
    "EvaluationError",
    "MissingModelError",
    "ModelSet",
    "NOISE_COLUMNS",
    "REFERENCE_ROWS",
    "SWEEP_COLUMNS",
    "WindowResult",
    "dt_sweep",
    "evaluate",
    "format_sweep_table",
    "load_model_set",
    "model_dir",
    "noise_sweep",
    "ofpd_checkpoint_path",
    "ofs_checkpoint_path",
    "primary_flow",
    "window_errors",
    "write_noise_csv",
    "write_sweep_csv",
    "write_windows_csv",
]
