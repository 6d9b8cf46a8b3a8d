"""
Simulated Camera Module

Synthetic scenes of shapes on parameterized trajectories, a simplified
log-intensity event camera, ground-truth logging and speed-bin labeling.
"""

from .speed_bins import (
    DEFAULT_RANGES,
    PROGRAMMED_MAX_SPEED,
    InvalidTableError,
    SimulationError,
    SpeedBinTable,
    SpeedOutOfRangeError,
    speed_to_bin,
    speeds_to_bins,
)
from .trajectory import (
    ORIENTATIONS,
    SENSES,
    TEST_TRAJECTORIES,
    TRAIN_TRAJECTORIES,
    Trajectory,
    fit_lap_time,
    speed_profile,
    trajectory_state,
)
from .camera import CameraModel, NonPositiveIntensityError, Shape, emit_events, render_intensity, silhouette
from .sequence import (
    GroundTruth,
    GroundTruthSample,
    Scene,
    SceneObject,
    generate_scene,
    generate_sequence,
    inject_noise,
    read_ground_truth,
    wrap_angle,
    write_ground_truth,
)
from .dataset import (
    Manifest,
    SequenceSpec,
    derive_seed,
    find_sequence,
    generate_dataset,
    load_manifest,
    plan_dataset,
)

__all__ = [
    "DEFAULT_RANGES",
    "PROGRAMMED_MAX_SPEED",
    "InvalidTableError",
    "SimulationError",
    "SpeedBinTable",
    "SpeedOutOfRangeError",
    "speed_to_bin",
    "speeds_to_bins",
    "ORIENTATIONS",
    "SENSES",
    "TEST_TRAJECTORIES",
    "TRAIN_TRAJECTORIES",
    "Trajectory",
    "fit_lap_time",
    "speed_profile",
    "trajectory_state",
    "CameraModel",
    "NonPositiveIntensityError",
    "Shape",
    "emit_events",
    "render_intensity",
    "silhouette",
    "GroundTruth",
    "GroundTruthSample",
    "Scene",
    "SceneObject",
    "generate_scene",
    "generate_sequence",
    "inject_noise",
    "read_ground_truth",
    "wrap_angle",
    "write_ground_truth",
    "Manifest",
    "SequenceSpec",
    "derive_seed",
    "find_sequence",
    "generate_dataset",
    "load_manifest",
    "plan_dataset",
]
