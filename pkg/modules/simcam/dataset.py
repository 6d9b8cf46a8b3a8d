"""
Dataset Builder

Plans the factorial train/test split (speed bins x senses x orientations x
trajectories x shapes for train; test trajectories at 0 deg orientation),
generates every sequence and writes a human-readable YAML manifest next to
the event files and ground-truth CSVs.
"""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .camera import CameraModel, Shape
from .sequence import GroundTruth, generate_scene, read_ground_truth, write_ground_truth, SceneObject
from .speed_bins import SimulationError, SpeedBinTable
from .trajectory import Trajectory, fit_lap_time
from ..config import DatasetSettings
from ..events import EventStream, read_events, write_events
from ..logger import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.yaml"


def derive_seed(seed: int, key: str) -> int:
    """Stable per-item seed from the run seed and an item key"""
    digest = hashlib.blake2b(f"{seed}:{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") & 0x7FFFFFFF


@dataclass(frozen=True)
class SequenceSpec:
    """One manifest entry"""
    name: str
    split: str
    shape: str
    shape_size: float
    trajectory: str
    orientation_deg: float
    sense: str
    speed_bin: int
    lap_time: float
    phase: float
    trajectory_scale: float
    depth: float
    seed: int
    noise_rate: float
    duration_s: float
    events_path: str
    gt_path: str
    max_radius_px: float = 0.0

    def build_shape(self) -> Shape:
        return Shape(self.shape, self.shape_size)

    def build_trajectory(self) -> Trajectory:
        return Trajectory(
            kind=self.trajectory,
            lap_time=self.lap_time,
            orientation_deg=self.orientation_deg,
            sense=self.sense,
            phase=self.phase,
            scale=self.trajectory_scale,
            depth=self.depth,
        )


@dataclass(frozen=True)
class Manifest:
    """Dataset manifest: shared settings plus one entry per sequence"""
    root: Path
    camera: CameraModel
    table: SpeedBinTable
    seed: int
    sequences: Tuple[SequenceSpec, ...]

    def split(self, name: str) -> List[SequenceSpec]:
        return [s for s in self.sequences if s.split == name]

    def load_sequence(self, spec: SequenceSpec) -> Tuple[EventStream, GroundTruth]:
        events = read_events(self.root / spec.events_path)
        gt = read_ground_truth(self.root / spec.gt_path)
        return events, gt

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset": {
                "seed": self.seed,
                "sequence_count": len(self.sequences),
                "camera": asdict(self.camera),
                "bins": [list(r) for r in self.table.ranges],
                "programmed_max": self.table.programmed_max,
            },
            "sequences": [asdict(s) for s in self.sequences],
        }


def _subsample(items: List[SequenceSpec], scale: float, seed: int, split: str) -> List[SequenceSpec]:
    if scale >= 1.0 or not items:
        return items
    keep = max(1, int(round(len(items) * scale)))
    rng = np.random.default_rng(derive_seed(seed, f"subsample:{split}"))
    chosen = sorted(rng.permutation(len(items))[:keep].tolist())
    return [items[i] for i in chosen]


def plan_dataset(settings: DatasetSettings, table: SpeedBinTable, seed: int) -> List[SequenceSpec]:
    """
    Factorial plan of train and test sequences.

    Train: bins x senses x orientations x train trajectories x shapes.
    Test: bins x senses x test trajectories x shapes at orientation 0.
    settings.scale keeps that fraction of each split.
    """
    lap_cache: Dict[Tuple[str, int], float] = {}

    def lap_time(kind: str, k: int) -> float:
        if (kind, k) not in lap_cache:
            template = Trajectory(kind, scale=settings.trajectory_scale, depth=settings.depth)
            lap_cache[(kind, k)] = fit_lap_time(template, k, table)
        return lap_cache[(kind, k)]

    def entry(split: str, k: int, sense: str, orientation: float, kind: str, shape: str) -> SequenceSpec:
        name = f"{split}_b{k}_{kind}_{shape}_{sense}_o{int(orientation)}"
        item_seed = derive_seed(seed, name)
        phase = float(np.random.default_rng(item_seed).uniform(0.0, 1.0))
        return SequenceSpec(
            name=name,
            split=split,
            shape=shape,
            shape_size=settings.shape_size,
            trajectory=kind,
            orientation_deg=float(orientation),
            sense=sense,
            speed_bin=k,
            lap_time=lap_time(kind, k),
            phase=phase,
            trajectory_scale=settings.trajectory_scale,
            depth=settings.depth,
            seed=item_seed,
            noise_rate=settings.noise_rate,
            duration_s=settings.duration_s,
            events_path=f"events/{name}.tofe",
            gt_path=f"gt/{name}.csv",
        )

    bins = range(1, table.n_bins + 1)
    train = [
        entry("train", k, sense, orientation, kind, shape)
        for k in bins
        for sense in settings.senses
        for orientation in settings.orientations
        for kind in settings.train_trajectories
        for shape in settings.shapes
    ]
    test = [
        entry("test", k, sense, 0.0, kind, shape)
        for k in bins
        for sense in settings.senses
        for kind in settings.test_trajectories
        for shape in settings.shapes
    ]
    return _subsample(train, settings.scale, seed, "train") + _subsample(test, settings.scale, seed, "test")


def _generate_one(args: Tuple[SequenceSpec, CameraModel, SpeedBinTable, str]) -> SequenceSpec:
    spec, camera, table, root = args
    scene = generate_scene(
        [SceneObject(spec.build_shape(), spec.build_trajectory())],
        camera,
        spec.duration_s,
        noise_rate=spec.noise_rate,
        seed=spec.seed,
        table=table,
    )
    write_events(scene.events, Path(root) / spec.events_path)
    write_ground_truth(scene.ground_truths[0], Path(root) / spec.gt_path)
    return SequenceSpec(**{**asdict(spec), "max_radius_px": float(scene.max_radius_px[0])})


def generate_dataset(
    root: Union[str, Path],
    specs: Sequence[SequenceSpec],
    camera: CameraModel,
    table: SpeedBinTable,
    seed: int,
    workers: int = 1,
) -> Manifest:
    """Generate every planned sequence under root and write the manifest"""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(spec, camera, table, str(root)) for spec in specs]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_generate_one, jobs))
    else:
        done = []
        for i, job in enumerate(jobs, start=1):
            done.append(_generate_one(job))
            logger.info("Generated sequence", name=job[0].name, index=i, total=len(jobs))

    manifest = Manifest(root, camera, table, seed, tuple(done))
    with open(root / MANIFEST_NAME, "w") as f:
        yaml.safe_dump(manifest.to_dict(), f, sort_keys=False, default_flow_style=False)

    logger.info("Dataset written", root=str(root), sequences=len(done))
    return manifest


def load_manifest(root: Union[str, Path]) -> Manifest:
    """
    Read a dataset manifest.

    Raises:
        FileNotFoundError: no manifest under root
        SimulationError: manifest is malformed
    """
    root = Path(root)
    path = root / MANIFEST_NAME
    if not path.exists():
        logger.error("Dataset manifest not found", path=str(path))
        raise FileNotFoundError(f"Dataset manifest not found: {path}")

    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    try:
        info = raw["dataset"]
        camera = CameraModel(**info["camera"])
        table = SpeedBinTable.from_ranges(info["bins"], info["programmed_max"])
        sequences = tuple(SequenceSpec(**entry) for entry in raw.get("sequences") or [])
    except (KeyError, TypeError) as e:
        raise SimulationError(f"{path}: malformed manifest ({e})") from e

    return Manifest(root, camera, table, int(info["seed"]), sequences)


def find_sequence(manifest: Manifest, name: str) -> Optional[SequenceSpec]:
    return next((s for s in manifest.sequences if s.name == name), None)
