"""
Unit tests for the simulated camera, trajectories and dataset builder
"""

import math

import numpy as np
import pytest

from modules.config import DatasetSettings
from modules.events import EventStream
from modules.simcam import (
    CameraModel,
    InvalidTableError,
    NonPositiveIntensityError,
    Shape,
    SimulationError,
    SpeedBinTable,
    SpeedOutOfRangeError,
    Trajectory,
    emit_events,
    fit_lap_time,
    generate_dataset,
    generate_sequence,
    inject_noise,
    load_manifest,
    plan_dataset,
    read_ground_truth,
    render_intensity,
    silhouette,
    speed_to_bin,
    speeds_to_bins,
    trajectory_state,
    write_ground_truth,
)
from modules.simcam.sequence import log_ground_truth

TABLE = SpeedBinTable()
SMALL_CAMERA = CameraModel(width=64, height=64)


def at_pixel(camera, u, v, depth):
    """World point that projects onto pixel (u, v) at the given depth"""
    cx, cy = camera.principal_point
    f = camera.focal_px
    return np.array([(u - cx) * depth / f, (v - cy) * depth / f, depth])


class TestSpeedBins:
    """Test speed bin lookup"""

    def test_examples(self):
        """Test lookups on the default table"""
        assert speed_to_bin(10.0, TABLE) == 1
        assert speed_to_bin(18.0, TABLE) == 2
        assert speed_to_bin(50.0, TABLE) == 3
        assert speed_to_bin(144.0, TABLE) == 4
        assert speed_to_bin(499.9, TABLE) == 4

    def test_sub_threshold_sentinel(self):
        """Test speeds below bin 1 map to 0"""
        assert speed_to_bin(0.0, TABLE) == 0
        assert speed_to_bin(0.99, TABLE) == 0

    def test_above_table(self):
        """Test speeds at or above the top are rejected"""
        with pytest.raises(SpeedOutOfRangeError):
            speed_to_bin(500.0, TABLE)
        with pytest.raises(SpeedOutOfRangeError):
            speeds_to_bins(np.array([10.0, 600.0]), TABLE)

    def test_vectorized_agrees(self):
        """Test speeds_to_bins matches speed_to_bin"""
        speeds = np.random.default_rng(0).uniform(0, 499, 1000)

        bins = speeds_to_bins(speeds, TABLE)

        assert bins.tolist() == [speed_to_bin(s, TABLE) for s in speeds]

    def test_representative_speed(self):
        """Test midpoints of the programmed ranges"""
        assert TABLE.representative_speed(1) == pytest.approx(9.5)
        assert TABLE.representative_speed(2) == pytest.approx(30.0)
        assert TABLE.representative_speed(4) == pytest.approx(114.0)

    def test_gap_rejected(self):
        """Test non-contiguous ranges are rejected"""
        with pytest.raises(InvalidTableError):
            SpeedBinTable.from_ranges([[1, 10], [12, 500]])
        with pytest.raises(InvalidTableError):
            SpeedBinTable.from_ranges([[1, 10], [10, 5]])


class TestTrajectory:
    """Test trajectory kinematics"""

    def test_circle_start(self):
        """Test the circle's position and tangential velocity at t = 0"""
        traj = Trajectory("circle", lap_time=2.0, scale=1.0, depth=5.0)

        pos, vel = trajectory_state(traj, 0.0)

        np.testing.assert_allclose(pos, [1.0, 0.0, 5.0], atol=1e-12)
        assert np.linalg.norm(vel) == pytest.approx(math.pi)
        assert abs(np.dot(pos[:2], vel[:2])) < 1e-12

    @pytest.mark.parametrize("kind", ["circle", "lemniscate", "vertical-oval", "test-1", "test-2"])
    def test_periodic(self, kind):
        """Test every kind returns to its start after one lap"""
        traj = Trajectory(kind, lap_time=0.3, orientation_deg=45.0, phase=0.37)
        t = np.linspace(0.0, 0.3, 17)

        p0, v0 = trajectory_state(traj, t)
        p1, v1 = trajectory_state(traj, t + 0.3)

        np.testing.assert_allclose(p0, p1, atol=1e-12)
        np.testing.assert_allclose(v0, v1, atol=1e-9)

    @pytest.mark.parametrize("kind", ["lemniscate", "test-1", "test-2"])
    def test_velocity_matches_finite_difference(self, kind):
        """Test analytic velocity against central differences of position"""
        traj = Trajectory(kind, lap_time=0.05, orientation_deg=145.0, sense="clockwise")
        h = 1e-7

        for t in np.linspace(0.0, 0.05, 64, endpoint=False):
            _, vel = trajectory_state(traj, t)
            fd = (trajectory_state(traj, t + h)[0] - trajectory_state(traj, t - h)[0]) / (2 * h)
            assert np.linalg.norm(vel - fd) <= 1e-6 * np.linalg.norm(vel)

    def test_doubling_lap_time_halves_speed(self):
        """Test speed scales inversely with lap time"""
        fast = Trajectory("lemniscate", lap_time=0.02)
        slow = Trajectory("lemniscate", lap_time=0.04)
        t = np.linspace(0.0, 0.02, 33)

        _, v_fast = trajectory_state(fast, t)
        _, v_slow = trajectory_state(slow, 2 * t)

        np.testing.assert_array_equal(2 * v_slow, v_fast)

    def test_sense_reverses_velocity(self):
        """Test clockwise runs the same path backwards"""
        ccw = Trajectory("circle", sense="anticlockwise")
        cw = Trajectory("circle", sense="clockwise")

        p_ccw, v_ccw = trajectory_state(ccw, 0.0)
        p_cw, v_cw = trajectory_state(cw, 0.0)

        np.testing.assert_allclose(p_ccw, p_cw)
        np.testing.assert_allclose(v_ccw, -v_cw)

    def test_invalid(self):
        """Test unknown kinds and non-positive lap times are rejected"""
        with pytest.raises(SimulationError):
            Trajectory("spiral")
        with pytest.raises(SimulationError):
            Trajectory("circle", lap_time=0.0)

    @pytest.mark.parametrize("kind,bin_k", [("circle", 3), ("lemniscate", 2), ("vertical-oval", 1)])
    def test_fitted_lap_stays_in_bin(self, kind, bin_k):
        """Test a fitted lap time keeps the object inside its bin"""
        template = Trajectory(kind, scale=0.1, depth=0.3)
        traj = Trajectory(kind, lap_time=fit_lap_time(template, bin_k, TABLE), scale=0.1, depth=0.3)
        t = np.linspace(0.0, traj.lap_time, 2000, endpoint=False)

        _, vel = trajectory_state(traj, t)
        bins = speeds_to_bins(np.linalg.norm(vel, axis=-1), TABLE)

        assert np.mean(bins == bin_k) >= 0.98


class TestCamera:
    """Test projection, rendering and the event rule"""

    def test_behind_camera_renders_background(self):
        """Test an object behind the camera is invisible"""
        frame = render_intensity(Shape("circle", 0.1), np.array([0.0, 0.0, -1.0]), SMALL_CAMERA)

        assert np.all(frame == SMALL_CAMERA.background)

    def test_circle_area(self):
        """Test a centred circle covers about pi r^2 pixels"""
        shape = Shape("circle", 0.1)
        r = SMALL_CAMERA.radius_px(shape, 0.3)

        mask = silhouette(shape, np.array([0.0, 0.0, 0.3]), SMALL_CAMERA)

        assert abs(mask.sum() - math.pi * r * r) <= 0.05 * math.pi * r * r

    def test_square_footprint(self):
        """Test a square covers exactly the pixels within r of its centre"""
        shape = Shape("square", 4.3 / SMALL_CAMERA.focal_px)

        mask = silhouette(shape, at_pixel(SMALL_CAMERA, 20, 40, 1.0), SMALL_CAMERA)

        rows, cols = np.nonzero(mask)
        assert (rows.min(), rows.max(), cols.min(), cols.max()) == (36, 44, 16, 24)
        assert mask.sum() == 81

    @pytest.mark.parametrize("kind", ["square", "circle", "diamond", "star"])
    def test_shapes_nest(self, kind):
        """Test every shape lies inside its bounding square"""
        shape = Shape(kind, 0.05)
        position = np.array([0.01, -0.02, 0.3])

        mask = silhouette(shape, position, SMALL_CAMERA)
        box = silhouette(Shape("square", 0.05), position, SMALL_CAMERA)

        assert mask.any()
        assert not np.any(mask & ~box)

    def test_identical_frames_emit_nothing(self):
        """Test no change means no events"""
        frame = np.full((8, 8), 0.5)

        assert len(emit_events(frame, frame.copy(), 100, 0.2)) == 0

    def test_single_pixel_change(self):
        """Test one brightened pixel gives one ON event"""
        prev = np.full((8, 8), 0.2)
        nxt = prev.copy()
        nxt[3, 5] = 0.8

        events = emit_events(prev, nxt, 250, 0.2)

        assert list(events.x) == [5] and list(events.y) == [3]
        assert list(events.t) == [250] and list(events.p) == [1]
        assert list(emit_events(nxt, prev, 300, 0.2).p) == [0]

    def test_below_threshold(self):
        """Test changes under theta and an infinite theta emit nothing"""
        prev = np.full((4, 4), 0.5)
        nxt = prev * 1.1

        assert len(emit_events(prev, nxt, 1, 0.2)) == 0
        assert len(emit_events(prev, prev * 4, 1, math.inf)) == 0

    def test_non_positive_intensity(self):
        """Test log intensity of zero is refused"""
        prev = np.full((4, 4), 0.5)
        nxt = prev.copy()
        nxt[0, 0] = 0.0

        with pytest.raises(NonPositiveIntensityError):
            emit_events(prev, nxt, 1, 0.2)

    def test_translation_events_on_changed_pixels(self):
        """Test a moving square fires exactly where the silhouette changed"""
        shape = Shape("square", 5.2 / SMALL_CAMERA.focal_px)
        a = silhouette(shape, at_pixel(SMALL_CAMERA, 30, 30, 1.0), SMALL_CAMERA)
        b = silhouette(shape, at_pixel(SMALL_CAMERA, 31, 30, 1.0), SMALL_CAMERA)
        frame_a = np.where(a, 0.8, 0.2)
        frame_b = np.where(b, 0.8, 0.2)

        events = emit_events(frame_a, frame_b, 50, 0.2)

        on = {(x, y) for x, y, p in zip(events.x, events.y, events.p) if p == 1}
        off = {(x, y) for x, y, p in zip(events.x, events.y, events.p) if p == 0}
        assert on == {(x, y) for y, x in zip(*np.nonzero(b & ~a))}
        assert off == {(x, y) for y, x in zip(*np.nonzero(a & ~b))}
        assert len(on) == len(off) == 11


class TestSequence:
    """Test sequence generation and ground truth"""

    def test_static_object(self):
        """Test an object that never moves emits no events"""
        traj = Trajectory("circle", lap_time=math.inf, scale=0.05, depth=0.3)

        events, gt = generate_sequence(Shape("circle"), traj, SMALL_CAMERA, 0.002)

        assert len(events) == 0
        assert np.all(gt.speed == 0.0)
        assert np.all(gt.speed_bin == 0)

    def test_events_on_sample_clock(self):
        """Test events are sorted and stamped at sample instants"""
        template = Trajectory("circle")
        traj = Trajectory("circle", lap_time=fit_lap_time(template, 3, TABLE))

        events, gt = generate_sequence(Shape("square"), traj, SMALL_CAMERA, 0.005)

        assert len(events) > 0
        assert events.is_sorted()
        assert set(events.t.tolist()) <= set(gt.t_us[1:].tolist())
        assert np.all(gt.speed_bin == 3)

    def test_noise_count(self):
        """Test injected noise follows the requested rate"""
        rng = np.random.default_rng(0)

        noisy = inject_noise(EventStream.empty(64, 64), 10_000.0, 0, 1_000_000, rng)

        # Poisson count: mean 10_000, sigma 100
        assert abs(len(noisy) - 10_000) < 3 * math.sqrt(10_000)
        assert noisy.is_sorted()
        assert noisy.t.min() >= 0 and noisy.t.max() < 1_000_000

    def test_noise_is_seeded(self):
        """Test equal seeds give equal sequences"""
        traj = Trajectory("lemniscate", lap_time=0.04)

        a, _ = generate_sequence(Shape("star"), traj, SMALL_CAMERA, 0.003, noise_rate=5000.0, seed=11)
        b, _ = generate_sequence(Shape("star"), traj, SMALL_CAMERA, 0.003, noise_rate=5000.0, seed=11)

        assert a.records.tobytes() == b.records.tobytes()

    def test_direction_matches_projected_motion(self):
        """Test ground-truth direction follows the projected centre"""
        traj = Trajectory("test-1", lap_time=0.05, orientation_deg=45.0)
        t = np.arange(1, 2000, 37, dtype=np.int64)

        gt = log_ground_truth(traj, SMALL_CAMERA, t, TABLE)
        ahead = log_ground_truth(traj, SMALL_CAMERA, t + 1, TABLE)
        behind = log_ground_truth(traj, SMALL_CAMERA, t - 1, TABLE)

        fd = np.arctan2(ahead.cy - behind.cy, ahead.cx - behind.cx)
        diff = np.angle(np.exp(1j * (gt.direction - fd)))
        assert np.max(np.abs(diff)) < 1e-4
        assert np.all((gt.direction >= -math.pi) & (gt.direction < math.pi))

    def test_ground_truth_csv(self, tmp_path):
        """Test ground truth survives its CSV file exactly"""
        traj = Trajectory("vertical-oval", lap_time=0.03)
        _, gt = generate_sequence(Shape("diamond"), traj, SMALL_CAMERA, 0.002)
        path = tmp_path / "gt.csv"

        write_ground_truth(gt, path)
        loaded = read_ground_truth(path)

        for column in ("t_us", "cx", "cy", "velocity", "speed", "direction", "speed_bin"):
            np.testing.assert_array_equal(getattr(loaded, column), getattr(gt, column))

    def test_nearest_sample(self):
        """Test ground-truth lookup honours the tolerance"""
        _, gt = generate_sequence(Shape("circle"), Trajectory("circle", lap_time=0.02), SMALL_CAMERA, 0.001)

        assert gt.nearest(120.0, 50.0).t == 100
        assert gt.nearest(10_000.0, 50.0) is None


class TestDataset:
    """Test dataset planning and generation"""

    def test_full_plan_size(self):
        """Test the factorial plan sizes"""
        specs = plan_dataset(DatasetSettings(), TABLE, seed=0)

        train = [s for s in specs if s.split == "train"]
        test = [s for s in specs if s.split == "test"]
        assert len(train) == 384
        assert len(test) == 64
        assert len({s.name for s in specs}) == len(specs)
        assert all(s.orientation_deg == 0.0 for s in test)

    def test_scaled_plan(self):
        """Test scale keeps a fraction of each split"""
        specs = plan_dataset(DatasetSettings(scale=0.1), TABLE, seed=0)

        assert sum(s.split == "train" for s in specs) == 38
        assert sum(s.split == "test" for s in specs) == 6

    def test_generation_is_deterministic(self, tmp_path):
        """Test the same seed reproduces every file byte for byte"""
        settings = DatasetSettings(
            shapes=["circle"],
            train_trajectories=["circle"],
            test_trajectories=["test-1"],
            orientations=[0.0],
            senses=["anticlockwise"],
            duration_s=0.003,
            noise_rate=2000.0,
        )
        specs = plan_dataset(settings, TABLE, seed=5)

        first = generate_dataset(tmp_path / "a", specs, SMALL_CAMERA, TABLE, seed=5)
        second = generate_dataset(tmp_path / "b", specs, SMALL_CAMERA, TABLE, seed=5)

        assert len(first.sequences) == 8
        for spec in first.sequences:
            a = (tmp_path / "a" / spec.events_path).read_bytes()
            b = (tmp_path / "b" / spec.events_path).read_bytes()
            assert a == b
            assert spec.max_radius_px > 0
        assert first.sequences == second.sequences

    def test_manifest_reloads(self, tmp_path):
        """Test the manifest reads back to the same dataset"""
        settings = DatasetSettings(
            shapes=["square"],
            train_trajectories=["lemniscate"],
            test_trajectories=["test-2"],
            orientations=[90.0],
            senses=["clockwise"],
            duration_s=0.002,
        )
        specs = plan_dataset(settings, TABLE, seed=1)
        written = generate_dataset(tmp_path, specs, SMALL_CAMERA, TABLE, seed=1)

        loaded = load_manifest(tmp_path)

        assert loaded.sequences == written.sequences
        assert loaded.camera == SMALL_CAMERA
        assert loaded.table == TABLE
        events, gt = loaded.load_sequence(loaded.split("test")[0])
        assert len(gt) == 40
        assert events.width == 64

    def test_missing_manifest(self, tmp_path):
        """Test a directory without a manifest is reported"""
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path)
