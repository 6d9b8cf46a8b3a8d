"""
Unit tests for the toffe command line, run end to end on a tiny dataset
"""

import csv
from pathlib import Path

import pytest
import yaml

from modules.cli import EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD, main
from modules.events import EventStream, write_events


def write_config(directory: Path, **overrides) -> Path:
    """Tiny run config with every path under directory"""
    raw = {
        "run": {"seed": 3},
        "dataset": {
            "shapes": ["circle"],
            "train_trajectories": ["circle"],
            "test_trajectories": ["test-1"],
            "orientations": [0.0],
            "senses": ["anticlockwise"],
            "duration_s": 0.003,
            "val_fraction": 0.25,
        },
        "ofs": {"epochs": 1, "batch_size": 8, "windows_per_sequence": 2},
        "ofpd": {"epochs": 1, "batch_size": 8, "hidden": 8, "windows_per_sequence": 2},
        "inference": {"workers": 1},
        "evaluation": {"dts": [500], "noise_rates": [0.0, 1000.0]},
        "paths": {
            "dataset_dir": str(directory / "dataset"),
            "checkpoint_dir": str(directory / "checkpoints"),
            "output_dir": str(directory / "output"),
        },
        "logging": {"level": "WARNING", "json": False},
    }
    for section, values in overrides.items():
        raw.setdefault(section, {}).update(values)
    path = directory / "run.yaml"
    directory.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(raw))
    return path


def read_rows(path: Path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Generate, train both networks and return the run directory"""
    root = tmp_path_factory.mktemp("run")
    config = write_config(root)

    assert main(["gen", "--config", str(config)]) == EXIT_OK
    assert main(["train-ofs", "--config", str(config)]) == EXIT_OK
    assert main(["train-ofpd", "--config", str(config)]) == EXIT_OK
    return root, config


class TestPipeline:
    """Test the commands in sequence"""

    def test_gen_outputs(self, pipeline):
        """Test the dataset, its manifest and the resolved config exist"""
        root, _ = pipeline

        manifest = yaml.safe_load((root / "dataset" / "manifest.yaml").read_text())
        assert len(list((root / "dataset" / "events").glob("*.tofe"))) == 8
        assert manifest["dataset"]["sequence_count"] == 8
        assert (root / "dataset" / "config.yaml").exists()

    def test_checkpoints(self, pipeline):
        """Test one OFS checkpoint per bin plus OFPD, with curves"""
        root, _ = pipeline
        models = root / "checkpoints" / "dt500"

        assert sorted(p.name for p in models.glob("*.tofc")) == [
            "ofpd.tofc",
            "ofs_bin1.tofc",
            "ofs_bin2.tofc",
            "ofs_bin3.tofc",
            "ofs_bin4.tofc",
        ]
        assert read_rows(models / "ofs_bin4_curve.csv")[0] == ["epoch", "train_loss", "val_loss", "val_spike_rate"]
        assert (models / "config.yaml").exists()

    def test_infer(self, pipeline, tmp_path):
        """Test inference writes a flows CSV with the fixed header"""
        root, config = pipeline
        events = sorted((root / "dataset" / "events").glob("test_*.tofe"))[0]

        code = main(["infer", "--config", str(config), "--events", str(events), "--out", str(tmp_path), "--overlays"])

        assert code == EXIT_OK
        rows = read_rows(tmp_path / "flows.csv")
        assert rows[0] == ["t_start_us", "dt_us", "bin", "cx", "cy", "dir_rad", "rep_speed", "support"]
        assert all(1 <= int(r[2]) <= 4 for r in rows[1:])
        assert len(list((tmp_path / "overlays").glob("*.png"))) == len({r[0] for r in rows[1:]})

    def test_infer_by_sequence_name(self, pipeline, tmp_path):
        """Test --sequence resolves the event file through the manifest"""
        root, config = pipeline
        events = sorted((root / "dataset" / "events").glob("test_*.tofe"))[0]
        by_path, by_name = tmp_path / "path", tmp_path / "name"

        assert main(["infer", "--config", str(config), "--events", str(events), "--out", str(by_path)]) == EXIT_OK
        assert main(["infer", "--config", str(config), "--sequence", events.stem, "--out", str(by_name)]) == EXIT_OK
        assert read_rows(by_name / "flows.csv") == read_rows(by_path / "flows.csv")

    def test_infer_unknown_sequence(self, pipeline, tmp_path):
        """Test a name missing from the manifest is a project error"""
        _, config = pipeline

        code = main(["infer", "--config", str(config), "--sequence", "no_such_sequence", "--out", str(tmp_path)])

        assert code == EXIT_ERROR

    def test_infer_empty_stream(self, pipeline, tmp_path):
        """Test an empty event file gives a header-only CSV"""
        _, config = pipeline
        events = tmp_path / "empty.tofe"
        write_events(EventStream.empty(64, 64), events)

        assert main(["infer", "--config", str(config), "--events", str(events), "--out", str(tmp_path)]) == EXIT_OK
        assert len(read_rows(tmp_path / "flows.csv")) == 1

    def test_eval(self, pipeline):
        """Test evaluation writes per-window and summary files"""
        root, config = pipeline

        assert main(["eval", "--config", str(config)]) == EXIT_OK
        out = root / "output" / "eval" / "dt500"
        assert len(read_rows(out / "windows.csv")) == 1 + 4 * 6
        assert read_rows(out / "summary.csv")[0] == ["dt", "pixE", "dirE", "speedE"]

    def test_eval_threshold_violation(self, pipeline):
        """Test an unreachable threshold exits with the threshold code"""
        _, config = pipeline

        assert main(["eval", "--config", str(config), "--max-pixE", "-1"]) == EXIT_THRESHOLD

    def test_sweeps(self, pipeline):
        """Test the dt and noise sweeps write one row per setting"""
        root, config = pipeline

        assert main(["sweep", "--config", str(config)]) == EXIT_OK
        assert main(["noise-sweep", "--config", str(config)]) == EXIT_OK

        assert [r[0] for r in read_rows(root / "output" / "sweep" / "sweep.csv")] == ["dt", "500"]
        noise = read_rows(root / "output" / "noise" / "dt500" / "noise.csv")
        assert [r[0] for r in noise] == ["noise_rate", "0.0", "1000.0"]

    def test_untrained_dt(self, pipeline, tmp_path):
        """Test asking for a dt without checkpoints is a project error"""
        root, config = pipeline
        events = sorted((root / "dataset" / "events").glob("test_*.tofe"))[0]

        code = main(["infer", "--config", str(config), "--dt", "1000", "--events", str(events), "--out", str(tmp_path)])

        assert code == EXIT_ERROR


class TestErrors:
    """Test failures map to exit codes"""

    def test_missing_dataset(self, tmp_path):
        """Test commands on a missing dataset exit with the error code"""
        config = write_config(tmp_path)

        assert main(["train-ofs", "--config", str(config)]) == EXIT_ERROR
        assert main(["eval", "--config", str(config)]) == EXIT_ERROR

    def test_missing_config(self, tmp_path):
        """Test a missing config file is a project error"""
        assert main(["gen", "--config", str(tmp_path / "absent.yaml")]) == EXIT_ERROR

    def test_invalid_config(self, tmp_path):
        """Test an unknown key is a project error"""
        config = write_config(tmp_path, ofs={"epoch": 3})

        assert main(["gen", "--config", str(config)]) == EXIT_ERROR

    def test_infer_needs_one_source(self, tmp_path):
        """Test --events and --sequence are mutually exclusive and one is required"""
        with pytest.raises(SystemExit):
            main(["infer", "--events", str(tmp_path / "a.tofe"), "--sequence", "a"])
        with pytest.raises(SystemExit):
            main(["infer"])

    def test_unknown_command(self):
        """Test argparse rejects an unknown command"""
        with pytest.raises(SystemExit):
            main(["train"])


class TestReproducibility:
    """Test generation is seeded"""

    def test_regeneration_identical(self, tmp_path):
        """Test the same seed rebuilds every event file byte for byte"""
        first = write_config(tmp_path / "a")
        second = write_config(tmp_path / "b")

        assert main(["gen", "--config", str(first)]) == EXIT_OK
        assert main(["gen", "--config", str(second)]) == EXIT_OK

        for path in sorted((tmp_path / "a" / "dataset" / "events").glob("*.tofe")):
            twin = tmp_path / "b" / "dataset" / "events" / path.name
            assert path.read_bytes() == twin.read_bytes()
