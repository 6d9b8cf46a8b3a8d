"""
Acceptance tests against trained models

These reuse the dataset and checkpoints written by scripts/run_acceptance.sh
and skip when those are absent.
"""

import itertools
from pathlib import Path

import numpy as np
import pytest

from modules.cascade import run_cascade
from modules.config import ConfigManager
from modules.evaluation import evaluate, load_model_set, model_dir
from modules.models import load_examples, ofs_forward, ofs_target
from modules.simcam import SpeedBinTable, load_manifest

pytestmark = pytest.mark.acceptance

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIG = ConfigManager(REPO_ROOT / "config").load_config("acceptance")
DATASET = REPO_ROOT / CONFIG.paths.dataset_dir
CHECKPOINTS = REPO_ROOT / CONFIG.paths.checkpoint_dir
B = CONFIG.binning.B
TABLE = SpeedBinTable.from_ranges(CONFIG.bins.ranges, CONFIG.bins.programmed_max)


def eval_kwargs():
    return {
        "min_support": CONFIG.inference.min_support,
        "close_kernel": CONFIG.inference.close_kernel,
        "workers": 1,
        "seed": CONFIG.run.seed,
    }


@pytest.fixture(scope="module")
def manifest():
    if not (DATASET / "manifest.yaml").exists():
        pytest.skip("acceptance dataset not generated")
    return load_manifest(DATASET)


def models_for(dt):
    if not model_dir(CHECKPOINTS, dt).exists():
        pytest.skip(f"no acceptance checkpoints for dt={dt}")
    return load_model_set(CHECKPOINTS, dt, TABLE.n_bins)


@pytest.fixture(scope="module")
def models():
    return models_for(500)


@pytest.fixture(scope="module")
def report(manifest, models):
    return evaluate(manifest, manifest.split("test"), models, B, **eval_kwargs())


@pytest.fixture(scope="module")
def test_examples(manifest):
    return load_examples(manifest, manifest.split("test"), 500, B)


class TestDeskScale:
    """Test trained models on held-out trajectories"""

    def test_thresholds(self, report):
        """Test bin accuracy, pose, direction and speed errors at dt 500"""
        assert report.bin_accuracy >= 0.85
        assert report.pixE <= 6.0
        assert report.dirE <= 20.0
        assert report.speedE <= 20.0

    def test_longer_windows_jitter(self, manifest):
        """Test direction and speed errors grow from dt 1000 to dt 5000"""
        specs = manifest.split("test")
        mid = evaluate(manifest, specs, models_for(1000), B, **eval_kwargs())
        long = evaluate(manifest, specs, models_for(5000), B, **eval_kwargs())

        assert long.dirE > mid.dirE
        assert long.speedE > mid.speedE

    def test_noise_robustness(self, manifest, models, report):
        """Test 1000 ev/s of noise costs at most 10 points of bin accuracy"""
        noisy = evaluate(manifest, manifest.split("test"), models, B, noise_rate=1000.0, **eval_kwargs())

        assert report.bin_accuracy - noisy.bin_accuracy <= 0.10


class TestTrainedOfs:
    """Test trained OFS stages on held-out windows"""

    def test_slower_stage_passes_fast_objects(self, models, test_examples):
        """Test the bin-2 stage recalls at least 80% of bin-4 object pixels"""
        bin2 = next(m for m in models.ofs_models if m.speed_bin == 2)
        hits = total = 0
        for ex in test_examples:
            if ex.speed_bin != 4:
                continue
            target = ofs_target(ex, 2, TABLE).astype(bool)
            aggregate = ofs_forward(bin2, ex.volume).aggregate.astype(bool)
            hits += int((aggregate & target).sum())
            total += int(target.sum())

        assert total > 0
        assert hits / total >= 0.8

    def test_fast_stage_ignores_slow_objects(self, models, test_examples):
        """Test the bin-4 stage spikes on at most 5% of bin-1 event pixels"""
        bin4 = next(m for m in models.ofs_models if m.speed_bin == 4)
        spikes = inputs = 0
        for ex in test_examples:
            if ex.speed_bin != 1:
                continue
            spikes += ofs_forward(bin4, ex.volume).aggregate.sum()
            inputs += ex.volume.event_grid().sum()

        assert inputs > 0
        assert spikes <= 0.05 * inputs

    def test_cascade_invariants(self, models, test_examples):
        """Test 20 trained cascades consume monotonically and claim each event once"""
        rng = np.random.default_rng(0)
        picks = rng.choice(len(test_examples), size=min(20, len(test_examples)), replace=False)

        for i in picks:
            trace = run_cascade(test_examples[i].volume, models.ofs_models, models.ofpd_model, TABLE)

            totals = [s.input.total() for s in trace.stages]
            assert all(a >= b for a, b in zip(totals, totals[1:]))
            claimed = [s.input.event_grid().astype(bool) & (s.mask == 0) for s in trace.stages]
            for a, b in itertools.combinations(claimed, 2):
                assert not np.any(a & b)
