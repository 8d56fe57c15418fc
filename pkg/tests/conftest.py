import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from animforge.pipeline import PoolSizes, RunConfig, run
from animforge.providers import ProviderSet, mock_provider_set
from animforge.providers.base import Image
from animforge.script import Narrative

CANONICAL_NARRATIVE = "A cat and a dog are playing in the garden."


@pytest.fixture
def providers() -> ProviderSet:
    return mock_provider_set(seed=0, image_resolution=64)


def tiny_config(workspace, seed=7, narrative=CANONICAL_NARRATIVE, **overrides) -> RunConfig:
    """Small, fast config for the many pipeline tests that do not pin the
    default pool sizes."""
    kwargs = dict(
        narrative=Narrative(text=narrative),
        workspace=str(workspace),
        seed=seed,
        pools=PoolSizes(images=2, videos=3, judge_top_k=2),
        frame_count=6,
        image_resolution=64,
        frame_resolution=48,
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


def flat_image(height=32, width=32, rgb=(128, 128, 128)) -> Image:
    arr = np.empty((height, width, 3), dtype=np.uint8)
    arr[:] = rgb
    return Image.from_array(arr)


class DefaultRuns:
    """Two fresh default-config runs with identical (config, seed)."""

    def __init__(self, tmp_root: Path):
        self.elapsed = []
        self.workspaces = []
        self.summaries = []
        for label in ("one", "two"):
            ws = tmp_root / label
            config = RunConfig(
                narrative=Narrative(text=CANONICAL_NARRATIVE),
                workspace=str(ws),
                seed=11,
            )
            started = time.perf_counter()
            summary = run(config)
            self.elapsed.append(time.perf_counter() - started)
            self.workspaces.append(ws)
            self.summaries.append(summary)
        self.config_template = config


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory) -> DefaultRuns:
    return DefaultRuns(tmp_path_factory.mktemp("default-runs"))
