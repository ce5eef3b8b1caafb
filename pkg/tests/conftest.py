import numpy as np
import pytest

from hoacodec import scenes, sideinfo


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def small_scene():
    """0.4 s third-order scene used by fast integration tests (L=256)."""
    return scenes.render_scene(scenes.corpus_specs(duration=0.4)[0])


@pytest.fixture(scope="session")
def small_quantizers():
    """Tiny codebooks for M=16 streams at L=256; fast to train."""
    sigs = [scenes.render_scene(s) for s in scenes.corpus_specs(duration=0.4)[:2]]
    config = sideinfo.TrainingConfig(
        half_length=256, rank=4,
        coeff_size=16, residual_size=64, intra_size=64,
        max_iter=20, seed=7,
    )
    return sideinfo.train_quantizers(sigs, config)


@pytest.fixture(scope="session")
def full_quantizers():
    """Default-geometry codebooks (L=1024, 16/256/256) for acceptance runs."""
    sigs = [scenes.render_scene(s) for s in scenes.corpus_specs(duration=1.0)[:3]]
    config = sideinfo.TrainingConfig(
        half_length=1024, rank=4,
        coeff_size=16, residual_size=256, intra_size=256,
        max_iter=30, seed=7,
    )
    return sideinfo.train_quantizers(sigs, config)
