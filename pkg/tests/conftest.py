import numpy as np
import pytest
import torch

from kimoi.model import LpnConfig, LpnModel
from kimoi.synth import SyntheticFaceCorpus, synth_sequence
from kimoi.template import mean_face_template

torch.set_num_threads(1)


TINY_CONFIG = LpnConfig(k=8, d=32, clip_length=16, encoder_layers=2, decoder_layers=2, heads=2)

# Filled by the acceptance tests; echoed after the normal pytest summary
# so the per-criterion verdicts stay visible under output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_config() -> LpnConfig:
    return TINY_CONFIG


@pytest.fixture(scope="session")
def tiny_model(tiny_config) -> LpnModel:
    return LpnModel(tiny_config, seed=0).eval()


@pytest.fixture(scope="session")
def trained_tiny_model(tiny_config) -> LpnModel:
    """Tiny model fitted to a small wobble corpus; shared, never mutated."""
    from kimoi.geometry import LandmarkSequence
    from kimoi.model import SequenceCorpus, TrainingOptions, train
    from kimoi.perturb import ClipSampler

    rng = np.random.default_rng(123)
    seqs = [LandmarkSequence(random_sequence(rng, n_frames=40)) for _ in range(8)]
    corpus = SequenceCorpus(seqs, ClipSampler(clip_length=tiny_config.clip_length, mode="uniform"))
    model = LpnModel(tiny_config, seed=0)
    train(model, corpus, TrainingOptions(steps=400, batch_size=4, learning_rate=3e-3, seed=0, log_every=0))
    return model


@pytest.fixture(scope="session")
def template():
    return mean_face_template()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def random_sequence(rng, n_frames=16, scale=0.02):
    """Template plus smooth random wobble; valid normalized landmarks."""
    base = mean_face_template()
    t = np.linspace(0.0, 2.0 * np.pi, n_frames)[:, None, None]
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(1, base.shape[0], 2))
    amp = rng.uniform(0.0, scale, size=(1, base.shape[0], 2))
    return base[None] + amp * np.sin(t + phase)


def blink_sequence(blink_at=50, length=100, **kwargs):
    """Synthetic sequence with a single blink at a known transition."""
    params = SyntheticFaceCorpus(
        n_sequences=1,
        min_length=length,
        max_length=length,
        blink_times=(blink_at,),
        mouth_times=(),
        seed=0,
        **kwargs,
    )
    return synth_sequence(params, np.random.default_rng(0), length=length)
