from types import SimpleNamespace

import numpy as np
import pytest

from framebow.pipeline import ArtifactBundle
from framebow.train import TrainConfig, synth_dataset, train_from_directory
from framebow.vocab import VocabTrainConfig


@pytest.fixture(scope="session")
def small_artifacts(tmp_path_factory):
    """Quickly trained two- and three-category artifact sets on small patches.

    Patches are 96x96 so descriptor extraction stays cheap; accuracy-grade
    runs live in the acceptance suite instead.
    """
    root = tmp_path_factory.mktemp("artifacts")
    dataset = root / "dataset"
    synth_dataset(dataset, per_class=8, seed=5, size=(96, 96))
    by_mode = {}
    for mode in ("three", "two"):
        by_mode[mode] = train_from_directory(
            dataset, root / mode,
            TrainConfig(mode=mode, seed=5, vocab=VocabTrainConfig(branching=6, depth=2, seed=5)),
        )
    return SimpleNamespace(dataset=dataset, by_mode=by_mode)


@pytest.fixture(scope="session")
def bundles(small_artifacts):
    loaded = {}
    for mode, art in small_artifacts.by_mode.items():
        loaded[mode] = ArtifactBundle.load(art.vocab_path, art.scaler_path, art.model_path)
    return loaded
