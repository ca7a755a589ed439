"""Shared fixtures for all test modules."""

import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

# Make src/ importable without installing
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from config import ModelConfig, TrainConfig  # noqa: E402
from model.variants import EncoderVariant  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ModelConfig:
    """V=5, T=4, K=3, channels 3->8->3, two decoder stages, double precision."""
    return ModelConfig(
        variant=EncoderVariant.SEPARABLE,
        joints=5,
        input_frames=4,
        output_frames=3,
        channels=(3, 8, 3),
        decoder_layers=2,
        dtype="float64",
        seed=0,
    )


@pytest.fixture
def paper_config() -> ModelConfig:
    """V=22, T=10, K=25, widths 3-64-32-64-3, four decoder stages."""
    return ModelConfig()


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(epochs=3, batch_size=4, lr=0.01, loss="mpjpe", seed=0)


@pytest.fixture
def tiny_run_dict(tmp_path) -> Dict[str, Any]:
    """A complete run config small enough for end-to-end CLI tests."""
    return {
        "model": {
            "variant": "separable",
            "joints": 4,
            "input_frames": 4,
            "output_frames": 3,
            "channels": [3, 8, 3],
            "decoder_layers": 2,
            "seed": 0,
        },
        "train": {"epochs": 2, "batch_size": 16, "lr": 0.01, "loss": "mpjpe", "seed": 0},
        "data": {"representation": "coords3d", "fps": 25},
        "synth": {
            "frames": 40,
            "period": 10.0,
            "train_sequences": 2,
            "val_sequences": 1,
            "test_sequences": 1,
            "seed": 0,
        },
        "output": {"dir": str(tmp_path / "run")},
        "eval": {"horizons": [1, 2, 3]},
    }


@pytest.fixture
def write_config(tmp_path) -> Callable[[Dict[str, Any]], Path]:
    def _write(raw: Dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(raw), encoding="utf-8")
        return path

    return _write
