"""
Unit tests for src/config.py
"""

import json
from pathlib import Path

import pytest

from config import RunConfig
from errors import ConfigError
from model.variants import EncoderVariant
from posedata.sequence import Representation

CONFIGS = Path(__file__).parent.parent / "configs"


class TestLoading:
    @pytest.mark.parametrize("name", ["synthetic.json", "paper.json"])
    def test_shipped_configs_validate(self, name):
        config = RunConfig.from_file(str(CONFIGS / name))
        config.validate()

    def test_synthetic_benchmark_shape(self):
        config = RunConfig.from_file(str(CONFIGS / "synthetic.json"))
        spec, m, d = config.synth.spec, config.model, config.data
        span = m.input_frames + m.output_frames
        assert config.synth.train_sequences * ((spec.frames - span) // d.stride + 1) == 2000
        assert config.synth.test_sequences * ((spec.frames - span) // d.test_stride + 1) == 200
        # a period dividing the horizon would make zero-velocity exact there
        assert m.output_frames % spec.period != 0

    def test_defaults(self):
        config = RunConfig.from_dict({})
        assert config.model.variant is EncoderVariant.SEPARABLE
        assert config.model.channels == (3, 64, 32, 64, 3)
        assert config.train.lr == 0.01
        assert config.data.representation is Representation.COORDS3D

    def test_synth_follows_model_shape(self):
        config = RunConfig.from_dict({"model": {"joints": 7, "input_frames": 5, "output_frames": 4}})
        spec = config.synth.spec
        assert (spec.joints, spec.input_frames, spec.output_frames) == (7, 5, 4)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="modle"):
            RunConfig.from_dict({"modle": {}})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError, match="layers"):
            RunConfig.from_dict({"model": {"layers": 3}})

    def test_bad_enum_value(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"model": {"variant": "dense"}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(str(tmp_path / "none.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            RunConfig.from_file(str(path))

    def test_json_snapshot_round_trip(self):
        config = RunConfig.from_file(str(CONFIGS / "paper.json"))
        assert RunConfig.from_dict(json.loads(config.to_json())) == config


class TestOverrides:
    def test_seed_reaches_every_section(self, tiny_run_dict):
        config = RunConfig.from_dict(tiny_run_dict).with_overrides(seed=9)
        assert (config.model.seed, config.train.seed, config.synth.seed) == (9, 9, 9)

    def test_variant_epochs_and_out(self, tiny_run_dict, tmp_path):
        config = RunConfig.from_dict(tiny_run_dict).with_overrides(variant="full", epochs=7, out=str(tmp_path / "x"))
        assert config.model.variant is EncoderVariant.FULL
        assert config.train.epochs == 7
        assert config.run_dir == tmp_path / "x"

    def test_no_overrides_is_identity(self, tiny_run_dict):
        config = RunConfig.from_dict(tiny_run_dict)
        assert config.with_overrides() == config


class TestValidation:
    def test_tiny_run_is_consistent(self, tiny_run_dict):
        RunConfig.from_dict(tiny_run_dict).validate()

    def test_synth_joint_mismatch(self, tiny_run_dict):
        tiny_run_dict["synth"]["joints"] = 6
        with pytest.raises(ConfigError, match="synth.joints"):
            RunConfig.from_dict(tiny_run_dict).validate()

    def test_loss_must_fit_representation(self, tiny_run_dict):
        tiny_run_dict["data"]["representation"] = "expmap"
        with pytest.raises(ConfigError, match="train.loss"):
            RunConfig.from_dict(tiny_run_dict).validate()

    def test_horizon_beyond_forecast(self, tiny_run_dict):
        tiny_run_dict["eval"]["horizons"] = [1, 4]
        with pytest.raises(ConfigError, match="eval.horizons"):
            RunConfig.from_dict(tiny_run_dict).validate()

    def test_channels_must_start_and_end_at_three(self, tiny_run_dict):
        tiny_run_dict["model"]["channels"] = [3, 8, 4]
        with pytest.raises(ConfigError):
            RunConfig.from_dict(tiny_run_dict).validate()

    def test_source_fps_must_divide(self, tiny_run_dict):
        tiny_run_dict["data"]["source_fps"] = 40
        with pytest.raises(ConfigError, match="source_fps"):
            RunConfig.from_dict(tiny_run_dict).validate()

    def test_train_data_must_exist(self, tiny_run_dict, tmp_path):
        tiny_run_dict["data"]["train"] = [str(tmp_path / "missing" / "*.txt")]
        config = RunConfig.from_dict(tiny_run_dict)
        config.validate()
        config.validate("count-params")
        with pytest.raises(ConfigError, match="data.train"):
            config.validate("train")

    def test_eval_checks_only_the_test_split(self, tiny_run_dict, tmp_path):
        (tmp_path / "walking.txt").write_text("0\n", encoding="utf-8")
        tiny_run_dict["data"]["train"] = [str(tmp_path / "missing" / "*.txt")]
        tiny_run_dict["data"]["test"] = [str(tmp_path / "*.txt")]
        config = RunConfig.from_dict(tiny_run_dict)
        config.validate("eval")
        tiny_run_dict["data"]["test"] = [str(tmp_path / "*.txt"), str(tmp_path / "nope.txt")]
        with pytest.raises(ConfigError, match="nope.txt"):
            RunConfig.from_dict(tiny_run_dict).validate("eval")

    def test_data_globs_default_to_synth_dir(self, tiny_run_dict):
        config = RunConfig.from_dict(tiny_run_dict)
        assert config.data_files("train") == []
        assert config.synth_dir("train") == config.run_dir / "synth" / "train"
