"""Config layering, value parsing, and manifest serialization."""

import json

import pytest

from csma.config import (
    ExperimentConfig,
    build_manifest,
    config_from_sources,
    manifest_config_dict,
    read_config_file,
    resolved_classifier_dims,
    resolved_lams,
    resolved_layer_dims,
    write_manifest,
)
from csma.errors import ConsistencyError, FormatError, ParameterError


class TestReadConfigFile:
    def test_parses_flat_pairs(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# an experiment\n"
            "\n"
            "epochs = 25\n"
            "lam=0.5,0.1\n"
            "out_dir = results/run1\n"
        )
        assert read_config_file(path) == {
            "epochs": "25", "lam": "0.5,0.1", "out_dir": "results/run1",
        }

    def test_missing_equals_reports_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs = 5\nnonsense\n")
        with pytest.raises(FormatError, match=":2:"):
            read_config_file(path)

    def test_last_duplicate_wins(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("seed=1\nseed=2\n")
        assert read_config_file(path)["seed"] == "2"


class TestConfigFromSources:
    def test_defaults(self):
        cfg = config_from_sources()
        assert cfg.format == "synth"
        assert cfg.epochs == 100
        assert cfg.learning_rate == 0.01
        assert cfg.train_fraction == 0.70
        assert cfg.lam == [0.1]
        assert cfg.layer_dims is None
        assert cfg.positive_digits == [5, 6, 7, 8, 9]

    def test_flags_override_file(self):
        cfg = config_from_sources({"epochs": "10", "seed": "3"}, {"epochs": "20"})
        assert cfg.epochs == 20
        assert cfg.seed == 3

    def test_none_flags_do_not_override(self):
        cfg = config_from_sources({"epochs": "10"}, {"epochs": None})
        assert cfg.epochs == 10

    def test_unknown_key_rejected(self):
        with pytest.raises(ParameterError, match="unknown config key"):
            config_from_sources({"epoks": "10"})

    def test_typed_parsing(self):
        cfg = config_from_sources({
            "layer_dims": "64, 32",
            "lam": "0.1,0.5",
            "image_shape": "28x28",
            "positive_digits": "5,6,7,8,9",
            "learning_rate": "0.05",
            "format": "csv",
            "data": "file.csv",
        })
        assert cfg.layer_dims == [64, 32]
        assert cfg.lam == [0.1, 0.5]
        assert cfg.image_shape == (28, 28)
        assert cfg.learning_rate == 0.05
        assert cfg.format == "csv"

    @pytest.mark.parametrize("key,value", [
        ("epochs", "ten"), ("learning_rate", "fast"), ("layer_dims", "64,x"),
        ("image_shape", "28"), ("image_shape", "2x3x4"), ("format", "hdf5"),
    ])
    def test_bad_values_rejected(self, key, value):
        with pytest.raises(ParameterError):
            config_from_sources({key: value})


class TestResolution:
    def test_layer_dims_default_two_passes_of_input_width(self):
        assert resolved_layer_dims(ExperimentConfig(), 64) == [64, 64]
        cfg = config_from_sources({"layer_dims": "64,32,16"})
        assert resolved_layer_dims(cfg, 64) == [64, 32, 16]

    def test_classifier_dims_default_quarters(self):
        assert resolved_classifier_dims(ExperimentConfig(), 64) == (16, 8)
        assert resolved_classifier_dims(ExperimentConfig(), 5) == (1, 1)
        cfg = config_from_sources({"classifier_dims": "12,6"})
        assert resolved_classifier_dims(cfg, 64) == (12, 6)

    def test_classifier_dims_must_be_pair(self):
        cfg = config_from_sources({"classifier_dims": "12,6,3"})
        with pytest.raises(ParameterError):
            resolved_classifier_dims(cfg, 64)

    def test_lambda_broadcast(self):
        assert resolved_lams(ExperimentConfig(), 3) == [0.1, 0.1, 0.1]
        cfg = config_from_sources({"lam": "0.5,0.2"})
        assert resolved_lams(cfg, 2) == [0.5, 0.2]

    def test_lambda_count_mismatch(self):
        cfg = config_from_sources({"lam": "0.5,0.2"})
        with pytest.raises(ConsistencyError):
            resolved_lams(cfg, 3)


class TestManifest:
    def test_out_dir_excluded(self):
        a = manifest_config_dict(config_from_sources({"out_dir": "here"}))
        b = manifest_config_dict(config_from_sources({"out_dir": "there"}))
        assert a == b
        assert "out_dir" not in a
        assert a["epochs"] == 100

    def test_image_shape_serializable(self):
        d = manifest_config_dict(config_from_sources({"image_shape": "3x5"}))
        assert d["image_shape"] == [3, 5]
        json.dumps(d)

    def test_build_and_write_round_trip(self, tmp_path):
        manifest = build_manifest(
            ExperimentConfig(), "sha256-64:0011223344556677",
            losses={"autoencoder_layers": [[2.0, 1.0]], "classifier": [0.7]},
            metrics={"mean_accuracy": 92.085, "roc_auc": 0.92085},
            wall_clock_seconds=1.25,
            split={"train": 4662, "test": 50470},
        )
        path = tmp_path / "manifest.json"
        write_manifest(manifest, path)
        back = json.loads(path.read_text())
        assert back == manifest
        assert back["metrics"]["mean_accuracy"] == 92.085
        assert back["split"] == {"train": 4662, "test": 50470}

    def test_written_form_is_sorted_and_indented(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest({"b": 1, "a": 2}, path)
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.startswith("{\n  ")
        assert text.endswith("}\n")
