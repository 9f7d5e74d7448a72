"""Strict config schema validation."""

import pytest
import yaml

from compoundcl.config import config_from_dict, load_config
from compoundcl.errors import ConfigError


def test_empty_document_gives_documented_defaults():
    cfg = config_from_dict({})
    assert cfg.schema_version == 1
    assert cfg.seed == 0
    assert cfg.phase.batch_size == 32
    assert cfg.phase.epochs_cap == 1000
    assert cfg.phase.lr_initial == 1e-4
    assert cfg.phase.lr_finetune == 1e-6
    assert cfg.phase.lr_continual == 1e-5
    assert cfg.phase.temperature == 3.0
    assert cfg.phase.gamma0 == 0.1
    assert cfg.phase.memory_capacity == 60
    assert cfg.continual.orderings == 10
    assert cfg.data.folds == 10
    assert cfg.fewshot.shots == [5, 3, 1]


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError, match="train.learning_rate"):
        config_from_dict({"train": {"learning_rate": 0.1}})
    with pytest.raises(ConfigError, match="replai"):
        config_from_dict({"replai": {}})


def test_wrong_type_rejected():
    with pytest.raises(ConfigError, match="train.patience"):
        config_from_dict({"train": {"patience": "ten"}})
    with pytest.raises(ConfigError, match="seed"):
        config_from_dict({"seed": "abc"})


def test_schema_version_pinned():
    with pytest.raises(ConfigError, match="schema_version"):
        config_from_dict({"schema_version": 99})


def test_manifest_source_requires_fields():
    with pytest.raises(ConfigError, match="data.manifest"):
        config_from_dict({"data": {"source": "manifest"}})
    with pytest.raises(ConfigError, match="basic_labels"):
        config_from_dict({"data": {"source": "manifest", "manifest": "m.csv"}})


def test_bad_replay_mode_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"replay": {"mode": "herding"}})


def test_bad_shots_rejected():
    with pytest.raises(ConfigError, match="shots"):
        config_from_dict({"fewshot": {"shots": [0]}})


def test_fewshot_overrides_flow_into_phase():
    cfg = config_from_dict(
        {
            "train": {"lr_continual": 0.002, "patience": 12, "epochs_cap": 150},
            "loss": {"gamma0": 0.1},
            "fewshot": {"gamma": 0.5, "lr": 0.0005, "patience": 50, "epochs_cap": 800},
        }
    )
    fs = cfg.fewshot_phase()
    assert fs.gamma0 == 0.5
    assert fs.lr_continual == 0.0005
    assert fs.patience == 50
    assert fs.epochs_cap == 800
    assert fs.replay_mode == "none"
    # the continual phase keeps its own values
    assert cfg.phase.gamma0 == 0.1
    assert cfg.phase.lr_continual == 0.002


def test_synth_spec_all_pairs():
    cfg = config_from_dict({"data": {"synthetic": {"all_pairs": True}}})
    assert len(cfg.synth_spec().compounds) == 15


def test_synth_spec_explicit_compounds():
    doc = {"data": {"synthetic": {"compounds": {"duo": ["disc", "ring"]}}}}
    spec = config_from_dict(doc).synth_spec()
    assert spec.compounds == {"duo": ("disc", "ring")}


def test_load_config_yaml_file(tmp_path):
    doc = {"seed": 5, "train": {"batch_size": 8}}
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(doc))
    cfg = load_config(path)
    assert cfg.seed == 5
    assert cfg.phase.batch_size == 8


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.yaml")


def test_invalid_yaml_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(path)
