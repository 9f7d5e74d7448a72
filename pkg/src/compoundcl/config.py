"""Declarative run configuration with strict schema validation.

Configs are YAML (JSON also parses). Unknown keys are rejected with their
dotted path; every default below is part of the documented contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data.synth import PRIMITIVES, SynthSpec, all_pair_compounds, default_compounds
from .errors import ConfigError
from .harness import PhaseConfig
from .model import Architecture

SCHEMA_VERSION = 1


@dataclass
class DataConfig:
    source: str = "synthetic"  # synthetic | manifest
    image_size: int = 32
    folds: int = 10
    manifest: str | None = None
    root: str | None = None
    basic_labels: list | None = None
    synthetic_basic: list = field(default_factory=lambda: list(PRIMITIVES))
    synthetic_compounds: dict | None = None  # None -> default table
    synthetic_all_pairs: bool = False
    per_class: int = 40
    noise: float = 0.04


@dataclass
class ContinualConfig:
    orderings: int = 10
    distill: bool = True
    exclude_singular: bool = False
    singular_labels: list = field(default_factory=list)
    include_step0: bool = True


@dataclass
class FewshotConfig:
    shots: list = field(default_factory=lambda: [5, 3, 1])
    gamma: float | None = None  # None -> loss.gamma0
    monitor: str = "new"  # new | all
    patience: int | None = None  # None -> train.patience
    epochs_cap: int | None = None  # None -> train.epochs_cap
    lr: float | None = None  # None -> train.lr_continual


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "runs/out"
    data: DataConfig = field(default_factory=DataConfig)
    arch: Architecture = field(default_factory=Architecture)
    phase: PhaseConfig = field(default_factory=PhaseConfig)
    continual: ContinualConfig = field(default_factory=ContinualConfig)
    fewshot: FewshotConfig = field(default_factory=FewshotConfig)

    def fewshot_phase(self) -> PhaseConfig:
        """PhaseConfig for few-shot runs, with the few-shot overrides applied."""
        from dataclasses import replace

        return replace(
            self.phase,
            gamma0=self.phase.gamma0 if self.fewshot.gamma is None else self.fewshot.gamma,
            patience=self.fewshot.patience or self.phase.patience,
            epochs_cap=self.fewshot.epochs_cap or self.phase.epochs_cap,
            lr_continual=self.fewshot.lr or self.phase.lr_continual,
            replay_mode="none",
            memory_capacity=0,
        )

    def synth_spec(self) -> SynthSpec:
        basic = tuple(self.data.synthetic_basic)
        if self.data.synthetic_compounds is not None:
            compounds = {k: tuple(v) for k, v in self.data.synthetic_compounds.items()}
        elif self.data.synthetic_all_pairs:
            compounds = all_pair_compounds(basic)
        else:
            compounds = default_compounds(basic)
        return SynthSpec(
            basic=basic,
            compounds=compounds,
            per_class=self.data.per_class,
            image_size=self.data.image_size,
            noise=self.data.noise,
        )


_SCHEMA = {
    "schema_version": int,
    "seed": int,
    "output_dir": str,
    "data": {
        "source": str,
        "image_size": int,
        "folds": int,
        "manifest": (str, type(None)),
        "root": (str, type(None)),
        "basic_labels": (list, type(None)),
        "synthetic": {
            "basic": list,
            "compounds": (dict, type(None)),
            "all_pairs": bool,
            "per_class": int,
            "noise": (int, float),
        },
    },
    "model": {
        "channels": list,
        "hidden_units": int,
        "kernel": int,
    },
    "train": {
        "epochs_cap": int,
        "patience": int,
        "batch_size": int,
        "lr_initial": (int, float),
        "lr_finetune": (int, float),
        "lr_continual": (int, float),
        "augment": bool,
    },
    "loss": {
        "temperature": (int, float),
        "gamma0": (int, float),
        "gamma_decay": bool,
    },
    "replay": {
        "capacity": int,
        "mode": str,
        "growing_capacity": bool,
    },
    "continual": {
        "orderings": int,
        "distill": bool,
        "exclude_singular": bool,
        "singular_labels": list,
        "include_step0": bool,
    },
    "fewshot": {
        "shots": list,
        "gamma": (int, float, type(None)),
        "monitor": str,
        "patience": (int, type(None)),
        "epochs_cap": (int, type(None)),
        "lr": (int, float, type(None)),
    },
}


def _check_keys(doc, schema, path=""):
    for key, value in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {here!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a mapping")
            _check_keys(value, expected, here)
        else:
            types = expected if isinstance(expected, tuple) else (expected,)
            if isinstance(value, bool) and bool not in types:
                raise ConfigError(f"{here}: expected {expected}, got bool")
            if not isinstance(value, types):
                names = "/".join(t.__name__ for t in types)
                raise ConfigError(f"{here}: expected {names}, got {type(value).__name__}")


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    _check_keys(doc, _SCHEMA)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version} unsupported (expected {SCHEMA_VERSION})")

    d = doc.get("data", {})
    synth = d.get("synthetic", {})
    data = DataConfig(
        source=d.get("source", "synthetic"),
        image_size=d.get("image_size", 32),
        folds=d.get("folds", 10),
        manifest=d.get("manifest"),
        root=d.get("root"),
        basic_labels=d.get("basic_labels"),
        synthetic_basic=synth.get("basic", list(PRIMITIVES)),
        synthetic_compounds=synth.get("compounds"),
        synthetic_all_pairs=synth.get("all_pairs", False),
        per_class=synth.get("per_class", 40),
        noise=float(synth.get("noise", 0.04)),
    )
    if data.source not in ("synthetic", "manifest"):
        raise ConfigError(f"data.source must be synthetic or manifest, got {data.source!r}")
    if data.source == "manifest":
        if not data.manifest:
            raise ConfigError("data.manifest is required when data.source is manifest")
        if not data.basic_labels:
            raise ConfigError("data.basic_labels is required when data.source is manifest")
    if data.folds < 1:
        raise ConfigError("data.folds must be >= 1")

    m = doc.get("model", {})
    arch = Architecture(
        input_size=data.image_size,
        channels=tuple(m.get("channels", [16, 32, 64])),
        hidden_units=m.get("hidden_units", 64),
        kernel=m.get("kernel", 3),
    )

    t = doc.get("train", {})
    l = doc.get("loss", {})
    r = doc.get("replay", {})
    phase = PhaseConfig(
        epochs_cap=t.get("epochs_cap", 1000),
        patience=t.get("patience", 10),
        batch_size=t.get("batch_size", 32),
        lr_initial=float(t.get("lr_initial", 1e-4)),
        lr_finetune=float(t.get("lr_finetune", 1e-6)),
        lr_continual=float(t.get("lr_continual", 1e-5)),
        augment=t.get("augment", True),
        temperature=float(l.get("temperature", 3.0)),
        gamma0=float(l.get("gamma0", 0.1)),
        gamma_decay_enabled=l.get("gamma_decay", True),
        memory_capacity=r.get("capacity", 60),
        replay_mode=r.get("mode", "psmr"),
        growing_capacity=r.get("growing_capacity", False),
    )

    c = doc.get("continual", {})
    continual = ContinualConfig(
        orderings=c.get("orderings", 10),
        distill=c.get("distill", True),
        exclude_singular=c.get("exclude_singular", False),
        singular_labels=list(c.get("singular_labels", [])),
        include_step0=c.get("include_step0", True),
    )
    if continual.orderings < 1:
        raise ConfigError("continual.orderings must be >= 1")

    fs = doc.get("fewshot", {})
    shots = fs.get("shots", [5, 3, 1])
    for s in shots:
        if not isinstance(s, int) or s < 1:
            raise ConfigError(f"fewshot.shots entries must be positive ints, got {s!r}")
    fewshot = FewshotConfig(
        shots=list(shots),
        gamma=None if fs.get("gamma") is None else float(fs["gamma"]),
        monitor=fs.get("monitor", "new"),
        patience=fs.get("patience"),
        epochs_cap=fs.get("epochs_cap"),
        lr=None if fs.get("lr") is None else float(fs["lr"]),
    )
    if fewshot.monitor not in ("new", "all"):
        raise ConfigError("fewshot.monitor must be 'new' or 'all'")
    if fewshot.gamma is not None and not 0.0 <= fewshot.gamma <= 1.0:
        raise ConfigError("fewshot.gamma must lie in [0, 1]")

    return RunConfig(
        schema_version=version,
        seed=doc.get("seed", 0),
        output_dir=doc.get("output_dir", "runs/out"),
        data=data,
        arch=arch,
        phase=phase,
        continual=continual,
        fewshot=fewshot,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            doc = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: {e}") from None
    return config_from_dict(doc or {})
