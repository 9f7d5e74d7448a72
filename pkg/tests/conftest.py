"""Shared fixtures: desk-scale configs and a small trained model cache."""

from __future__ import annotations

import numpy as np
import pytest

from compoundcl.data.dataset import subject_kfold
from compoundcl.data.synth import SynthSpec, generate
from compoundcl.harness import PhaseConfig, split_for_fold, train_basic_phase
from compoundcl.model import Architecture
from compoundcl.rng import substream


def desk_arch() -> Architecture:
    return Architecture(input_size=32, channels=(8, 16, 32), hidden_units=48)


def desk_phase() -> PhaseConfig:
    """Desk-scale hyperparameters used by the acceptance experiments."""
    return PhaseConfig(
        epochs_cap=150,
        patience=12,
        batch_size=32,
        lr_initial=3e-3,
        lr_finetune=2e-3,
        lr_continual=2e-3,
        temperature=3.0,
        gamma0=0.1,
        memory_capacity=90,
        replay_mode="psmr",
    )


def desk_synth() -> SynthSpec:
    return SynthSpec(per_class=40)


def tiny_arch() -> Architecture:
    return Architecture(input_size=16, channels=(4, 8), hidden_units=16)


def tiny_phase() -> PhaseConfig:
    return PhaseConfig(
        epochs_cap=25,
        patience=4,
        batch_size=16,
        lr_initial=3e-3,
        lr_finetune=2e-3,
        lr_continual=2e-3,
        temperature=3.0,
        gamma0=0.1,
        memory_capacity=24,
    )


def tiny_synth() -> SynthSpec:
    return SynthSpec(per_class=10, image_size=16, noise=0.03)


_BASIC_CACHE: dict = {}


def trained_basic(seed: int, spec=None, arch=None, phase=None, folds=2):
    """Cached (dataset, folds, BasicPhaseResult, train_ds, test_ds) per seed."""
    spec = spec or desk_synth()
    arch = arch or desk_arch()
    phase = phase or desk_phase()
    key = (seed, repr(spec), repr(arch), repr(phase), folds)
    if key not in _BASIC_CACHE:
        ds = generate(spec, seed)
        basic = ds.filter_labels(spec.basic)
        split = subject_kfold(basic, folds, substream(seed, "folds"))
        result = train_basic_phase(basic, split, arch, phase, seed)
        train_ds, test_ds = split_for_fold(ds, split, result.best_fold)
        _BASIC_CACHE[key] = (ds, split, result, train_ds, test_ds)
    return _BASIC_CACHE[key]


@pytest.fixture(scope="session")
def tiny_trained():
    """A quickly trained model on the 16x16 synthetic set (seed 7)."""
    return trained_basic(7, spec=tiny_synth(), arch=tiny_arch(), phase=tiny_phase())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
