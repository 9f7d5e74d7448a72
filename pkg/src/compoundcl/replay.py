"""Representative memory: predictive-sorting selection and baselines.

The selection policy keeps, per class, the samples to which the current
model assigns the highest probability for their own class -- the ones the
model finds most representative. Capacity K is fixed by default, so the
per-class quota m = K // k shrinks as classes accumulate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data.dataset import Sample
from .model import ModelState
from .rng import as_generator


@dataclass
class ReplayMemory:
    capacity: int
    samples: list
    per_class_quota: int | None = None
    warnings: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


def init_memory(basic_samples, capacity: int, seed_or_rng) -> ReplayMemory:
    """Uniform random selection of ``capacity`` samples without replacement.

    If the pool is smaller than the capacity, everything is retained and a
    warning is recorded instead of raising.
    """
    rng = as_generator(seed_or_rng)
    pool = list(basic_samples)
    if capacity >= len(pool):
        mem = ReplayMemory(capacity, pool)
        if capacity > len(pool):
            mem.warnings.append(
                f"capacity {capacity} exceeds pool size {len(pool)}; retained all samples"
            )
        return mem
    idx = rng.choice(len(pool), size=capacity, replace=False)
    return ReplayMemory(capacity, [pool[i] for i in sorted(idx)])


def psmr_select(
    pool,
    model: ModelState,
    capacity: int,
    known_class_count: int,
    per_class_quota: int | None = None,
) -> list:
    """Predictive sorting selection over a labelled candidate pool.

    For each class present in the pool (in registry index order), samples
    are scored by the model's softmax probability for their own class and
    the top ``m = capacity // known_class_count`` are kept; ties keep the
    earlier pool entry. ``per_class_quota`` overrides m for the growing-
    capacity variant.
    """
    if known_class_count <= 0:
        raise ValueError(f"known class count must be positive, got {known_class_count}")
    pool = list(pool)
    if not pool:
        raise ValueError("candidate pool is empty")
    m = per_class_quota if per_class_quota is not None else capacity // known_class_count
    labels = np.array([s.label for s in pool], dtype=np.int64)
    if labels.max() >= model.n_classes:
        raise ValueError("pool contains labels the model head does not cover")
    probs = model.predict_proba(np.stack([s.image for s in pool]))
    own = probs[np.arange(len(pool)), labels]
    selected = []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        order = idx[np.argsort(-own[idx], kind="stable")]
        selected.extend(pool[i] for i in order[:m])
    return selected


def random_select_baseline(pool, capacity: int, seed_or_rng) -> list:
    """Uniform random selection over the full mixed-class pool."""
    return init_memory(pool, capacity, seed_or_rng).samples


def merge_new_class(memory_samples, new_samples) -> list:
    """Concatenate memory and new-class samples (memory first).

    The result is both this iteration's training pool and the next
    iteration's selection candidates.
    """
    return list(memory_samples) + list(new_samples)


def dump_memory_csv(samples, registry, path):
    """Audit record of memory contents: one label,subject row per sample."""
    import csv
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label", "subject"])
        for s in samples:
            writer.writerow([registry.label_of(s.label), s.subject])
