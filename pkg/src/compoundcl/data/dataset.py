"""Sample/Dataset containers and subject-independent fold splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..registry import ClassRegistry
from ..rng import as_generator


@dataclass
class Sample:
    image: np.ndarray  # (H, W, 3) float32 in [-1, 1]
    label: int
    subject: str


@dataclass
class Dataset:
    samples: list
    registry: ClassRegistry

    def __len__(self) -> int:
        return len(self.samples)

    def subjects(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.subject, None)
        return list(seen)

    def filter_subjects(self, keep) -> "Dataset":
        keep = set(keep)
        return Dataset([s for s in self.samples if s.subject in keep], self.registry)

    def filter_labels(self, labels) -> "Dataset":
        """Keep samples of the given label names; registry (and indices) unchanged."""
        idx = {self.registry.index_of(l) for l in labels}
        return Dataset([s for s in self.samples if s.label in idx], self.registry)

    def images(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples]).astype(np.float32)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


@dataclass
class FoldSplit:
    folds: list  # list of lists of subject ids

    def __len__(self) -> int:
        return len(self.folds)

    def train_subjects(self, test_fold: int) -> list[str]:
        return [s for i, fold in enumerate(self.folds) for s in fold if i != test_fold]

    def test_subjects(self, test_fold: int) -> list[str]:
        return list(self.folds[test_fold])


def subject_kfold(dataset: Dataset, n_folds: int, seed_or_rng) -> FoldSplit:
    """Shuffle subjects and partition them into ``n_folds`` near-equal folds.

    Fold sizes differ by at most one; no subject appears in two folds, so
    train and test subject sets are always disjoint.
    """
    subjects = dataset.subjects()
    if n_folds < 1:
        raise ValueError(f"fold count must be >= 1, got {n_folds}")
    if n_folds > len(subjects):
        raise ValueError(f"cannot split {len(subjects)} subjects into {n_folds} folds")
    rng = as_generator(seed_or_rng)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    folds = [list(part) for part in np.array_split(np.array(order, dtype=object), n_folds)]
    return FoldSplit(folds)
