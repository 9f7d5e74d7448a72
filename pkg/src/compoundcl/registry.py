"""Append-only class registry mapping labels to stable output indices."""

from __future__ import annotations

from .errors import AlreadyRegisteredError


class ClassRegistry:
    """Ordered class labels with a basic/compound flag per label.

    Indices are append-only: once a label is registered its index never
    changes, so classifier head columns stay aligned with labels for the
    lifetime of a run.
    """

    def __init__(self, labels=(), compound_flags=()):
        self._labels: list[str] = []
        self._compound: list[bool] = []
        self._index: dict[str, int] = {}
        flags = list(compound_flags) or [False] * len(list(labels))
        for label, flag in zip(labels, flags):
            self.add(label, compound=flag)

    def add(self, label: str, compound: bool = False) -> int:
        if label in self._index:
            raise AlreadyRegisteredError(f"class {label!r} already registered")
        self._index[label] = len(self._labels)
        self._labels.append(label)
        self._compound.append(bool(compound))
        return self._index[label]

    def index_of(self, label: str) -> int:
        return self._index[label]

    def label_of(self, index: int) -> str:
        return self._labels[index]

    def is_compound(self, label: str) -> bool:
        return self._compound[self._index[label]]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    @property
    def basic_labels(self) -> tuple[str, ...]:
        return tuple(l for l, c in zip(self._labels, self._compound) if not c)

    @property
    def compound_labels(self) -> tuple[str, ...]:
        return tuple(l for l, c in zip(self._labels, self._compound) if c)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def clone(self) -> "ClassRegistry":
        return ClassRegistry(self._labels, self._compound)

    def to_dict(self) -> dict:
        return {"labels": list(self._labels), "compound": list(self._compound)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassRegistry":
        return cls(d["labels"], d["compound"])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ClassRegistry)
            and self._labels == other._labels
            and self._compound == other._compound
        )

    def __repr__(self) -> str:
        return f"ClassRegistry({self._labels!r})"
