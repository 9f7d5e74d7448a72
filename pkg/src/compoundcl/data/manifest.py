"""Manifest-based dataset ingestion.

A manifest is UTF-8 CSV with the exact header ``path,label,subject``.
Paths resolve relative to the manifest's root directory, must decode as
images, and are assumed to be pre-cropped faces or equivalent; no
detection or alignment happens here.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import ManifestError
from ..registry import ClassRegistry
from .dataset import Dataset, Sample
from .preprocess import denormalize, normalize

HEADER = ["path", "label", "subject"]


def load_manifest(root, manifest_path, image_size: int, basic_labels=None) -> Dataset:
    """Load every manifest row into a Dataset.

    The class registry is built from distinct labels in first-appearance
    order; labels in ``basic_labels`` (all labels, when None) are flagged
    basic and the rest compound. Duplicate path rows yield distinct
    samples.
    """
    from PIL import Image, UnidentifiedImageError

    root = Path(root)
    manifest_path = Path(manifest_path)
    registry = ClassRegistry()
    samples = []
    basic = None if basic_labels is None else set(basic_labels)
    with open(manifest_path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{manifest_path}: empty manifest") from None
        if [h.strip() for h in header] != HEADER:
            raise ManifestError(f"{manifest_path}: header must be {','.join(HEADER)}, got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ManifestError(f"{manifest_path} row {row_no}: expected 3 fields, got {len(row)}")
            rel, label, subject = (c.strip() for c in row)
            path = root / rel
            if not path.is_file():
                raise ManifestError(f"{manifest_path} row {row_no}: missing file {path}")
            try:
                with Image.open(path) as im:
                    rgb = im.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
            except UnidentifiedImageError:
                raise ManifestError(f"{manifest_path} row {row_no}: cannot decode image {path}") from None
            if label not in registry:
                registry.add(label, compound=(basic is not None and label not in basic))
            samples.append(Sample(normalize(np.asarray(rgb)), registry.index_of(label), subject))
    if not samples:
        raise ManifestError(f"{manifest_path}: manifest contains no samples")
    return Dataset(samples, registry)


def write_manifest(path, rows):
    """Write (path, label, subject) rows with the canonical header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEADER)
        for row in rows:
            writer.writerow(list(row))


def export_dataset(dataset: Dataset, out_dir) -> Path:
    """Write one PNG per sample plus a manifest; returns the manifest path."""
    from PIL import Image

    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(dataset.samples):
        label = dataset.registry.label_of(s.label)
        fname = f"{i:05d}_{label.replace('+', '_')}_{s.subject}.png"
        Image.fromarray(denormalize(s.image), mode="RGB").save(images_dir / fname, format="PNG")
        rows.append((f"images/{fname}", label, s.subject))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
