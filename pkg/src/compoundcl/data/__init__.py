"""Dataset ingestion, preprocessing, splitting, and synthetic generation."""

from .dataset import Dataset, FoldSplit, Sample, subject_kfold
from .manifest import export_dataset, load_manifest, write_manifest
from .preprocess import augment, augment_with_params, denormalize, normalize
from .synth import PRIMITIVES, SynthSpec, all_pair_compounds, default_compounds, generate

__all__ = [
    "Dataset",
    "FoldSplit",
    "Sample",
    "subject_kfold",
    "load_manifest",
    "write_manifest",
    "export_dataset",
    "normalize",
    "denormalize",
    "augment",
    "augment_with_params",
    "SynthSpec",
    "PRIMITIVES",
    "default_compounds",
    "all_pair_compounds",
    "generate",
]
