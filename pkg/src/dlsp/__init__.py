"""Structure-property surrogate pipeline for organic photovoltaic active
layers: morphology generation, device-physics labeling, a CNN surrogate,
saliency maps, and population-based morphology design."""

__version__ = "0.1.0"

from .morpho import (
    BinaryMorphology,
    BinningSpec,
    DatasetManifest,
    LabeledSample,
    Morphology,
    assign_class,
    augment,
    binarize,
    compute_binning,
    decode_pgm,
    encode_pgm,
    interface_mask,
    load_manifest,
    load_morphology,
    save_manifest,
    save_morphology,
    split_dataset,
)

__all__ = [
    "BinaryMorphology",
    "BinningSpec",
    "DatasetManifest",
    "LabeledSample",
    "Morphology",
    "assign_class",
    "augment",
    "binarize",
    "compute_binning",
    "decode_pgm",
    "encode_pgm",
    "interface_mask",
    "load_manifest",
    "load_morphology",
    "save_manifest",
    "save_morphology",
    "split_dataset",
]
