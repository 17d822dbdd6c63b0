"""Thermal image I/O, landmark masks, dataset manifests and synthetic faces."""

from .formats import (
    load_landmarks,
    load_mask,
    load_pgm,
    load_thermal,
    save_landmarks,
    save_mask,
    save_pgm,
    save_preview16,
    save_thermal,
)
from .index import DatasetIndex, IndexEntry, split_by_subject, split_subjects
from .landmarks import LandmarkSet, RegionDefinition, default_regions, landmarks_to_mask
from .raster import polygon_area, polygon_mask
from .synth import SyntheticFaceConfig, synth_face, synth_face_sample, synthetic_benchmark, write_dataset

__all__ = [
    "DatasetIndex", "IndexEntry", "LandmarkSet", "RegionDefinition", "SyntheticFaceConfig",
    "default_regions", "landmarks_to_mask", "load_landmarks", "load_mask", "load_pgm",
    "load_thermal", "polygon_area", "polygon_mask", "save_landmarks", "save_mask", "save_pgm",
    "save_preview16", "save_thermal", "split_by_subject", "split_subjects", "synth_face",
    "synth_face_sample", "synthetic_benchmark", "write_dataset",
]
