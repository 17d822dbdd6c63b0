"""Thermal facial segmentation with class-swap triplet supervision and thermal augmentation."""

__version__ = "0.1.0"
