"""Thermal image augmentation: hot/cold occluders, sensor noise, geometry."""

from .config import AugConfig, AugParams, GeometricParams, OccluderParams
from .ops import (
    AugSample,
    add_netd_noise,
    apply_geometric,
    apply_params,
    augment,
    fg_bg_stats,
    geometric_transform,
    min_max_normalize,
    occluder_alpha,
    occluder_footprint,
    render_occluders,
    sample_geometric,
    sample_occluders,
    sample_params,
    sample_seed,
    synth_occluders,
)
from .stats import bimodality_disruption, histogram_edges, mass_outside_modes, modal_bins

__all__ = [
    "AugConfig", "AugParams", "AugSample", "GeometricParams", "OccluderParams",
    "add_netd_noise", "apply_geometric", "apply_params", "augment", "bimodality_disruption",
    "fg_bg_stats", "geometric_transform", "histogram_edges", "mass_outside_modes",
    "min_max_normalize", "modal_bins", "occluder_alpha", "occluder_footprint",
    "render_occluders", "sample_geometric", "sample_occluders", "sample_params",
    "sample_seed", "synth_occluders",
]
