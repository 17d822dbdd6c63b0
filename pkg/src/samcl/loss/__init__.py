from .auxnet import AuxNet, aux_forward, build_auxnet
from .onehot import SwappedMask, class_swap, derangements, is_derangement, one_hot, sample_derangement
from .rmi import LossConfig, ce_distance, pixel_cross_entropy, rmi_distance
from .samcl import hinge, samcl_loss, samcl_terms, triplet_term

__all__ = [
    "AuxNet", "aux_forward", "build_auxnet",
    "SwappedMask", "class_swap", "derangements", "is_derangement", "one_hot", "sample_derangement",
    "LossConfig", "ce_distance", "pixel_cross_entropy", "rmi_distance",
    "hinge", "samcl_loss", "samcl_terms", "triplet_term",
]
