"""Conformal dimension bounds for finite samples of self-similar spaces."""

__version__ = "0.1.0"

from .arcs import Arc, check_follows, find_quasiarc, quasiarc_constant, straighten
from .cantor import (CantorFamily, UltrametricCantor, build_family, natural_product_family,
                     search_family)
from .connectivity import annular_constant, least_linear_constant
from .dimension import bound_from_family, box_counting_dimension, pansu_bound
from .metric import FiniteMetricSpace, NeighborGraph, hausdorff_distance, set_distance
from .spaces import SpaceSpec, generate, load, save
from .splitter import scale_split, topological_split

__all__ = [
    "Arc", "CantorFamily", "FiniteMetricSpace", "NeighborGraph", "SpaceSpec",
    "UltrametricCantor", "annular_constant", "bound_from_family", "box_counting_dimension",
    "build_family", "check_follows", "find_quasiarc", "generate", "hausdorff_distance",
    "least_linear_constant", "load", "natural_product_family", "pansu_bound",
    "quasiarc_constant", "save", "scale_split", "search_family", "set_distance", "straighten",
    "topological_split", "__version__",
]
