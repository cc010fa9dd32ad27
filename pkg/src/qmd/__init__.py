"""Quantitative metric density on dyadic grids: sparsity, Carleson packing
sums, and well-connected decompositions of subsets of [0,1]^d."""

from .dyadic import DyadicCube, GridGeometry, GridPoint, Region, cube, minimal_common_cube, region_of
from .gridset import GridSet, gen_family, load, measure, save
from .multires import Ball, build_nets, family

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "DyadicCube",
    "GridGeometry",
    "GridPoint",
    "GridSet",
    "Region",
    "build_nets",
    "cube",
    "family",
    "gen_family",
    "load",
    "measure",
    "minimal_common_cube",
    "region_of",
    "save",
    "__version__",
]
