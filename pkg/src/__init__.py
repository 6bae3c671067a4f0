"""
hilbertlab - Hilbert geometries, Benzecri standardization and nilpotency
experiments for groups of projective automorphisms.
"""
from core import HilbertLabError, SCHEMA_VERSION
from projective import ProjectiveMap, ProjectivePoint, cross_ratio
from convex import Ellipsoid, MarkedBody, Polytope, make_family
from hilbert import distance, displacement

__version__ = "1.0.0"
__all__ = [
    "HilbertLabError", "SCHEMA_VERSION",
    "ProjectiveMap", "ProjectivePoint", "cross_ratio",
    "Ellipsoid", "MarkedBody", "Polytope", "make_family",
    "distance", "displacement",
]
