"""Unsupervised segmentation of point clouds into intersecting manifolds."""

__version__ = "0.1.0"

from .config import AcevConfig
from .errors import DatasetParseError, DegenerateNeighborhoodError, InvalidInputError
from .metrics import ari, nmi
from .traversal import ManifoldLabeling, segment

__all__ = [
    "AcevConfig",
    "DatasetParseError",
    "DegenerateNeighborhoodError",
    "InvalidInputError",
    "ManifoldLabeling",
    "ari",
    "nmi",
    "segment",
]
