"""Mobile internet quality estimation with self-tuning-bandwidth kernel regression."""

from .data_model import Dataset, SamplePoint, ScoreRule, compute_score, parse_records, tile_centroid
from .regressors import KernelConfig, Kind, RegionParams, gaussian_kernel
from .spatial_index import Neighbor, PointIndex

__version__ = "0.1.0"

__all__ = ["Dataset", "SamplePoint", "ScoreRule", "compute_score", "parse_records", "tile_centroid",
           "KernelConfig", "Kind", "RegionParams", "gaussian_kernel", "Neighbor", "PointIndex"]
