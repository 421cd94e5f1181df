"""Numerical toolkit for Bergman kernels, weighted Bergman spaces and composition operators."""

__version__ = "0.1.0"

from .domains import (
    DomainSpec,
    SiegelStructure,
    WeightParams,
    ball_automorphism,
    cayley,
    domain_beta_int,
    domain_beta_min,
    kernel,
    kernel_diag,
    normalized_kernel,
    parse_domain,
    structure_of,
    weighted_kernel,
)
from .errors import BergcompError
from .geometry import MetricBall, WHOLE_DOMAIN, bergman_distance, metric_tensor, vol_beta
from .maps import HoloMap, parse_map
from .sampling import McConfig, McEstimate

__all__ = [
    "BergcompError", "DomainSpec", "HoloMap", "McConfig", "McEstimate", "MetricBall",
    "SiegelStructure", "WHOLE_DOMAIN", "WeightParams", "ball_automorphism", "bergman_distance",
    "cayley", "domain_beta_int", "domain_beta_min", "kernel", "kernel_diag", "metric_tensor",
    "normalized_kernel", "parse_domain", "parse_map", "structure_of", "vol_beta",
    "weighted_kernel",
]
