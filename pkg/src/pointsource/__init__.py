"""Recovery of point sources in Poisson and Helmholtz problems from boundary data."""
from .domain import DomainSpec, sample_boundary, sample_interior
from .estimators import AlgebraicSourceRecovery, SENNSourceRecovery, SourceCountDetector
from .kernels import KernelKind
from .sources import CauchyData, SourceSet
from .synthetic import GroundTruth, ground_truth_registry

__version__ = "0.1.0"

__all__ = [
    "AlgebraicSourceRecovery",
    "CauchyData",
    "DomainSpec",
    "GroundTruth",
    "KernelKind",
    "SENNSourceRecovery",
    "SourceCountDetector",
    "SourceSet",
    "ground_truth_registry",
    "sample_boundary",
    "sample_interior",
]
