"""Exceptional and hybrid points of damped/amplified multimode bosonic systems."""

from .dynamics import (
    DampedAmplifiedPair,
    commutator_check,
    force_correlations,
    gaussian_evolution,
    reservoir_consistency,
)
from .errors import (
    ConfigError,
    ConstraintError,
    EigenpointError,
    IndeterminacyError,
    NoClosedFormError,
    QuadratureError,
    ScanError,
)
from .model import (
    SystemSpec,
    Topology,
    build_reduced,
    build_system,
    perturb,
    rate_aggregates,
    rates_from_aggregates,
)
from .moments import generate_table, partition_spectrum, table_from_partition
from .singularity import classify, jordan_structure, perturbation_scan
from .spectra import analytic_eigensystem, lift_full_spectrum, locus_residual

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstraintError",
    "DampedAmplifiedPair",
    "EigenpointError",
    "IndeterminacyError",
    "NoClosedFormError",
    "QuadratureError",
    "ScanError",
    "SystemSpec",
    "Topology",
    "analytic_eigensystem",
    "build_reduced",
    "build_system",
    "classify",
    "commutator_check",
    "force_correlations",
    "gaussian_evolution",
    "generate_table",
    "jordan_structure",
    "lift_full_spectrum",
    "locus_residual",
    "partition_spectrum",
    "perturb",
    "perturbation_scan",
    "rate_aggregates",
    "rates_from_aggregates",
    "reservoir_consistency",
    "table_from_partition",
]
