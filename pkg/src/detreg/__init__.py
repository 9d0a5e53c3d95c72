"""Semi-parametric kernel regression with partial-projection DPP landmark selection."""

from .dpp import (
    EnsembleModel,
    PmfTable,
    build_ensemble,
    enumerate_distribution,
    pmf,
    sample,
    sample_fixed_size,
    sample_volume_bernoulli,
    volume_sample,
)
from .kernels import NNP, BasisSpec, KernelSpec, build_nnp, make_nnp
from .nystrom import NystromFactor, common_nystrom, nystrom_relative_error, projected_nystrom
from .regression import (
    Preconditioner,
    SemiParamFit,
    build_preconditioner,
    fit_full,
    fit_nystrom,
    fit_subset_interpolator,
    in_sample_estimate,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSpec", "EnsembleModel", "KernelSpec", "NNP", "NystromFactor", "PmfTable",
    "Preconditioner", "SemiParamFit", "build_ensemble", "build_nnp", "build_preconditioner",
    "common_nystrom", "enumerate_distribution", "fit_full", "fit_nystrom",
    "fit_subset_interpolator", "in_sample_estimate", "make_nnp", "nystrom_relative_error",
    "pmf", "predict", "projected_nystrom", "sample", "sample_fixed_size",
    "sample_volume_bernoulli", "volume_sample",
]
