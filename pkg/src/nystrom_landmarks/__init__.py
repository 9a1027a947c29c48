"""Nystrom landmark selection driven by regularized Christoffel functions."""

from .christoffel import (
    ChristoffelQuery,
    OracleSolution,
    christoffel_inverse,
    christoffel_inverse_all,
    christoffel_inverse_det,
    christoffel_inverse_projection,
    christoffel_inverse_soft,
    optimal_coefficients,
    qp_oracle,
    soft_weights,
)
from .errors import CapacityError, ConfigError, DataQualityError, DomainError, NystromError, SingularMatrixError
from .kernel_core import (
    Dataset,
    KernelFamily,
    KernelMatrix,
    KernelSource,
    KernelSpec,
    kernel_cross,
    kernel_eval,
    kernel_matrix,
    load_dataset,
    read_csv,
    standardize,
)
from .lambertw import lambertw_m1
from .projector import (
    IncrementalNystrom,
    LandmarkSet,
    NystromApprox,
    ProjectorKernel,
    check_corollary1,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    effective_dimension,
    error_frobenius_subsets,
    error_max_norm,
    error_operator_norm,
    leverage_scores,
    nystrom,
    projector_kernel,
    regularized_residual,
    residual_diagonal,
    smoothing_kernel,
)
from .rff import ApproxProjector, RffMap, approx_ras, featurize, load_features, rff_build, save_features
from .samplers import (
    DasTrace,
    RasTrace,
    check_lemma4,
    das_bound,
    das_sample,
    oversampling_lower_bound,
    ras_effective_dimension,
    ras_guarantee_trial,
    ras_sample,
    rls_sample,
    uniform_sample,
)

__version__ = "0.1.0"
