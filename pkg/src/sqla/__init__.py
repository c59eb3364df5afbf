"""Sample-and-query access and the linear-algebra routines built on it."""
from . import kernels
from .centroid import (
    CentroidInstance,
    FlattenedTensorAccess,
    centroid_distance_estimate,
    centroid_distance_run,
    tensor_query_a,
    tensor_query_b,
    tensor_sample_a,
)
from .core import (
    AccessStats,
    IntegrationOracle,
    SqMatrix,
    SqVector,
    build_dense,
    build_from_integration,
    build_matrix,
    build_sparse,
    build_uniform_rejection,
)
from .errors import *  # noqa: F401,F403
from .estimators import EstimatorParams, inner_product_estimate, median_of_means
from .lowrank import (
    LowRankDescription,
    LowRankParams,
    dense_svd,
    load_description,
    low_rank_approx,
    reconstruct_D_dense,
    save_description,
    sq_access_to_S,
)
from .matvec import MatVecHandle, from_dense, overhead_C_exact
from .pca import PcaParams, PcaResult, eigvec_access, eigvec_error_oracle, pca

__version__ = "0.1.0"
