"""Point-cloud cohort learning via simplicial diffusion-wavelet scattering.

Pipeline: learnable multi-view feature reweighting -> Gaussian-kernel
affinities -> Vietoris-Rips complex -> Hodge-Laplacian random walks ->
diffusion-wavelet scattering coefficients -> pooled feature vector -> MLP.
The topo module verifies the heat-diffusion properties the construction
relies on (component confinement, simplicial-graph agreement, geodesic
recovery).
"""

from .data import (
    Cohort,
    PointCloud,
    RunConfig,
    assemble_cohort,
    load_cohort,
    read_hpmx,
    split_cohort,
    with_labels,
    write_hpmx,
)
from .errors import (
    ConfigError,
    LoadError,
    PlexwaveError,
    SimplexBudgetError,
    TrainingDiverged,
)
from .views import AffinityGraph, init_view_weights, kernel_affinity, reweight
from .complexes import (
    SimplicialComplex,
    boundary_matrices,
    build_vr_complex,
    lift_features,
)
from .operators import (
    HodgeLaplacian,
    RandomWalk,
    SimplicialGraph,
    all_hodge_laplacians,
    dyadic_diffuse,
    heat_solve,
    hodge_laplacian,
    random_walk,
    simplicial_graph,
)
from .scattering import (
    block_descriptors,
    cloud_features,
    feature_length,
    feature_names,
    pool_and_concat,
    scatter_order1,
    scatter_order2,
    wavelet_transform,
)
from .learn import (
    AdamW,
    ModelParams,
    TrainState,
    backward,
    binary_auc,
    evaluate,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .topo import (
    PersistenceSummary,
    component_count,
    h0_persistence,
    h1_persistence,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)

__version__ = "0.1.0"
