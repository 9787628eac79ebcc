"""Identification of partially observed bilinear dynamical systems from a
single input-output trajectory: simulation, Kronecker input features,
minimum-norm least squares, excitation and stability diagnostics, and
SVD-based realization recovery."""

__version__ = "0.1.0"

from ._accel import BACKEND, NUMBA_ENABLED
from .errors import (
    BldsidError,
    ConfigError,
    InstabilityError,
    NumericalError,
    RankDeficiencyError,
    UnscalableMatrixError,
)
from .estimate import (
    ErrorDecomposition,
    GramReport,
    MarkovParams,
    error_decomposition,
    estimation_error,
    fit_markov,
    gram_min_eig,
    lse,
    lse_svd,
    pe_sample_threshold,
)
from .features import (
    FeatureConfig,
    MultiIndex,
    build_F,
    build_feature,
    column_of,
    dump_index_map,
    feature_matrix,
    features_from_windows,
    multiindex_of,
    noise_feature,
    noise_feature_matrix,
    truncation_bias,
    truncation_bias_matrix,
)
from .model import (
    Dims,
    SystemParams,
    random_system,
    scale_to_spectral_radius,
    spectral_radius,
)
from .moments import (
    FourthMomentReport,
    MomentReport,
    analytic_gamma,
    empirical_gamma,
    fourth_moment_feature_check,
    isotropy_check,
    moment_report,
)
from .recover import (
    HankelMatrix,
    Realization,
    block_hankel,
    extract_mixed,
    extract_powers,
    ho_kalman,
    markov_mismatch,
    true_markov,
)
from .rng import make_rng, spawn_rngs
from .simulate import (
    InputDistribution,
    NoiseConfig,
    Trajectory,
    draw_inputs,
    sample_input,
    simulate,
    unrolled_state,
)
from .stability import (
    StabilityReport,
    certify_uniform_stability,
    f_norm_check,
    jsr_estimate,
    norm_growth,
    phi_estimate,
)
