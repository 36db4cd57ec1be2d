"""Randomized sparse-grid quadrature with scrambled (0,m,s)-net building
blocks, plus Haar-wavelet machinery for empirical error analysis."""

__version__ = "0.1.0"

from .basis import (
    DigitPoint,
    ElementaryInterval,
    compositions,
    digit_point,
    digits_of,
    interval_contains,
    value_of,
)
from .nets import NetParams, PointSet, default_net, faure_net, is_net, is_net_values, stratified_grid
from .scrambling import (
    RealizedQuadrature,
    ScrambledNet,
    ScramblerKey,
    permutation_for,
    realize_building_block,
    scramble_net,
    scramble_point,
)
from .smolyak import (
    SmolyakPlan,
    apply_quadrature,
    combination_terms,
    dimension_reduction_check,
    make_plan,
    node_count,
    realize,
    weight_sum_formula,
)
from .wavelets import (
    SpaceParams,
    WaveletIndex,
    canonical_coefficients,
    haar_alpha_norm,
    indices_of_resolution,
    integral_of_wavelet,
    psi_eval_1d,
    psi_eval_multi,
)
from .analysis import (
    BlockEnsemble,
    ConvergenceRecord,
    LambdaBlock,
    MomentEstimate,
    candidate_worst_index,
    convergence_study,
    count_admissible_levels,
    cross_moment,
    jacobi_eigenvalues,
    lambda_block,
    lower_bound_probe,
    randomized_error_estimate,
    rate_fits,
    second_moment_bb,
    second_moment_bracket,
    spectral_radius,
)
