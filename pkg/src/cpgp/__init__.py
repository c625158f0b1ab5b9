"""Exact, scalable periodic Gaussian process modeling for grid-sampled signals.

The likelihood of a periodic GP on a regular grid decomposes exactly into a
circulant segment part and a Toeplitz remainder part, which makes evaluation,
period estimation, and BLUP prediction cost O(p^2) in the segment length
instead of O(n^3) in the signal length.  A dense brute-force reference model
ships alongside for verification.
"""

from .errors import (
    ConfigError,
    CpgpError,
    FitFailureError,
    InitializationFailureError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    NumericalFailureError,
    NumericalSymmetryError,
    RankDeficientBasisError,
    SignalIOError,
    SingularMatrixError,
)
from .estimator import FitResult, SearchConfig, fit, init_grid, optimize_hyperparams, scan_objective, scan_values
from .kernel import Hyperparams, KernelBlocks, PeriodSpec, Signal, build_kernel_blocks, periodic_correlation
from .likelihood import (
    ConstantBasis,
    LikelihoodEval,
    PolynomialBasis,
    RegressionBasis,
    SegmentedData,
    SufficientStats,
    acpgp_loglik,
    estimate_beta_sigma,
    profile_loglik,
    segment,
    sufficient_stats,
)
from .oracle import DenseModel, build_dense_model, dense_blup, dense_decomposition_check, dense_loglik
from .predictor import PredictorState, build_state, cross_correlations, denoise, predict, predict_batch, state_from_fit
from .signals import NoiseSpec, SyntheticSpec, add_noise, measured_snr_db, read_signal_csv, synthesize, write_signal_csv
from .structured import (
    SymmetricCirculant,
    SymmetricToeplitz,
    circulant_eigenvalues,
    circulant_logdet,
    circulant_solve,
    toeplitz_cholesky,
    toeplitz_cholesky_logdet_solve,
)

__version__ = "0.1.0"
