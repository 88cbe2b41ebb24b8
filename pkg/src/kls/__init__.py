"""Karhunen-Loeve decompositions, KL sampling and path-regularity diagnostics."""
from .analysis import (
    DecayFit,
    DichotomyReport,
    SmallBallReport,
    SmoothnessCertificate,
    TruncationReport,
    default_fit_range,
    dichotomy_probe,
    fit_decay,
    pointwise_variance_residual,
    small_ball_estimate,
    smoothness_certificate,
    truncation_error_curve,
)
from .estimator import KarhunenLoeve
from .exceptions import *  # noqa: F401,F403
from .grid import Grid, build_gauss, build_uniform, inner, reweight
from .kernels import (
    BrownianBridge,
    BrownianMotion,
    Constant,
    KernelSpec,
    Matern,
    OrnsteinUhlenbeck,
    Tabulated,
    evaluate,
    gram,
    kernel_from_dict,
    trace_nu,
)
from .powerspace import fourier_coeffs, power_kernel, power_norm, summability
from .sampling import CoefficientLaw, SamplePath, sample_batch, sample_coefficients, synthesize_path
from .spectral import SpectralDecomposition, decompose, mercer_residual, nystrom_extend

__version__ = "0.1.0"
