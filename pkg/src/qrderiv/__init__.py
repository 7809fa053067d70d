"""Householder QR factorisation and analytic derivatives of its factors."""
from .derivatives import (
    FullDerivative,
    GivensReport,
    OmegaBlocks,
    ThinDerivative,
    WYDerivative,
    factored_derivative,
    full_q_derivative,
    givens_2x1_counterexample,
    omega_pp,
    omega_thin,
    qr_derivative,
    thin_derivative,
    wy_derivative,
    z_block,
)
from .errors import (
    BranchChangeError,
    DegeneracyError,
    DimensionError,
    NonInvertibleT,
    QRDerivError,
    RankDeficientError,
    SingularTriangularError,
)
from .fd import CheckReport, FDConfig, check_all, directional_fd
from .householder import (
    CompactWY,
    FactoredQR,
    HouseholderStep,
    assemble_q,
    assemble_q_thin,
    build_t_forward,
    householder_vector,
    qr_factor,
    t_inverse_from_y,
)
from .matrix import Shape, mask_strict_lower, mask_upper, partition, solve_unit_lower, solve_upper

__version__ = "0.1.0"
