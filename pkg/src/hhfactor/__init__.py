"""Approximate orthonormal and symmetric matrices with few Householder reflectors."""
from .reflectors import (
    ApproxReport,
    FactoredSymmetric,
    FlopCounter,
    ReflectorProduct,
    apply,
    apply_symmetric,
    apply_transpose,
    identity_product,
    relative_error,
    squared_error,
    to_dense,
)
from .serialization import FactorFormatError, deserialize, serialize
from .ortho import (
    approximate_orthonormal,
    constrained_approx,
    expected_bound_ortho,
    partial_qr_approx,
    spectral_prep,
    unconstrained_approx,
)
from .symmetric import SHFConfig, partial_eig_baseline, shf

__version__ = "0.1.0"
