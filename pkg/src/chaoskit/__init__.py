"""Desk-scale laboratory for processes in a fixed Wiener chaos."""
from chaoskit.tensor import (
    SubspaceBasis,
    SymTensor,
    contract_last,
    inner,
    orthonormal_range,
    residual_ratio,
    symmetrize,
    to_coords,
    unfold,
)
from chaoskit.chaos import (
    ChaosVariable,
    GaussianSample,
    evaluate,
    hermite,
    malliavin_gradient,
    malliavin_matrix,
    mc_expectation,
)
from chaoskit.kernels import KernelFamily, make_family, sample_path

__version__ = "0.1.0"
