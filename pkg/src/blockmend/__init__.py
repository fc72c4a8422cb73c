"""Spatial error concealment for 16x16 block losses in grayscale images.

A scalable kernel-based MMSE estimator with three stacked reconstruction
layers (context averaging, exponential-weight prediction over a growing
support area, and a covariance-scaled kernel pipeline), profile-driven
layer switching, and a benchmark harness for quality/speed measurements.
"""

from .errors import (
    BlockmendError,
    DimensionMismatchError,
    EmptyContextError,
    FormatError,
    InsufficientCandidatesError,
    WeightUnderflowError,
)
from .estimators import (
    BETA_GRID,
    DEFAULT_SIGMA2,
    BandwidthParams,
    CovarianceBlocks,
    KernelWeights,
    Layer,
    PatchEstimate,
    brl_estimate,
    hql_estimate,
    idl_estimate,
    idl_weights,
    kernel_weights,
    optimize_alpha,
    optimize_beta,
    predict_xy,
    sample_covariance,
)
from .framework import (
    CandidateSet,
    ExpansionMap,
    PatchJob,
    TargetContext,
    build_expansion_map,
    build_schedule,
    expand_support,
    extract_target,
    gather_candidates,
)
from .image import BLOCK_SIZE, BlockGrid, ImageBuffer, LossMask, PixelState, apply_mask
from .loss import SplitMix64, gen_dispersed_mask, gen_random_mask
from .metrics import ConcealmentReport, psnr, psnr_masked, ssim, usage_fractions
from .netpbm import load_image, load_mask, save_image, save_mask, save_ppm
from .profiles import (
    PROFILE_TABLE,
    LayerDecision,
    Profile,
    audit_decisions,
    conceal_image,
    flatness,
    select_and_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCK_SIZE",
    "BETA_GRID",
    "DEFAULT_SIGMA2",
    "PROFILE_TABLE",
    "BandwidthParams",
    "BlockGrid",
    "BlockmendError",
    "CandidateSet",
    "ConcealmentReport",
    "CovarianceBlocks",
    "DimensionMismatchError",
    "EmptyContextError",
    "ExpansionMap",
    "FormatError",
    "ImageBuffer",
    "InsufficientCandidatesError",
    "KernelWeights",
    "Layer",
    "LayerDecision",
    "LossMask",
    "PatchEstimate",
    "PatchJob",
    "PixelState",
    "Profile",
    "SplitMix64",
    "TargetContext",
    "WeightUnderflowError",
    "apply_mask",
    "audit_decisions",
    "brl_estimate",
    "build_expansion_map",
    "build_schedule",
    "conceal_image",
    "expand_support",
    "extract_target",
    "flatness",
    "gather_candidates",
    "gen_dispersed_mask",
    "gen_random_mask",
    "hql_estimate",
    "idl_estimate",
    "idl_weights",
    "kernel_weights",
    "load_image",
    "load_mask",
    "optimize_alpha",
    "optimize_beta",
    "predict_xy",
    "psnr",
    "psnr_masked",
    "sample_covariance",
    "save_image",
    "save_mask",
    "save_ppm",
    "select_and_estimate",
    "ssim",
    "usage_fractions",
]
