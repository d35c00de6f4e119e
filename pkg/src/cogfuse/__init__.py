"""Normalized linear cross-attention fusion, pixel-shuffle front-end and an
uncertainty-weighted distillation loss, with verification and benchmarks."""

from .numeric import (
    CogfuseError,
    ConfigError,
    InvalidInputError,
    KernelKind,
    ShapeError,
    apply_kernel,
    matmul,
    row_softmax,
    seeded_random_matrix,
)
from .caf import (
    CafConfig,
    FusedSequence,
    attention_weights,
    caf_linear,
    caf_reference,
    fuse,
    multi_head_caf,
    softmax_attention,
)
from .vision import adaptive_encode, mlp_adapter, pixel_shuffle, pixel_unshuffle
from .adcot import (
    LossBreakdown,
    TeacherTrace,
    TokenSeq,
    UncertaintyParams,
    adcot_loss,
    build_enriched_prompt,
    kl_term,
    mtl_loss,
    nll_term,
    parse_teacher_trace,
)
from .gradcheck import GradReport, check_grads, finite_diff_grad

__version__ = "0.1.0"
