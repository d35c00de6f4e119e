"""Text-queried linear cross-attention with mean-centred, sum-to-one weights.

For a query ``q`` and keys ``K`` (``N`` rows) the weight on key ``j`` is::

    w_j = phi(q) . phi(K_j) - mean_s(phi(q) . phi(K_s)) + 1/N

The weights are signed and always sum to one. Because they are affine in the
scores, the weighted sum of values can be regrouped into three key-side
aggregates computed once::

    S_kv = sum_j phi(K_j) V_j^T      (d x d_v)
    s_k  = sum_j phi(K_j)            (d)
    v_bar = mean_j V_j               (d_v)
    out_i = phi(Q_i) S_kv - (phi(Q_i) . s_k - 1) v_bar

which costs ``O(N (d d_v))`` instead of ``O(N_q N_k d)``.
:func:`caf_reference` materialises the weight matrix and is kept as the
correctness oracle for :func:`caf_linear`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numeric import (
    ConfigError,
    KernelKind,
    ShapeError,
    apply_kernel,
    as_feature_matrix,
    feature_map,
    row_softmax,
)

__all__ = [
    "CafConfig",
    "FusedSequence",
    "attention_weights",
    "caf_reference",
    "caf_linear",
    "softmax_attention",
    "multi_head",
    "multi_head_caf",
    "fuse",
]

AttentionFn = Callable[[np.ndarray, np.ndarray, np.ndarray, KernelKind], np.ndarray]


@dataclass(frozen=True)
class CafConfig:
    model_dim: int
    num_heads: int = 8
    kernel: KernelKind = KernelKind.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "kernel", KernelKind.parse(self.kernel))
        if self.num_heads < 1:
            raise ConfigError(f"num_heads must be >= 1, got {self.num_heads}")
        if self.model_dim < 1:
            raise ConfigError(f"model_dim must be >= 1, got {self.model_dim}")
        if self.model_dim % self.num_heads:
            raise ConfigError(
                f"model_dim={self.model_dim} is not divisible by num_heads={self.num_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass(frozen=True)
class FusedSequence:
    """Fused visual block followed by the untouched text embeddings.

    ``tokens[:boundary]`` are the text-conditioned visual tokens and
    ``tokens[boundary:]`` is the text input, copied bit for bit.
    """

    tokens: np.ndarray
    boundary: int

    @property
    def visual(self) -> np.ndarray:
        return self.tokens[: self.boundary]

    @property
    def text(self) -> np.ndarray:
        return self.tokens[self.boundary :]

    def __len__(self) -> int:
        return self.tokens.shape[0]


def _check_qkv(Q, K, V):
    Q = as_feature_matrix(Q, "Q")
    K = as_feature_matrix(K, "K")
    V = as_feature_matrix(V, "V")
    if Q.shape[1] != K.shape[1]:
        raise ShapeError(f"query dim {Q.shape[1]} != key dim {K.shape[1]}")
    if K.shape[0] != V.shape[0]:
        raise ShapeError(f"{K.shape[0]} keys but {V.shape[0]} values")
    return Q, K, V


def attention_weights(q, K, kernel: KernelKind | str = KernelKind.IDENTITY) -> np.ndarray:
    """Signed weights of one query over all keys; they sum to one.

    Negative entries are legitimate: the mean score is subtracted, so any
    key scoring below average gets a weight below ``1/N``.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ShapeError(f"q must be a vector, got shape {q.shape}")
    K = as_feature_matrix(K, "K")
    if q.shape[0] != K.shape[1]:
        raise ShapeError(f"query length {q.shape[0]} != key dim {K.shape[1]}")
    n = K.shape[0]
    scores = apply_kernel(K, kernel) @ apply_kernel(q, kernel)
    return scores - scores.mean() + 1.0 / n


def _reference_core(Q, K, V, kernel: KernelKind, batch_bytes: int = 1 << 21) -> np.ndarray:
    phi_q = feature_map(Q, kernel)
    phi_k_t = feature_map(K, kernel).T
    v_bar = V.mean(axis=0)
    rows = max(1, batch_bytes // (8 * K.shape[0]))
    out = np.empty((Q.shape[0], V.shape[1]))
    for start in range(0, Q.shape[0], rows):
        centred = phi_q[start : start + rows] @ phi_k_t
        centred -= centred.mean(axis=1, keepdims=True)
        out[start : start + rows] = centred @ V + v_bar
    return out


def caf_reference(Q, K, V, kernel: KernelKind | str = KernelKind.IDENTITY,
                  batch_bytes: int = 1 << 21) -> np.ndarray:
    """Quadratic form: explicit centred weights for every (query, key) pair.

    Query rows are processed in batches so that one batch of full weight
    rows stays around ``batch_bytes``; the total work is still
    ``O(N_q N_k d)``. The uniform ``1/N`` part of every weight contributes
    exactly the value mean, so it is added after the product instead of in
    another pass over the weights.
    """
    Q, K, V = _check_qkv(Q, K, V)
    return _reference_core(Q, K, V, KernelKind.parse(kernel), batch_bytes)


def _linear_core(Q, K, V, kernel: KernelKind) -> np.ndarray:
    phi_q = feature_map(Q, kernel)
    phi_k = feature_map(K, kernel)
    s_kv = phi_k.T @ V
    s_k = phi_k.sum(axis=0)
    v_bar = V.mean(axis=0)
    # phi_q S_kv - (phi_q . s_k) v_bar + v_bar, with the middle term folded into one d x d_v matrix
    out = phi_q @ (s_kv - np.outer(s_k, v_bar))
    out += v_bar
    return out


def caf_linear(Q, K, V, kernel: KernelKind | str = KernelKind.IDENTITY) -> np.ndarray:
    """Linear form: aggregate keys and values once, then each query is ``O(d d_v)``."""
    Q, K, V = _check_qkv(Q, K, V)
    return _linear_core(Q, K, V, KernelKind.parse(kernel))


def _softmax_core(Q, K, V, kernel: KernelKind) -> np.ndarray:
    return row_softmax(feature_map(Q, kernel) @ feature_map(K, kernel).T) @ V


def softmax_attention(Q, K, V, kernel: KernelKind | str = KernelKind.IDENTITY) -> np.ndarray:
    """Softmax over raw kernel scores. Benchmark baseline only."""
    Q, K, V = _check_qkv(Q, K, V)
    return _softmax_core(Q, K, V, KernelKind.parse(kernel))


# inputs are validated once by multi_head, so heads can skip the checks
_CORES = {caf_reference: _reference_core, caf_linear: _linear_core,
          softmax_attention: _softmax_core}


def multi_head(fn: AttentionFn, Q, K, V, cfg: CafConfig) -> np.ndarray:
    """Run ``fn`` on contiguous column slices of width ``cfg.head_dim``.

    Heads are evaluated in order and concatenated back; with one head
    the inputs are passed through unsliced.
    """
    Q, K, V = _check_qkv(Q, K, V)
    for name, m in (("Q", Q), ("K", K), ("V", V)):
        if m.shape[1] != cfg.model_dim:
            raise ShapeError(f"{name} has {m.shape[1]} columns, config expects {cfg.model_dim}")
    if cfg.num_heads == 1:
        return fn(Q, K, V, cfg.kernel)
    fn = _CORES.get(fn, fn)
    hd = cfg.head_dim
    out = np.empty((Q.shape[0], cfg.model_dim))
    for h in range(cfg.num_heads):
        cols = slice(h * hd, (h + 1) * hd)
        out[:, cols] = fn(Q[:, cols], K[:, cols], V[:, cols], cfg.kernel)
    return out


def multi_head_caf(Q, K, V, cfg: CafConfig) -> np.ndarray:
    return multi_head(caf_linear, Q, K, V, cfg)


def fuse(visual, text, cfg: CafConfig, query_source: str = "text") -> FusedSequence:
    """Replace the visual block with CAF output and append the text tokens.

    With ``query_source="text"`` (the default) the text tokens query the
    visual tokens and the fused block has ``len(text)`` rows.
    ``query_source="image"`` swaps the roles: visual tokens query the text,
    giving ``len(visual)`` fused rows.
    """
    visual = as_feature_matrix(visual, "visual")
    text = as_feature_matrix(text, "text")
    if visual.shape[1] != cfg.model_dim or text.shape[1] != cfg.model_dim:
        raise ShapeError(
            f"visual ({visual.shape[1]}) and text ({text.shape[1]}) widths must equal "
            f"model_dim={cfg.model_dim}"
        )
    if query_source == "text":
        fused = multi_head_caf(text, visual, visual, cfg)
    elif query_source == "image":
        fused = multi_head_caf(visual, text, text, cfg)
    else:
        raise ConfigError(f"query_source must be 'text' or 'image', got {query_source!r}")
    tokens = np.concatenate([fused, text], axis=0)
    return FusedSequence(tokens=tokens, boundary=fused.shape[0])
