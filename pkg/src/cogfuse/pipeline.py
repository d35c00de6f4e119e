"""End-to-end drivers: the toy distillation loop and the fusion pipeline demo.

Both are deterministic for a given seed and return plain-text reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adcot import (
    TeacherTrace,
    TokenSeq,
    UncertaintyParams,
    build_enriched_prompt,
    kl_term,
    mtl_loss,
    nll_term,
)
from .caf import CafConfig, FusedSequence, fuse
from .numeric import InvalidInputError, rng_from_seed
from .vision import PatchEmbedder, adaptive_encode, init_adapter, mlp_adapter, pixel_shuffle

__all__ = [
    "LossDemoConfig",
    "TrainingStep",
    "run_loss_demo",
    "format_loss_report",
    "FuseDemoConfig",
    "FuseDemoResult",
    "run_fuse_demo",
    "format_fuse_report",
]


# --- distillation demo ----------------------------------------------------

@dataclass
class LossDemoConfig:
    steps: int = 500
    lr: float = 0.5
    lr_uncertainty: float = 0.1
    feature_dim: int = 32
    seed: int = 0
    # lower bound on log sigma^2 for both tasks
    s_floor: float = math.log(0.05)


@dataclass(frozen=True)
class TrainingStep:
    step: int
    hard: float
    soft: float
    var_hard: float
    var_soft: float
    total: float


def _check_pairs(traces: Sequence[TeacherTrace], labels: Sequence[TokenSeq]) -> None:
    if len(traces) != len(labels):
        raise InvalidInputError(f"{len(traces)} traces but {len(labels)} labels")
    if not traces:
        raise InvalidInputError("no training samples")
    vocab = labels[0].vocab_size
    for i, (t, y) in enumerate(zip(traces, labels)):
        if y.vocab_size != vocab or t.vocab_size != vocab:
            raise InvalidInputError(
                f"sample {i}: vocabulary sizes disagree (labels {y.vocab_size}, "
                f"teacher {t.vocab_size}, expected {vocab})"
            )


def run_loss_demo(traces: Sequence[TeacherTrace], labels: Sequence[TokenSeq],
                  cfg: LossDemoConfig = LossDemoConfig()) -> list[TrainingStep]:
    """Fit a linear student head by gradient descent on the combined loss.

    Each answer position of each sample gets a fixed random feature vector;
    the student is ``logits = X @ W`` with ``W`` starting at zero. Hard and
    soft terms are averaged over samples. ``W`` and both log-variances are
    updated every step and the log-variances are clamped at
    ``cfg.s_floor``. Returns one record per step, including step 0.
    """
    _check_pairs(traces, labels)
    vocab = labels[0].vocab_size
    rng = rng_from_seed(cfg.seed)
    feats = [rng.standard_normal((len(y), cfg.feature_dim)) / math.sqrt(cfg.feature_dim)
             for y in labels]
    W = np.zeros((cfg.feature_dim, vocab))
    s = np.zeros(2)
    n = len(labels)
    history = []
    for step in range(cfg.steps + 1):
        hard = soft = 0.0
        g_hard_w = np.zeros_like(W)
        g_soft_w = np.zeros_like(W)
        for X, y, t in zip(feats, labels, traces):
            logits = X @ W
            h, gh = nll_term(logits, y)
            k, gk = kl_term(t, logits)
            hard += h / n
            soft += k / n
            g_hard_w += X.T @ gh / n
            g_soft_w += X.T @ gk / n
        br = mtl_loss(hard, soft, UncertaintyParams(float(s[0]), float(s[1])), g_hard_w, g_soft_w)
        history.append(TrainingStep(step, hard, soft, math.exp(s[0]), math.exp(s[1]), br.total))
        if step == cfg.steps:
            break
        W = W - cfg.lr * br.grad_logits
        s = np.maximum(s - cfg.lr_uncertainty * np.array([br.grad_s_hard, br.grad_s_soft]),
                       cfg.s_floor)
    return history


def format_loss_report(history: Sequence[TrainingStep], every: int = 1) -> str:
    lines = ["step,hard,soft,var_hard,var_soft,total"]
    for rec in history:
        if rec.step % every == 0 or rec is history[-1]:
            lines.append(f"{rec.step},{rec.hard:.10e},{rec.soft:.10e},"
                         f"{rec.var_hard:.10e},{rec.var_soft:.10e},{rec.total:.10e}")
    return "\n".join(lines) + "\n"


# --- fusion pipeline demo -------------------------------------------------

@dataclass
class FuseDemoConfig:
    tile: int = 448
    thumb: int = 448
    encoder_patch: int = 14
    encoder_dim: int = 64
    shuffle_factor: int = 2
    model_dim: int = 64
    num_heads: int = 8
    kernel: str = "identity"
    question_len: int = 8
    cot_len: int = 16
    vocab: int = 1000
    seed: int = 0
    query_source: str = "text"


@dataclass
class FuseDemoResult:
    num_patches: int
    grid: tuple
    visual_tokens: int
    question: TokenSeq
    prompt: TokenSeq
    fused: FusedSequence
    block_norms: dict = field(default_factory=dict)


def run_fuse_demo(img, cfg: FuseDemoConfig = FuseDemoConfig()) -> FuseDemoResult:
    """Image -> patches + thumbnail -> stand-in encoder -> pixel shuffle ->
    adapter -> fusion with the enriched prompt embeddings.

    The frozen vision encoder is replaced by a seeded linear patch
    embedding, the tokenizer by random token ids and the text encoder by a
    seeded embedding table. All randomness derives from ``cfg.seed``.
    """
    if cfg.question_len < 1:
        raise InvalidInputError("question_len must be >= 1")
    if cfg.cot_len < 0:
        raise InvalidInputError("cot_len must be >= 0")
    caf_cfg = CafConfig(cfg.model_dim, cfg.num_heads, cfg.kernel)
    patches = adaptive_encode(img, cfg.tile, cfg.thumb)

    encoder = PatchEmbedder(cfg.encoder_patch, cfg.encoder_dim, seed=cfg.seed + 1)
    r = cfg.shuffle_factor
    maps = [pixel_shuffle(encoder(p, multiple=r), r) for p in patches.patches]
    maps.append(pixel_shuffle(encoder(patches.global_image, multiple=r), r))
    visual_feats = np.concatenate([m.reshape(-1, m.shape[-1]) for m in maps], axis=0)

    adapter = init_adapter(visual_feats.shape[1], 4 * cfg.model_dim, cfg.model_dim,
                           seed=cfg.seed + 2)
    visual = mlp_adapter(visual_feats, adapter)

    rng = rng_from_seed(cfg.seed + 3)
    question = TokenSeq(tuple(int(i) for i in rng.integers(0, cfg.vocab, cfg.question_len)),
                        cfg.vocab)
    cot = None
    if cfg.cot_len:
        cot = TokenSeq(tuple(int(i) for i in rng.integers(0, cfg.vocab, cfg.cot_len)), cfg.vocab)
    prompt = build_enriched_prompt(question, cot)
    table = rng_from_seed(cfg.seed + 4).standard_normal((cfg.vocab, cfg.model_dim))
    text = table[np.asarray(prompt.ids)]

    fused = fuse(visual, text, caf_cfg, query_source=cfg.query_source)
    norms = {
        "visual_in": float(np.linalg.norm(visual)),
        "text": float(np.linalg.norm(fused.text)),
        "fused_visual": float(np.linalg.norm(fused.visual)),
    }
    return FuseDemoResult(len(patches), patches.grid, visual.shape[0], question, prompt,
                          fused, norms)


def format_fuse_report(res: FuseDemoResult) -> str:
    """Stub answer head: summary statistics of the fused sequence."""
    f = res.fused
    lines = [
        f"patches: {res.num_patches} (grid {res.grid[0]}x{res.grid[1]}) + 1 global",
        f"visual_tokens: {res.visual_tokens}",
        f"question_len: {len(res.question)}",
        f"prompt_len: {len(res.prompt)}",
        f"fused_length: {len(f)}",
        f"boundary: {f.boundary}",
        f"fused_visual_rows: {f.visual.shape[0]}",
        f"text_rows: {f.text.shape[0]}",
    ]
    lines += [f"norm_{k}: {v:.12e}" for k, v in res.block_norms.items()]
    lines.append(f"fused_checksum: {float(f.tokens.sum()):.12e}")
    return "\n".join(lines) + "\n"
