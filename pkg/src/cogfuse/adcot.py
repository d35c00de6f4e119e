"""Teacher-assisted distillation: prompt enrichment, trace ingestion and the
uncertainty-weighted hard/soft loss with analytic gradients.

The combined objective over student logits ``Z`` (``L x V``) is::

    total = exp(-s_hard) * NLL(Z, y) + exp(-s_soft) * KL(p_teacher || softmax(Z)) + s_hard/2 + s_soft/2

with ``s = log sigma^2`` so that ``log sigma = s / 2``. The KL sum runs over
the first ``min(L, L')`` positions only.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .numeric import CogfuseError, InvalidInputError, ShapeError, log_softmax

__all__ = [
    "TraceParseError",
    "TokenSeq",
    "TeacherTrace",
    "UncertaintyParams",
    "LossBreakdown",
    "build_enriched_prompt",
    "nll_term",
    "kl_term",
    "mtl_loss",
    "adcot_loss",
    "parse_teacher_trace",
    "parse_label",
    "load_traces",
    "load_labels",
    "DIST_TOL",
]

DIST_TOL = 1e-6


class TraceParseError(CogfuseError, ValueError):
    """Malformed JSON Lines record.

    ``offset`` is the byte offset inside the line, ``lineno`` the 1-based
    line number when the record came from a file.
    """

    def __init__(self, message: str, offset: int | None = None, lineno: int | None = None):
        where = []
        if lineno is not None:
            where.append(f"line {lineno}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))
        self.offset = offset
        self.lineno = lineno


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple
    vocab_size: int

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        object.__setattr__(self, "ids", ids)
        if self.vocab_size < 1:
            raise InvalidInputError(f"vocab_size must be >= 1, got {self.vocab_size}")
        if len(ids) < 1:
            raise InvalidInputError("token sequence must be non-empty")
        bad = [i for i in ids if not 0 <= i < self.vocab_size]
        if bad:
            raise InvalidInputError(f"token ids {bad[:5]} outside [0, {self.vocab_size})")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class TeacherTrace:
    """Reasoning text plus per-position teacher distributions (``L' x V``)."""

    reasoning_text: str
    answer_dists: np.ndarray
    answer_ids: tuple | None = None

    def __post_init__(self):
        d = np.asarray(self.answer_dists, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise InvalidInputError(f"answer_dists must be a non-empty L' x V matrix, got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InvalidInputError("teacher probabilities must be finite and non-negative")
        sums = d.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > DIST_TOL):
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise InvalidInputError(
                f"teacher distribution at position {worst} sums to {sums[worst]!r}"
            )
        object.__setattr__(self, "answer_dists", d)
        if self.answer_ids is not None:
            object.__setattr__(self, "answer_ids", tuple(int(i) for i in self.answer_ids))

    @property
    def length(self) -> int:
        return self.answer_dists.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.answer_dists.shape[1]


@dataclass(frozen=True)
class UncertaintyParams:
    s_hard: float = 0.0  # log sigma_hard^2
    s_soft: float = 0.0  # log sigma_soft^2

    def __post_init__(self):
        if not (math.isfinite(self.s_hard) and math.isfinite(self.s_soft)):
            raise InvalidInputError("uncertainty parameters must be finite")

    @property
    def var_hard(self) -> float:
        return math.exp(self.s_hard)

    @property
    def var_soft(self) -> float:
        return math.exp(self.s_soft)


@dataclass
class LossBreakdown:
    hard_term: float
    soft_term: float
    reg_term: float
    total: float
    grad_s_hard: float
    grad_s_soft: float
    grad_logits: np.ndarray | None = field(default=None, repr=False)


def build_enriched_prompt(question: TokenSeq, cot: TokenSeq | None) -> TokenSeq:
    """Question ids followed by chain-of-thought ids. ``cot=None`` leaves the question as is."""
    if cot is None:
        return question
    if question.vocab_size != cot.vocab_size:
        raise InvalidInputError(
            f"vocabulary mismatch: question {question.vocab_size}, cot {cot.vocab_size}"
        )
    return TokenSeq(question.ids + cot.ids, question.vocab_size)


def _check_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ShapeError(f"logits must be a non-empty L x V matrix, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain non-finite values")
    return z


def nll_term(logits, targets: TokenSeq) -> tuple[float, np.ndarray]:
    """Summed negative log-likelihood of ``targets`` and its gradient w.r.t. logits."""
    z = _check_logits(logits)
    ids = np.asarray(targets.ids)
    if z.shape[0] != len(ids):
        raise ShapeError(f"{z.shape[0]} logit rows for {len(ids)} targets")
    if targets.vocab_size != z.shape[1]:
        raise InvalidInputError(
            f"target vocabulary {targets.vocab_size} != logit width {z.shape[1]}"
        )
    logp = log_softmax(z)
    rows = np.arange(len(ids))
    value = -float(logp[rows, ids].sum())
    grad = np.exp(logp)
    grad[rows, ids] -= 1.0
    return max(value, 0.0), grad


def kl_term(teacher: TeacherTrace, logits) -> tuple[float, np.ndarray]:
    """``sum_{l < min(L, L')} KL(p_teacher_l || softmax(logits_l))`` and its gradient.

    Positions are front-aligned. Rows past the cut get a zero gradient.
    Teacher zeros contribute nothing (``0 log 0 = 0``).
    """
    z = _check_logits(logits)
    if z.shape[1] != teacher.vocab_size:
        raise ShapeError(f"logit width {z.shape[1]} != teacher vocabulary {teacher.vocab_size}")
    n = min(z.shape[0], teacher.length)
    p = teacher.answer_dists[:n]
    logq = log_softmax(z[:n])
    pos = p > 0
    log_p = np.zeros_like(p)
    log_p[pos] = np.log(p[pos])
    value = float(np.sum(np.where(pos, p * (log_p - logq), 0.0)))
    grad = np.zeros_like(z)
    # d/dz of -sum_v p_v log q_v is q * sum_v p_v - p; sum_v p_v == 1 up to DIST_TOL
    grad[:n] = np.exp(logq) * p.sum(axis=1, keepdims=True) - p
    return max(value, 0.0), grad


def mtl_loss(hard: float, soft: float, u: UncertaintyParams,
             grad_hard=None, grad_soft=None) -> LossBreakdown:
    """Combine the two task losses with learned log-variances.

    If the per-logit gradients of the two terms are supplied they are
    chained into ``grad_logits``.
    """
    if not (math.isfinite(hard) and math.isfinite(soft)):
        raise InvalidInputError("loss terms must be finite")
    if hard < 0 or soft < 0:
        raise InvalidInputError(f"loss terms must be non-negative, got hard={hard}, soft={soft}")
    w_hard = math.exp(-u.s_hard)
    w_soft = math.exp(-u.s_soft)
    reg = 0.5 * u.s_hard + 0.5 * u.s_soft
    total = w_hard * hard + w_soft * soft + reg
    grad_logits = None
    if grad_hard is not None or grad_soft is not None:
        parts = []
        if grad_hard is not None:
            parts.append(w_hard * np.asarray(grad_hard, dtype=np.float64))
        if grad_soft is not None:
            parts.append(w_soft * np.asarray(grad_soft, dtype=np.float64))
        grad_logits = sum(parts[1:], parts[0])
    return LossBreakdown(
        hard_term=hard,
        soft_term=soft,
        reg_term=reg,
        total=total,
        grad_s_hard=-hard * w_hard + 0.5,
        grad_s_soft=-soft * w_soft + 0.5,
        grad_logits=grad_logits,
    )


def adcot_loss(logits, targets: TokenSeq, teacher: TeacherTrace,
               u: UncertaintyParams) -> LossBreakdown:
    """Full objective for one sample: hard NLL + truncated KL + regulariser."""
    hard, g_hard = nll_term(logits, targets)
    soft, g_soft = kl_term(teacher, logits)
    return mtl_loss(hard, soft, u, g_hard, g_soft)


# --- JSON Lines ingestion -------------------------------------------------

def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _load_json_object(line, lineno: int | None) -> dict:
    if isinstance(line, (bytes, bytearray)):
        try:
            text = bytes(line).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceParseError(f"invalid UTF-8: {exc.reason}", exc.start, lineno) from None
    else:
        text = line
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"malformed JSON: {exc.msg}", _byte_offset(text, exc.pos),
                              lineno) from None
    if not isinstance(obj, dict):
        raise TraceParseError("record must be a JSON object", 0, lineno)
    return obj


def _require_int(obj: dict, key: str, lineno: int | None) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise TraceParseError(f"field {key!r} must be an integer", None, lineno)
    return v


def parse_teacher_trace(line, renormalize: bool = False,
                        lineno: int | None = None) -> TeacherTrace:
    """Parse one trace record.

    ``dists`` holds one sparse ``[[token_id, prob], ...]`` list per answer
    position. Missing tokens get probability 0. A position whose mass is
    off by more than 1e-6 is rejected unless ``renormalize`` is set.
    """
    obj = _load_json_object(line, lineno)
    vocab = _require_int(obj, "vocab", lineno)
    if vocab < 1:
        raise InvalidInputError(f"vocab must be >= 1, got {vocab}")
    reasoning = obj.get("reasoning", "")
    if not isinstance(reasoning, str):
        raise TraceParseError("field 'reasoning' must be a string", None, lineno)
    dists = obj.get("dists")
    if not isinstance(dists, list) or not dists:
        raise TraceParseError("field 'dists' must be a non-empty list", None, lineno)

    dense = np.zeros((len(dists), vocab))
    for pos, entries in enumerate(dists):
        if not isinstance(entries, list) or not entries:
            raise TraceParseError(f"dists[{pos}] must be a non-empty list of [id, prob]",
                                  None, lineno)
        for pair in entries:
            if (not isinstance(pair, list) or len(pair) != 2
                    or isinstance(pair[0], bool) or not isinstance(pair[0], int)
                    or isinstance(pair[1], bool) or not isinstance(pair[1], (int, float))):
                raise TraceParseError(f"dists[{pos}] entry {pair!r} is not [int, number]",
                                      None, lineno)
            tok, prob = pair
            if not 0 <= tok < vocab:
                raise InvalidInputError(f"dists[{pos}]: token id {tok} outside [0, {vocab})")
            if not math.isfinite(prob) or prob < 0:
                raise InvalidInputError(f"dists[{pos}]: invalid probability {prob!r} for token {tok}")
            if dense[pos, tok] != 0:
                raise InvalidInputError(f"dists[{pos}]: token id {tok} listed twice")
            dense[pos, tok] = prob
        mass = dense[pos].sum()
        if abs(mass - 1.0) > DIST_TOL:
            if not renormalize or mass <= 0:
                raise InvalidInputError(f"dists[{pos}] has total mass {mass!r}, expected 1")
            dense[pos] /= mass

    answer_ids = obj.get("answer_ids")
    if answer_ids is not None:
        if not isinstance(answer_ids, list) or not all(
                isinstance(i, int) and not isinstance(i, bool) for i in answer_ids):
            raise TraceParseError("field 'answer_ids' must be a list of integers", None, lineno)
        answer_ids = tuple(answer_ids)
    return TeacherTrace(reasoning, dense, answer_ids)


def parse_label(line, lineno: int | None = None) -> TokenSeq:
    obj = _load_json_object(line, lineno)
    vocab = _require_int(obj, "vocab", lineno)
    ids = obj.get("ids")
    if not isinstance(ids, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in ids):
        raise TraceParseError("field 'ids' must be a list of integers", None, lineno)
    return TokenSeq(tuple(ids), vocab)


def _iter_lines(path) -> Iterator[tuple[int, bytes]]:
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.rstrip(b"\r\n")
            if raw.strip():
                yield lineno, raw


def load_traces(path: str | os.PathLike, renormalize: bool = False) -> list[TeacherTrace]:
    out = []
    for lineno, raw in _iter_lines(path):
        try:
            out.append(parse_teacher_trace(raw, renormalize=renormalize, lineno=lineno))
        except InvalidInputError as exc:
            raise TraceParseError(str(exc), None, lineno) from None
    return out


def load_labels(path: str | os.PathLike) -> list[TokenSeq]:
    out = []
    for lineno, raw in _iter_lines(path):
        try:
            out.append(parse_label(raw, lineno=lineno))
        except InvalidInputError as exc:
            raise TraceParseError(str(exc), None, lineno) from None
    return out
