"""Randomised property suites behind ``cogfuse verify``.

Every property returns a :class:`PropertyResult` holding the worst value
observed and the bound it was compared against. Suites draw from their
own generator (seeded from the run seed and the suite index), so results
do not depend on the order or thread in which suites run.

Sabotage modes swap in deliberately broken implementations; they exist
to prove that the suites can fail.
"""
from __future__ import annotations

import inspect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import adcot, caf
from .gradcheck import check_grads, finite_diff_grad
from .numeric import ConfigError, KernelKind, apply_kernel, max_rel_dev, rng_from_seed
from .vision import pixel_shuffle, pixel_unshuffle

__all__ = ["PropertyResult", "SABOTAGE_MODES", "run_verify", "format_report"]

KERNELS = tuple(KernelKind)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    metric: str
    worst: float
    bound: float
    comparison: str  # "<=" or ">"
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {self.metric}={self.worst:.6e} {self.comparison} {self.bound:.0e} {status}"


def _le(name, metric, worst, bound):
    worst = float(worst)
    return PropertyResult(name, metric, worst, bound, "<=", bool(worst <= bound))


def _gt(name, metric, worst, bound):
    worst = float(worst)
    return PropertyResult(name, metric, worst, bound, ">", bool(worst > bound))


# --- sabotage -------------------------------------------------------------

def _weights_without_inv_n(q, K, kernel=KernelKind.IDENTITY):
    scores = apply_kernel(np.asarray(K, float), kernel) @ apply_kernel(np.asarray(q, float), kernel)
    return scores - scores.mean()


def _linear_without_mean(Q, K, V, kernel=KernelKind.IDENTITY):
    phi_q, phi_k = apply_kernel(Q, kernel), apply_kernel(K, kernel)
    return phi_q @ (phi_k.T @ V) + np.mean(V, axis=0)


def _kl_grad_flipped(teacher, logits):
    value, grad = adcot.kl_term(teacher, logits)
    return value, -grad


@dataclass(frozen=True)
class Impl:
    weights: Callable = caf.attention_weights
    linear: Callable = caf.caf_linear
    kl: Callable = adcot.kl_term


SABOTAGE_MODES = {
    "none": Impl(),
    "drop-inv-n": Impl(weights=_weights_without_inv_n),
    "drop-mean": Impl(linear=_linear_without_mean),
    "flip-kl-grad": Impl(kl=_kl_grad_flipped),
}


# --- attention properties -------------------------------------------------

def _random_qk(rng, max_n=256, max_d=64):
    n = int(rng.integers(1, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    return rng.standard_normal(d), rng.standard_normal((n, d))


def prop_normalization(rng, impl: Impl, trials=10_000, kernels=KERNELS):
    worst = 0.0
    for t in range(trials):
        q, K = _random_qk(rng)
        w = impl.weights(q, K, kernels[t % len(kernels)])
        worst = max(worst, abs(float(np.sum(w)) - 1.0))
    return _le("normalization", "max_abs_sum_err", worst, 1e-9)


def prop_linear_vs_reference(rng, impl: Impl, trials=1000, kernels=KERNELS):
    worst = 0.0
    for t in range(trials):
        nk = int(rng.integers(1, 257))
        nq = int(rng.integers(1, 33))
        d = int(rng.integers(1, 65))
        dv = int(rng.integers(1, 65))
        Q = rng.standard_normal((nq, d))
        K = rng.standard_normal((nk, d))
        V = rng.standard_normal((nk, dv))
        kernel = kernels[t % len(kernels)]
        worst = max(worst, max_rel_dev(impl.linear(Q, K, V, kernel), caf.caf_reference(Q, K, V, kernel)))
    return _le("linear_vs_reference", "max_rel_err", worst, 1e-8)


def prop_single_key(rng, impl: Impl, trials=200):
    worst = 0.0
    for t in range(trials):
        q, K = _random_qk(rng, max_n=1)
        w = impl.weights(q, K, KERNELS[t % 3])
        worst = max(worst, float(np.max(np.abs(w - 1.0))))
    return _le("single_key_weight_is_one", "max_abs_err", worst, 0.0)


def prop_identical_keys(rng, impl: Impl, trials=200):
    worst = 0.0
    for t in range(trials):
        n, d, dv = (int(rng.integers(1, 129)), int(rng.integers(1, 33)), int(rng.integers(1, 33)))
        K = np.repeat(rng.standard_normal((1, d)), n, axis=0)
        V = rng.standard_normal((n, dv))
        Q = rng.standard_normal((int(rng.integers(1, 9)), d))
        out = impl.linear(Q, K, V, KERNELS[t % 3])
        worst = max(worst, float(np.max(np.abs(out - V.mean(axis=0)))))
    return _le("identical_keys_collapse", "max_abs_err", worst, 1e-10)


def prop_shift_invariance(rng, impl: Impl, trials=200):
    # Appending coordinate c to q and 1 to every key adds c to every score.
    worst = 0.0
    for _ in range(trials):
        q, K = _random_qk(rng, max_n=128, max_d=32)
        c = float(rng.uniform(-10, 10))
        w0 = impl.weights(q, K)
        w1 = impl.weights(np.append(q, c), np.hstack([K, np.ones((K.shape[0], 1))]))
        worst = max(worst, float(np.max(np.abs(w1 - w0))))
    return _le("score_shift_invariance", "max_abs_err", worst, 1e-9)


def prop_injectivity(rng, impl: Impl, trials=200):
    smallest = math.inf
    for _ in range(trials):
        d = int(rng.integers(1, 33))
        n = int(rng.integers(d + 1, d + 65))
        K = rng.standard_normal((n, d))
        qa, qb = rng.standard_normal(d), rng.standard_normal(d)
        diff = float(np.max(np.abs(impl.weights(qa, K) - impl.weights(qb, K))))
        smallest = min(smallest, diff)
    return _gt("generic_injectivity", "min_max_weight_gap", smallest, 1e-12)


def prop_multi_head(rng, impl: Impl, trials=50, cfg: caf.CafConfig | None = None):
    worst_h1 = 0.0
    worst_ref = 0.0
    for t in range(trials):
        cfg1 = caf.CafConfig(int(rng.integers(1, 33)), 1, KERNELS[t % 3])
        nk = int(rng.integers(1, 65))
        Q = rng.standard_normal((int(rng.integers(1, 17)), cfg1.model_dim))
        K = rng.standard_normal((nk, cfg1.model_dim))
        V = rng.standard_normal((nk, cfg1.model_dim))
        a = caf.multi_head(impl.linear, Q, K, V, cfg1)
        b = impl.linear(Q, K, V, cfg1.kernel)
        worst_h1 = max(worst_h1, 0.0 if np.array_equal(a, b) else math.inf)

        base = cfg or caf.CafConfig(64, 8)
        cfgh = caf.CafConfig(base.model_dim, base.num_heads, KERNELS[t % 3])
        hd = cfgh.head_dim
        Q = rng.standard_normal((int(rng.integers(1, 17)), cfgh.model_dim))
        K = rng.standard_normal((int(rng.integers(1, 129)), cfgh.model_dim))
        V = rng.standard_normal(K.shape)
        ref = np.hstack([caf.caf_reference(Q[:, s], K[:, s], V[:, s], cfgh.kernel)
                         for s in (slice(h * hd, (h + 1) * hd) for h in range(cfgh.num_heads))])
        worst_ref = max(worst_ref, max_rel_dev(caf.multi_head(impl.linear, Q, K, V, cfgh), ref))
    return [
        _le("multi_head_h1_bitwise", "mismatch", worst_h1, 0.0),
        _le("multi_head_vs_reference", "max_rel_err", worst_ref, 1e-8),
    ]


# --- loss properties ------------------------------------------------------

def random_loss_instance(rng, max_len=6, max_vocab=10):
    L = int(rng.integers(1, max_len + 1))
    Lp = int(rng.integers(1, max_len + 1))
    V = int(rng.integers(2, max_vocab + 1))
    logits = rng.normal(0.0, 2.0, (L, V))
    targets = adcot.TokenSeq(tuple(int(i) for i in rng.integers(0, V, L)), V)
    p = rng.dirichlet(np.full(V, 0.7), Lp)
    p[rng.random((Lp, V)) < 0.2] = 0.0
    p[np.arange(Lp), rng.integers(0, V, Lp)] += 0.1
    p /= p.sum(axis=1, keepdims=True)
    teacher = adcot.TeacherTrace("", p)
    u = adcot.UncertaintyParams(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)))
    return logits, targets, teacher, u


def _total_loss(impl: Impl, logits, targets, teacher, u):
    hard, g_hard = adcot.nll_term(logits, targets)
    soft, g_soft = impl.kl(teacher, logits)
    return adcot.mtl_loss(hard, soft, u, g_hard, g_soft)


def prop_gradients(rng, impl: Impl, trials=200, h=1e-5, tol_rel=1e-4, tol_abs=1e-7):
    # A coordinate passes if it is within tol_rel relatively or within tol_abs absolutely;
    # the reported ratio min(rel/tol_rel, abs/tol_abs) must stay <= 1 everywhere.
    worst_ratio = 0.0
    for _ in range(trials):
        logits, targets, teacher, u = random_loss_instance(rng)
        br = _total_loss(impl, logits, targets, teacher, u)
        analytic = np.concatenate([br.grad_logits.ravel(), [br.grad_s_hard, br.grad_s_soft]])
        shape = logits.shape

        def f(x):
            z = x[:-2].reshape(shape)
            return _total_loss(impl, z, targets, teacher,
                               adcot.UncertaintyParams(x[-2], x[-1])).total

        x0 = np.concatenate([logits.ravel(), [u.s_hard, u.s_soft]])
        numeric = finite_diff_grad(f, x0, h)
        abs_err = np.abs(analytic - numeric)
        rel_err = abs_err / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
        ratio = np.minimum(rel_err / tol_rel, abs_err / tol_abs)
        worst_ratio = max(worst_ratio, float(ratio.max()))
        if not check_grads(analytic, numeric, tol_rel, tol_abs).passed:
            worst_ratio = max(worst_ratio, math.inf)
    return _le("loss_gradients", "max_err_to_tol_ratio", worst_ratio, 1.0)


def prop_kl(rng, impl: Impl, trials=200):
    most_negative = 0.0
    worst_zero = 0.0
    worst_trunc = 0.0
    for _ in range(trials):
        logits, _, teacher, _ = random_loss_instance(rng)
        value, _ = impl.kl(teacher, logits)
        most_negative = max(most_negative, -value)

        # student logits = log teacher probabilities (zeros pushed far down)
        matched = np.log(np.maximum(teacher.answer_dists, 1e-300))
        value0, grad0 = impl.kl(teacher, matched)
        worst_zero = max(worst_zero, abs(value0), float(np.max(np.abs(grad0))))

        n = min(logits.shape[0], teacher.length)
        if n < logits.shape[0]:
            bumped = logits.copy()
            bumped[n:] += rng.normal(0, 5, bumped[n:].shape)
            v1, g1 = impl.kl(teacher, logits)
            v2, g2 = impl.kl(teacher, bumped)
            change = max(abs(v2 - v1), float(np.max(np.abs(g2 - g1))),
                         float(np.max(np.abs(g2[n:]))))
            worst_trunc = max(worst_trunc, change)
    return [
        _le("kl_nonnegative", "max_negative_value", most_negative, 0.0),
        _le("kl_zero_at_teacher", "max_abs_value_or_grad", worst_zero, 1e-12),
        _le("kl_truncation", "max_change_beyond_cut", worst_trunc, 0.0),
    ]


def prop_uncertainty(rng, impl: Impl, trials=50):
    worst_stat = 0.0
    sign_errors = 0
    for _ in range(trials):
        T = float(rng.uniform(1e-3, 50.0))
        s_star = math.log(2.0 * T)
        at = adcot.mtl_loss(T, T, adcot.UncertaintyParams(s_star, s_star))
        worst_stat = max(worst_stat, abs(at.grad_s_hard), abs(at.grad_s_soft))
        below = adcot.mtl_loss(T, 0.0, adcot.UncertaintyParams(s_star - 0.5, 0.0))
        above = adcot.mtl_loss(T, 0.0, adcot.UncertaintyParams(s_star + 0.5, 0.0))
        # T > e^s / 2 below the stationary point -> decreasing; above it -> increasing
        sign_errors += int(not below.grad_s_hard < 0) + int(not above.grad_s_hard > 0)
    return [
        _le("uncertainty_stationary_point", "max_abs_grad", worst_stat, 1e-10),
        _le("uncertainty_monotonicity", "sign_errors", sign_errors, 0.0),
    ]


def prop_pixel_shuffle(rng, impl: Impl, trials=100):
    mismatches = 0
    for _ in range(trials):
        r = int(rng.integers(1, 5))
        h, w = r * int(rng.integers(1, 9)), r * int(rng.integers(1, 9))
        c = int(rng.integers(1, 5))
        x = rng.standard_normal((h, w, c))
        y = pixel_shuffle(x, r)
        ok = y.shape == (h // r, w // r, c * r * r) and np.array_equal(pixel_unshuffle(y, r), x)
        mismatches += int(not ok)
    return _le("pixel_shuffle_roundtrip", "mismatches", mismatches, 0.0)


SUITES = (
    prop_normalization,
    prop_linear_vs_reference,
    prop_single_key,
    prop_identical_keys,
    prop_shift_invariance,
    prop_injectivity,
    prop_multi_head,
    prop_gradients,
    prop_kl,
    prop_uncertainty,
    prop_pixel_shuffle,
)


def run_verify(seed: int = 0, kernel: KernelKind | str | None = None, sabotage: str = "none",
               threads: int = 1, scale: float = 1.0, dim: int = 64,
               heads: int = 8) -> list[PropertyResult]:
    """Run every property suite and return results in a fixed order.

    ``kernel`` restricts the attention suites to one feature map (default:
    cycle through all). ``scale`` multiplies trial counts and exists for
    quick smoke runs.
    """
    if sabotage not in SABOTAGE_MODES:
        raise ConfigError(f"unknown sabotage mode {sabotage!r}; expected one of "
                          f"{', '.join(SABOTAGE_MODES)}")
    impl = SABOTAGE_MODES[sabotage]
    cfg = caf.CafConfig(dim, heads)
    kernels = KERNELS if kernel is None else (KernelKind.parse(kernel),)

    def run(idx_fn):
        idx, fn = idx_fn
        rng = rng_from_seed((seed * 1_000_003 + idx) % 2**64)
        params = inspect.signature(fn).parameters
        kwargs = {}
        if scale != 1.0:
            kwargs["trials"] = max(1, int(round(params["trials"].default * scale)))
        if "kernels" in params:
            kwargs["kernels"] = kernels
        if "cfg" in params:
            kwargs["cfg"] = cfg
        out = fn(rng, impl, **kwargs)
        return out if isinstance(out, list) else [out]

    jobs = list(enumerate(SUITES))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


def format_report(results: list[PropertyResult], header: str = "") -> str:
    lines = [header] if header else []
    lines += [r.line() for r in results]
    failed = [r.name for r in results if not r.passed]
    lines.append(f"summary: {len(results) - len(failed)}/{len(results)} passed"
                 + (f"; failed: {', '.join(failed)}" if failed else ""))
    return "\n".join(lines) + "\n"
