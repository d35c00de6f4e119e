"""
Balancing hard labels and teacher distributions
===============================================

The student is trained on two objectives at once: the negative
log-likelihood of the reference answer, and the KL divergence from a
teacher distribution. Each term is scaled by a learned ``exp(-s)`` and
penalised by ``s / 2``, so the optimum has ``exp(s) = 2 * term``. A noisier
task therefore ends up with a larger variance and a smaller effective weight.
"""

import math

from cogfuse.adcot import UncertaintyParams, load_labels, load_traces, mtl_loss
from cogfuse.fixtures import fixture_path
from cogfuse.pipeline import LossDemoConfig, run_loss_demo

# the balance point for a single term
T = 1.5
for s in (math.log(2 * T) - 1, math.log(2 * T), math.log(2 * T) + 1):
    br = mtl_loss(T, 0.0, UncertaintyParams(s, 0.0))
    print(f"s={s:+.3f}  total={br.total:.5f}  d/ds={br.grad_s_hard:+.2e}")

for name in ("consistent", "conflicting"):
    traces = load_traces(fixture_path(name, "traces"))
    labels = load_labels(fixture_path(name, "labels"))
    hist = run_loss_demo(traces, labels, LossDemoConfig(steps=500))
    a, b = hist[0], hist[-1]
    print(f"\n{name}: total {a.total:.4f} -> {b.total:.4f} ({b.total / a.total:.1%})")
    print(f"  hard {a.hard:.4f} -> {b.hard:.4f}, soft {a.soft:.4f} -> {b.soft:.4f}")
    print(f"  final variances: hard {b.var_hard:.3f}, soft {b.var_soft:.3f}")
