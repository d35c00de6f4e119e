"""
Checking gradients and regenerating the bundled data
====================================================

Central differences give an independent estimate of every partial
derivative. Here they are compared with the analytic gradient of the
combined loss with respect to the logits and both log-variances. The
second half rewrites the seeded fixture files to a scratch directory.
"""

import tempfile
from pathlib import Path

import numpy as np

from cogfuse import adcot
from cogfuse.fixtures import write_fixtures
from cogfuse.gradcheck import check_grads, finite_diff_grad
from cogfuse.verify import random_loss_instance

rng = np.random.default_rng(1)
logits, targets, teacher, u = random_loss_instance(rng)
br = adcot.adcot_loss(logits, targets, teacher, u)
analytic = np.concatenate([br.grad_logits.ravel(), [br.grad_s_hard, br.grad_s_soft]])


def total(x):
    z = x[:-2].reshape(logits.shape)
    return adcot.adcot_loss(z, targets, teacher, adcot.UncertaintyParams(x[-2], x[-1])).total


numeric = finite_diff_grad(total, np.concatenate([logits.ravel(), [u.s_hard, u.s_soft]]))
print(check_grads(analytic, numeric))

# flipping the sign of one block is caught immediately
broken = analytic.copy()
broken[:-2] *= -1
print(check_grads(broken, numeric))

out = Path(tempfile.mkdtemp())
write_fixtures(out)
for p in sorted(out.iterdir()):
    print(p.name, len(p.read_text().splitlines()), "lines")
