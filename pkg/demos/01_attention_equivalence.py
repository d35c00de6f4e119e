"""
Centred cross-attention: two ways to compute the same thing
============================================================

Every query spreads weight over the keys as ``score - mean(score) + 1/N``.
The weights can be negative but always add up to one. Because the weights
are affine in the scores, the output can also be computed from three small
key-side sums, without ever forming the ``N_q x N_k`` matrix.
"""

import numpy as np

from cogfuse import attention_weights, caf_linear, caf_reference
from cogfuse.numeric import max_rel_dev

rng = np.random.default_rng(0)

# one query against six keys
q = rng.standard_normal(4)
K = rng.standard_normal((6, 4))
w = attention_weights(q, K)
print("weights:", np.round(w, 3))
print("sum of weights:", w.sum())
print("negative entries:", int((w < 0).sum()))

# with a single key the weight is exactly one
print("single key:", attention_weights(q, K[:1]))

# the quadratic and linear forms agree to round-off for every feature map
Q = rng.standard_normal((16, 32))
K = rng.standard_normal((128, 32))
V = rng.standard_normal((128, 32))
for kernel in ("identity", "relu", "elu1"):
    dev = max_rel_dev(caf_linear(Q, K, V, kernel), caf_reference(Q, K, V, kernel))
    print(f"{kernel:8s} max relative deviation {dev:.2e}")

# identical keys carry no information: every query gets the value mean
K_same = np.tile(K[:1], (128, 1))
print("identical keys -> value mean:",
      np.allclose(caf_linear(Q, K_same, V), V.mean(axis=0), atol=1e-10))
