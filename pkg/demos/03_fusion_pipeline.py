"""
From pixels to a fused token sequence
=====================================

A synthetic 896x896 image is cut into 448-pixel tiles plus a thumbnail.
Each view is embedded by a seeded stand-in encoder, then pixel-shuffled
(2x2 neighbours stacked into channels) and mapped to the model width by a
two-layer adapter. The prompt is question + reasoning tokens. Text queries
the visual tokens, and the fused block is placed in front of the text.
"""

import numpy as np

from cogfuse.pipeline import FuseDemoConfig, format_fuse_report, run_fuse_demo
from cogfuse.vision import adaptive_encode, pixel_shuffle, pixel_unshuffle, synthetic_image

img = synthetic_image(896, 896, seed=0)
views = adaptive_encode(img, tile=448)
print("tiles:", len(views), "grid:", views.grid, "thumbnail:", views.global_image.shape)

# pixel shuffle only rearranges values, so it can be undone exactly
feat = np.arange(4 * 6 * 3, dtype=float).reshape(4, 6, 3)
packed = pixel_shuffle(feat, 2)
print("shuffle", feat.shape, "->", packed.shape,
      "round trip exact:", np.array_equal(pixel_unshuffle(packed, 2), feat))

res = run_fuse_demo(img, FuseDemoConfig(question_len=8, cot_len=16))
print(format_fuse_report(res))

# the text half of the fused sequence is the prompt embedding, untouched
print("fused rows:", len(res.fused), "boundary:", res.fused.boundary)
