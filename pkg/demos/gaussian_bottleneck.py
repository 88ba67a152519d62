"""
Gaussian replacement on encoder outputs
=======================================

During training a random fifth of the frames is swapped for pure noise,
which pushes downstream heads to rely on context. At evaluation the
bottleneck is a no-op.
"""

import numpy as np

from duotok import bottleneck

rng = np.random.default_rng(0)
enc = bottleneck.init_toy_encoder(seed=3, d_in=64, d_out=16)
h = bottleneck.toy_encode(rng.standard_normal((5000, 64)), enc)

cfg = bottleneck.ReplacementConfig(p=0.2, sigma=1.0, seed=11)
h_train, mask = bottleneck.gaussian_replace(h, cfg)
print("replaced fraction %.4f" % bottleneck.replacement_fraction(mask))
print("variance of replaced frames %.3f" % h_train.values[mask].var())
print("kept frames untouched:", np.array_equal(h_train.values[~mask], h.values[~mask]))

h_eval, m_eval = bottleneck.gaussian_replace(h, cfg, training=False)
print("eval mode identity:", h_eval is h and not m_eval.any())
