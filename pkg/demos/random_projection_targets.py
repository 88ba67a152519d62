"""
Masked-prediction targets from a frozen random quantizer
========================================================

Frames are projected by a fixed random matrix, normalised, and labelled
with the nearest row of a random unit codebook. A span mask picks the
positions the encoder would have to predict.
"""

import math

import numpy as np

from duotok import bestrq
from duotok.features import FeatureSequence

rng = np.random.default_rng(0)
x = FeatureSequence(rng.standard_normal((2000, 80)), 100.0)

rq = bestrq.init_random_quantizer(seed=1, d_in=80, d_proj=16, K=256)
targets = bestrq.assign_targets(x, rq)

# %%
# Random projections of isotropic input spread almost uniformly over the codebook.
p = np.bincount(targets, minlength=rq.K) / targets.size
p = p[p > 0]
print("target entropy %.2f nats (max %.2f)" % (-(p * np.log(p)).sum(), math.log(rq.K)))

# %%
# Targets depend on direction only: scaling a frame leaves its label alone.
print("scale invariant:", np.array_equal(targets, bestrq.assign_targets(FeatureSequence(5 * x.values, 100.0), rq)))

# %%
# Mask 40% of the frames in spans of four and score a uniform guesser.
plan = bestrq.sample_mask(len(x), ratio=0.4, span_len=4, seed=2)
uniform = np.full((len(x), rq.K), -math.log(rq.K))
print("masked fraction %.3f" % plan.masked_fraction)
print("uniform loss per masked frame %.3f" % bestrq.mlm_loss(uniform, targets, plan, reduction="mean"))
