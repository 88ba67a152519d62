"""
A tour of the objective library
===============================

CTC against explicit path enumeration, SI-SNR, and the diffusion
noising / recovery pair, then the weighted stage totals.
"""

import numpy as np

from duotok import losses

rng = np.random.default_rng(0)

# %%
# CTC: three frames, two labels plus blank, target "a a".
x = rng.standard_normal((3, 3))
lp = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
print("forward %.6f  enumeration %.6f" % (losses.ctc_loss(lp, [0, 0]), losses.ctc_brute_force(lp, [0, 0])))

# %%
# SI-SNR ignores gain but not offset.
y = rng.standard_normal(1000)
est = y + 0.3 * rng.standard_normal(1000)
print("SI-SNR %.2f dB, x5 %.2f dB, +0.5 offset %.2f dB"
      % (losses.si_snr(est, y), losses.si_snr(5 * est, y), losses.si_snr(est + 0.5, y)))

# %%
# Noising and exact recovery from a velocity prediction.
sch = losses.cosine_schedule(1000)
eps = rng.standard_normal(1000)
for t in (1, 500, 999):
    z = losses.noise_latent(y, eps, t, sch)
    y_hat = losses.denoised_estimate(z, losses.v_target(y, eps, t, sch), t, sch)
    gain = -losses.si_improvement_loss(y_hat, z, y)
    print(f"t={t:4d} recovery error {np.abs(y_hat - y).max():.1e}, SI-SNR gain {gain:.1f} dB")

# %%
# Weighted totals with the default weights.
w = losses.StageWeights()
print("stage 2 on unit components:", losses.stage2_objective(1, 1, 1, 1, 1, 1, w))
print("stage 3 on unit components:", losses.stage3_objective(1, 1, 1, 1, 1, w))
