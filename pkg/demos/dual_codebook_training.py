"""
Training the dual SimVQ bases
=============================

Each route keeps a frozen random codebook ``C`` and learns only the
linear map ``W``. Vocal frames never touch the accompaniment parameters.
"""

import itertools

import numpy as np

from duotok import simvq, synth
from duotok.simvq import DualCodebookBank, Route

bank = DualCodebookBank.create(K=64, d=2, seed=0)
vocal = synth.clustered_features(1)
accomp = synth.clustered_features(2, radius=1.5)

# %%
# Warm up for one step, then hold the learning rate on a long cosine.
sch = simvq.ScheduleConfig(peak_lr=0.01, warmup_steps=1, cycle_steps=1000)
batches = itertools.cycle([(vocal, Route.VOCAL), (accomp, Route.ACCOMP)])
log = simvq.train_w(batches, bank, beta=0.25, sch=sch, steps=400)

for r in log[:2] + log[-2:]:
    print(f"step {r.step:3d} {r.route.label:6s} lr {r.lr:.4f} loss {r.vq_loss:.4f} "
          f"util {r.utilization:.3f} entropy {r.entropy:.2f}")

# %%
# A vocal-only stream leaves the accompaniment basis bit-identical.
solo = DualCodebookBank.create(K=64, d=2, seed=0)
before = solo.accomp.W.tobytes()
simvq.train_w(itertools.repeat((vocal, Route.VOCAL)), solo, 0.25, sch, 50)
print("accomp W untouched:", solo.accomp.W.tobytes() == before)

# %%
# Quantize a fresh vocal clip with the trained bank.
res = simvq.quantize(synth.clustered_features(9, 100), bank, Route.VOCAL)
print("codes used:", sorted(set(res.indices.tolist())))
print("learned vocal basis:\n", np.round(bank.vocal.W, 3))
