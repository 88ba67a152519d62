"""
Scoring token streams for language-model friendliness
=====================================================

A bigram count model stands in for a trained LM. Perplexity is rescaled
to a 1024-way vocabulary so tokenizers with different codebook sizes can
be compared.
"""

import math

import numpy as np

from duotok import lmeval, tokens
from duotok.simvq import Route

rng = np.random.default_rng(0)
K, T = 256, 2000


def markov(seed):
    # sticky random walk over the codebook
    r = np.random.default_rng(seed)
    x = np.empty(T, dtype=np.int64)
    x[0] = r.integers(K)
    for t in range(1, T):
        x[t] = x[t - 1] if r.random() < 0.6 else r.integers(K)
    return x


corpus = [
    tokens.align(tokens.TrackTokens(Route.VOCAL, K, 25.0, markov(2 * i)),
                 tokens.TrackTokens(Route.ACCOMP, K, 25.0, markov(2 * i + 1)), name=f"song{i}")
    for i in range(4)
]
lm = lmeval.train_count_lm(corpus[:3], alpha=0.1)
report = lmeval.evaluate(lm, corpus[3:])
print(report.to_csv())

# %%
# A uniform guesser always lands on 1024, whatever the vocabulary.
for S in (2, 1024, 32768):
    print(S, lmeval.ppl_at_1024(math.log(S), S))

# %%
# Per-track results combine through their mean cross-entropy.
hs = [lmeval.entropy_from_ppl(p, 32768) for p in (3.759, 6.0024)]
print("overall from 3.759 and 6.0024: %.3f" % lmeval.overall_ppl(hs, 32768))
