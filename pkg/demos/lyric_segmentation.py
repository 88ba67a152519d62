"""
Cutting a song into lyric-aligned clips
=======================================

Whole lyric lines are packed into clips between 5 and 30 seconds. Lines
too long to fit are reported rather than cut.
"""

from duotok.data import STAGE2_MIX, STAGE3_MIX, LyricSpan, ratio_sampler, segment_by_lyrics

spans = [LyricSpan(s, e, f"line {i}") for i, (s, e) in enumerate(
    [(2.0, 5.5), (6.0, 10.0), (10.5, 18.0), (19.0, 27.5), (28.0, 35.0), (40.0, 82.0), (84.0, 86.0)]
)]
clips, skipped = segment_by_lyrics(spans, track_len=90.0)
for c in clips:
    print(f"{c.start:6.1f} - {c.end:6.1f} s  ({c.duration:4.1f} s)  lines {list(c.spans)}")
print("skipped lines:", skipped)

# %%
# Sample types drawn with the two training mixes.
for name, mix in (("stage 2", STAGE2_MIX), ("stage 3", STAGE3_MIX)):
    draws = ratio_sampler(mix, seed=0, n=7000)
    print(name, {t.value: draws.count(t) for t in set(draws)})
