"""
End to end through the command line
===================================

Write routed feature files, train both codebooks, tokenize, score with the
bigram baseline and place the result next to published operating points.
The same steps work from a shell as ``duotok <verb> ...``.
"""

import tempfile
from pathlib import Path

from duotok import cli, features, synth

root = Path(tempfile.mkdtemp())
(root / "feats").mkdir()
features.save(root / "feats" / "song.vocal.dtft", synth.clustered_features(1))
features.save(root / "feats" / "song.accomp.dtft", synth.clustered_features(2))
(root / "routes.tsv").write_text("song.vocal.dtft\tvocal\nsong.accomp.dtft\taccomp\n")

common = ["--seed", "0", "--vq.K", "64", "--vq.d", "2", "--stage3.train_steps", "300",
          "--stage3.peak_lr", "0.01", "--stage3.warmup_steps", "1"]
steps = [
    ["train-vq", root / "feats", root / "routes.tsv", root / "cb", *common],
    ["tokenize", root / "cb", root / "tok" / "song.dtok",
     "--vocal", root / "feats" / "song.vocal.dtft", "--accomp", root / "feats" / "song.accomp.dtft"],
    ["eval-lm", root / "tok", root / "report.csv", "--baseline-bigram"],
    ["pareto", root / "pareto.csv", "--reference"],
]
(root / "tok").mkdir()
for argv in steps:
    code = cli.main([str(a) for a in argv])
    print(argv[0], "->", code)

print((root / "report.csv").read_text())
print((root / "pareto.csv").read_text())
