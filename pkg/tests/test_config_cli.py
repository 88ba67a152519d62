import csv
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duotok import cli, features, lmeval, simvq, tokens
from duotok.config import SCHEMA, RunConfig
from duotok.data import write_wav
from duotok.errors import ConfigError
from duotok.simvq import Route

import toyrun


def test_config_defaults_cover_training_table():
    cfg = RunConfig()
    assert cfg["adamw.beta1"] == 0.9 and cfg["adamw.beta2"] == 0.96 and cfg["adamw.weight_decay"] == 0.1
    assert cfg["stage1.peak_lr"] == 3e-4 and cfg["stage1.warmup_steps"] == 5000 and cfg["stage1.cycle_steps"] == 50000
    assert cfg["stage2.peak_lr"] == 1e-4 and cfg["stage2.cycle_steps"] == 80000
    assert cfg["stage3.warmup_steps"] == 3000 and cfg["stage3.cycle_steps"] == 30000
    assert cfg["stage2.lambda_ctc"] == 0.5 and cfg["stage2.replace_p"] == 0.2
    assert cfg["stage3.ratio_vocal"] == 5 and cfg["stage3.ratio_accomp"] == 4
    assert cfg["stage4.lambda_si"] == 1.0
    assert cfg["seed"] is None


def test_config_unknown_key_and_bad_value():
    with pytest.raises(ConfigError):
        RunConfig()["nope"]
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.parse("vq.KK = 3\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("vq.K = many\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("just a line\n")
    with pytest.raises(ConfigError, match="seed"):
        RunConfig().require_seed()


def test_config_precedence(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nvq.K = 128\nvq.d = 4   # inline\n")
    cfg = RunConfig.load(p, {"vq.K": "256"})
    assert cfg["vq.K"] == 256 and cfg["vq.d"] == 4 and cfg["vq.beta"] == 0.25


_values = {
    int: st.integers(0, 10**9),
    float: st.floats(allow_nan=False, allow_infinity=False),
    bool: st.booleans(),
    str: st.sampled_from(["logmel", "mel", "chroma"]),
}


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_config_roundtrip(data):
    keys = data.draw(st.lists(st.sampled_from(sorted(SCHEMA)), unique=True, max_size=12))
    cfg = RunConfig({k: data.draw(_values[SCHEMA[k][0]]) for k in keys})
    assert RunConfig.parse(cfg.to_text()) == cfg


def test_split_overrides():
    assert cli.split_overrides(["--a", "1", "--b=2"]) == {"a": "1", "b": "2"}
    with pytest.raises(ConfigError):
        cli.split_overrides(["--a"])
    with pytest.raises(ConfigError):
        cli.split_overrides(["stray"])


def _wav(path, x, sr=24000):
    write_wav(path, x, sr)
    return path


def test_featurize_silence_and_frame_count(tmp_path):
    wav = _wav(tmp_path / "s.wav", np.zeros(4800))
    out = tmp_path / "s.dtft"
    assert cli.main(["featurize", str(wav), str(out), "--feature", "mel"]) == 0
    f = features.load(out)
    assert np.all(f.values == 0)
    assert len(f) == 1 + 4800 // 240 and f.frame_rate == 100
    assert cli.main(["featurize", str(wav), str(out), "--feature", "chroma"]) == 0
    assert np.all(features.load(out).values == 0)


def test_featurize_stereo_and_determinism(tmp_path):
    rng = np.random.default_rng(0)
    st_ = rng.uniform(-0.5, 0.5, (12345, 2))
    wav = _wav(tmp_path / "st.wav", st_)
    a, b = tmp_path / "a.dtft", tmp_path / "b.dtft"
    args = ["--n_mels", "40", "--downsample", "4", "--encoder_dim", "8", "--seed", "3"]
    assert cli.main(["featurize", str(wav), str(a), *args]) == 0
    assert cli.main(["featurize", str(wav), str(b), *args]) == 0
    assert a.read_bytes() == b.read_bytes()
    f = features.load(a)
    assert len(f) == (1 + 12345 // 240) // 4 and f.dim == 8 and f.frame_rate == 25


def test_featurize_errors(tmp_path):
    wav = _wav(tmp_path / "s.wav", np.zeros(2400))
    out = str(tmp_path / "o.dtft")
    assert cli.main(["featurize", str(wav), out, "--encoder_dim", "4"]) == 2  # seed required
    assert cli.main(["featurize", str(wav), out, "--feature", "mfcc"]) == 2
    assert cli.main(["featurize", str(wav), out, "--bogus", "1"]) == 2
    assert cli.main(["featurize", str(wav), out, "--sample_rate", "16000"]) == 3
    assert cli.main(["featurize", str(tmp_path / "missing.wav"), out]) == 3
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav")
    assert cli.main(["featurize", str(bad), out]) == 3


def test_bestrq_targets_cli(tmp_path):
    fpath = tmp_path / "f.dtft"
    features.save(fpath, features.FeatureSequence(np.random.default_rng(1).standard_normal((30, 6)), 100.0))
    out, q = tmp_path / "t.csv", tmp_path / "q.dtrq"
    assert cli.main(["bestrq-targets", str(fpath), str(out)]) == 2
    assert cli.main(["bestrq-targets", str(fpath), str(out), "--seed", "4", "--rq.K", "32",
                     "--rq.d_proj", "4", "--save-quantizer", str(q)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 30 and all(0 <= int(r["target"]) < 32 for r in rows)
    from duotok import bestrq
    rq = bestrq.load_quantizer(q)
    expect = bestrq.assign_targets(features.load(fpath), rq)
    assert [int(r["target"]) for r in rows] == expect.tolist()


def test_train_vq_and_tokenize(tmp_path):
    fdir = tmp_path / "feats"
    fdir.mkdir()
    from duotok import synth
    features.save(fdir / "a.dtft", synth.clustered_features(5, 120))
    man = tmp_path / "m.tsv"
    man.write_text("a.dtft\tvocal\n")
    out = tmp_path / "cb"
    args = ["--seed", "1", "--vq.K", "16", "--vq.d", "2", "--stage3.train_steps", "30",
            "--stage3.warmup_steps", "10", "--stage3.cycle_steps", "40"]
    assert cli.main(["train-vq", str(fdir), str(man), str(out), *args]) == 0
    # vocal-only corpus leaves the accompaniment basis at identity
    acc = simvq.load_codebook(out / "accomp.dtcb")
    assert np.array_equal(acc.W, np.eye(2))
    log = list(csv.DictReader((out / "train_log.csv").open()))
    assert len(log) == 30
    sch = simvq.ScheduleConfig(0.0001, 10, 40)
    for r in log[::7]:
        assert float(r["lr"]) == simvq.lr_at(int(r["step"]), sch)

    tok = tmp_path / "a.dtok"
    assert cli.main(["tokenize", str(out), str(tok), "--vocal", str(fdir / "a.dtft")]) == 0
    tracks = tokens.tracks_from_bytes(tok.read_bytes())
    bank = cli.load_bank(out)
    table = simvq.effective_codebook(bank.vocal)
    e = features.load(fdir / "a.dtft").values
    brute = [int(np.argmin([np.sum((row - c) ** 2) for c in table])) for row in e[:20]]
    assert tracks[0].indices[:20].tolist() == brute
    assert tracks[0].indices.max() < 16


def test_train_vq_manifest_errors(tmp_path):
    fdir = tmp_path / "feats"
    fdir.mkdir()
    features.save(fdir / "a.dtft", features.FeatureSequence(np.zeros((5, 2)), 25.0))
    man = tmp_path / "m.tsv"
    man.write_text("a.dtft\n")
    assert cli.main(["train-vq", str(fdir), str(man), str(tmp_path / "o"), "--seed", "0"]) == 3
    man.write_text("a.dtft\tvocal\n")
    assert cli.main(["train-vq", str(fdir), str(man), str(tmp_path / "o")]) == 2
    # dimension mismatch with the default vq.d
    assert cli.main(["train-vq", str(fdir), str(man), str(tmp_path / "o"), "--seed", "0"]) == 3


def test_commands_are_byte_identical_on_rerun(tmp_path):
    a = toyrun.toy_pipeline(tmp_path / "a")
    b = toyrun.toy_pipeline(tmp_path / "b")
    for rel in ["tones.dtft", "codebooks/vocal.dtcb", "codebooks/accomp.dtcb",
                "codebooks/train_log.csv", "tokens/song.dtok", "report.csv"]:
        assert (a["root"] / rel).read_bytes() == (b["root"] / rel).read_bytes(), rel


def _write_dtok(path, K, n, seed):
    rng = np.random.default_rng(seed)
    seq = tokens.align(tokens.TrackTokens(Route.VOCAL, K, 25.0, rng.integers(0, K, n)),
                       tokens.TrackTokens(Route.ACCOMP, K, 25.0, rng.integers(0, K, n)))
    tokens.save(path, seq)
    return seq


def test_eval_lm_external_predictors(tmp_path):
    K, n = 64, 80
    tdir, pdir = tmp_path / "tok", tmp_path / "pred"
    tdir.mkdir()
    pdir.mkdir()
    seq = _write_dtok(tdir / "x.dtok", K, n, 0)
    uni = np.full((n, K), -math.log(K), dtype=np.float32)
    for kind in lmeval.LP_KINDS:
        lmeval.save_logprobs(pdir / f"x.{kind}.dtlp", lmeval.LogProbTable(kind, uni))
    out = tmp_path / "r.csv"
    assert cli.main(["eval-lm", str(tdir), str(out), "--predictor-dir", str(pdir)]) == 0
    rep = {r["route"]: r for r in csv.DictReader(out.open())}
    for route in ("vocal", "accomp", "overall", "vocal_cond"):
        assert abs(float(rep[route]["ppl_at_1024"]) - 1024) < 1e-3

    # perfect predictor rows
    for kind, toks in (("vocal", seq.vocal.indices), ("accomp", seq.accomp.indices), ("cond", seq.accomp.indices)):
        rows = np.full((n, K), -1e30, dtype=np.float32)
        rows[np.arange(n), toks] = 0.0
        lmeval.save_logprobs(pdir / f"x.{kind}.dtlp", lmeval.LogProbTable(kind, rows))
    assert cli.main(["eval-lm", str(tdir), str(out), "--predictor-dir", str(pdir)]) == 0
    rep = {r["route"]: r for r in csv.DictReader(out.open())}
    assert float(rep["vocal"]["H_nats"]) == 0 and float(rep["vocal"]["top1"]) == 1


def test_eval_lm_errors(tmp_path):
    tdir = tmp_path / "tok"
    tdir.mkdir()
    out = str(tmp_path / "r.csv")
    assert cli.main(["eval-lm", str(tdir), out, "--baseline-bigram"]) == 3
    _write_dtok(tdir / "x.dtok", 16, 60, 0)
    assert cli.main(["eval-lm", str(tdir), out]) == 2
    assert cli.main(["eval-lm", str(tdir), out, "--baseline-bigram", "--tau", "60"]) == 3
    assert cli.main(["eval-lm", str(tdir), out, "--predictor-dir", str(tmp_path)]) == 3


def test_pareto(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["pareto", str(out)]) == 0
    assert out.read_text() == "name,bitrate_kbps,ppl_at_1024,mel_l1\n"
    inp = tmp_path / "in.csv"
    inp.write_text("name,token_rate,codebook_sizes,ppl_at_1024,mel_l1\nmine,25,2x32768,4.75,\nother,75,1024;1024,10,0.5\n")
    assert cli.main(["pareto", str(out), str(inp)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[1] == ["mine", "0.75", "4.75", ""]
    assert rows[2][:2] == ["other", "1.50"]
    assert cli.parse_codebook_sizes("8x1024") == [1024] * 8
    inp.write_text("name,token_rate\nbroken,1\n")
    assert cli.main(["pareto", str(out), str(inp)]) == 3


def _bitrate_rows(tmp_path):
    out = tmp_path / "ref.csv"
    assert cli.main(["pareto", str(out), "--reference"]) == 0
    got = {r["name"]: r["bitrate_kbps"] for r in csv.DictReader(out.open())}
    return got


@pytest.mark.parametrize("entry", [
    pytest.param(c, id=c.name,
                 marks=pytest.mark.xfail(c.name == "SemantiCodec", strict=True,
                                         reason="published bitrate disagrees with 100 Hz x 2 x 13 bits"))
    for c in tokens.REFERENCE_CODECS
])
def test_pareto_reference_bitrates(tmp_path, entry):
    assert _bitrate_rows(tmp_path)[entry.name] == f"{entry.bitrate_kbps:.2f}"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "duotok", "pareto", str(tmp_path / "x.csv")], capture_output=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "duotok", "nosuchverb"], capture_output=True)
    assert r.returncode == 2
