"""Batch command-line front end.

Usage: ``duotok <verb> [paths...] [--config FILE] [--key value ...]``.
Exit status is 0 on success, 2 for configuration errors and 3 for data errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import sys
from pathlib import Path


from . import bestrq, dsp, features, lmeval, simvq, tokens
from .bottleneck import init_toy_encoder, toy_encode
from .config import RunConfig
from .data import load_wav
from .errors import ConfigError, DataError
from .features import FeatureSequence
from .simvq import DualCodebookBank, Route, ScheduleConfig

log = logging.getLogger("duotok")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


# --- featurize --------------------------------------------------------------

def featurize(w: dsp.Waveform, cfg: RunConfig) -> FeatureSequence:
    if w.sample_rate != cfg["sample_rate"]:
        raise DataError(f"expected {cfg['sample_rate']} Hz audio, got {w.sample_rate} Hz (no resampling)")
    try:
        stft_cfg = dsp.StftConfig(cfg["fft_size"], cfg["hop"], cfg["center_pad"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    spec = dsp.stft(w, stft_cfg)
    kind = cfg["feature"]
    if kind in ("logmel", "mel"):
        fb = dsp.mel_filterbank(w.sample_rate, cfg["fft_size"], cfg["n_mels"], cfg["fmin"], cfg["fmax"] or None)
        x = dsp.log_mel(spec, fb, cfg["mel_eps"]) if kind == "logmel" else dsp.mel_spectrogram(spec, fb)
    elif kind == "chroma":
        x = dsp.chroma(spec)
    else:
        raise ConfigError(f"feature must be logmel, mel or chroma, got {kind!r}")
    rate = spec.frame_rate
    f = cfg["downsample"]
    if f < 1:
        raise ConfigError("downsample must be >= 1")
    if f > 1:
        U = x.shape[0] // f
        x = x[: U * f].reshape(U, f, -1).mean(axis=1)
        rate /= f
    if cfg["encoder_dim"] > 0:
        enc = init_toy_encoder(cfg.require_seed(), x.shape[1], cfg["encoder_dim"])
        return toy_encode(x, enc, rate)
    return FeatureSequence(x, rate)


def cmd_featurize(args, cfg):
    feats = featurize(load_wav(args.in_wav), cfg)
    features.save(args.out_features, feats)
    log.info("wrote %d x %d features at %.3f Hz", len(feats), feats.dim, feats.frame_rate)


# --- bestrq-targets ---------------------------------------------------------

def cmd_bestrq_targets(args, cfg):
    feats = features.load(args.features)
    rq = bestrq.init_random_quantizer(cfg.require_seed(), feats.dim, cfg["rq.d_proj"], cfg["rq.K"])
    targets = bestrq.assign_targets(feats, rq)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "target"])
    w.writerows(enumerate(targets.tolist()))
    Path(args.out_targets).write_text(buf.getvalue())
    if args.save_quantizer:
        bestrq.save_quantizer(args.save_quantizer, rq)


# --- train-vq ---------------------------------------------------------------

def read_manifest(path, feature_dir):
    """Lines of ``filename<TAB>route``; returns [(path, Route)] in file order."""
    entries = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2 or not parts[1].strip():
            raise DataError(f"{path}:{n}: route missing for {parts[0]!r}")
        try:
            route = Route.parse(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{n}: {exc}") from None
        entries.append((Path(feature_dir) / parts[0].strip(), route))
    if not entries:
        raise DataError(f"{path}: empty manifest")
    return entries


def schedule_for(cfg: RunConfig, stage: str = "stage3") -> ScheduleConfig:
    try:
        return ScheduleConfig(cfg[f"{stage}.peak_lr"], cfg[f"{stage}.warmup_steps"], cfg[f"{stage}.cycle_steps"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def train_vq(entries, cfg: RunConfig):
    seed = cfg.require_seed()
    batches = [(features.load(p), r) for p, r in entries]
    d = cfg["vq.d"]
    for (p, _), (fs, _) in zip(entries, batches):
        if fs.dim != d:
            raise DataError(f"{p}: feature dim {fs.dim} != vq.d {d}")
    bank = DualCodebookBank.create(cfg["vq.K"], d, seed)
    records = simvq.train_w(
        itertools.cycle(batches), bank, cfg["vq.beta"], schedule_for(cfg), cfg["stage3.train_steps"],
        beta1=cfg["adamw.beta1"], beta2=cfg["adamw.beta2"],
        weight_decay=cfg["adamw.weight_decay"], eps=cfg["adamw.eps"],
    )
    return bank, records


def training_log_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "route", "lr", "vq_loss", "utilization", "entropy"])
    for r in records:
        w.writerow([r.step, r.route.label, repr(r.lr), repr(r.vq_loss), repr(r.utilization), repr(r.entropy)])
    return buf.getvalue()


def cmd_train_vq(args, cfg):
    entries = read_manifest(args.manifest, args.feature_dir)
    bank, records = train_vq(entries, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in Route:
        simvq.save_codebook(out / f"{r.label}.dtcb", bank[r])
    (out / "train_log.csv").write_text(training_log_csv(records))
    if records:
        log.info("trained %d steps, final vq_loss %.6g", len(records), records[-1].vq_loss)


# --- tokenize ---------------------------------------------------------------

def load_bank(codebook_dir) -> DualCodebookBank:
    d = Path(codebook_dir)
    return DualCodebookBank(simvq.load_codebook(d / "vocal.dtcb"), simvq.load_codebook(d / "accomp.dtcb"))


def tokenize(feats: FeatureSequence, bank: DualCodebookBank, route: Route) -> tokens.TrackTokens:
    res = simvq.quantize(feats, bank, route)
    return tokens.TrackTokens(route, bank.K, feats.frame_rate, res.indices)


def cmd_tokenize(args, cfg):
    if not (args.vocal or args.accomp):
        raise ConfigError("tokenize needs --vocal and/or --accomp feature files")
    bank = load_bank(args.codebooks)
    tracks = []
    for route, path in ((Route.VOCAL, args.vocal), (Route.ACCOMP, args.accomp)):
        if path:
            tracks.append(tokenize(features.load(path), bank, route))
    if len(tracks) == 2:
        tokens.save(args.out_tokens, tokens.align(*tracks))
    else:
        tokens.save(args.out_tokens, tracks)


# --- eval-lm ----------------------------------------------------------------

def load_corpus(tokens_dir):
    paths = sorted(Path(tokens_dir).glob("*.dtok"))
    if not paths:
        raise DataError(f"no .dtok files in {tokens_dir}")
    corpus = [tokens.load(p) for p in paths]
    Ks = {s.vocal.vocab_size for s in corpus} | {s.accomp.vocab_size for s in corpus}
    if len(Ks) != 1:
        raise DataError(f"corpus mixes vocabulary sizes {sorted(Ks)}")
    return corpus


def load_external(predictor_dir, corpus) -> lmeval.ExternalPredictor:
    """Rows from ``<stem>.<vocal|accomp|cond>.dtlp`` next to each token file stem."""
    K = corpus[0].vocal.vocab_size
    tables = {}
    for seq in corpus:
        tables[seq.name] = {}
        for kind in lmeval.LP_KINDS:
            p = Path(predictor_dir) / f"{seq.name}.{kind}.dtlp"
            if not p.exists():
                continue
            tab = lmeval.load_logprobs(p)
            if tab.kind != kind or tab.rows.shape != (len(seq), K):
                raise DataError(f"{p}: expected {kind} rows of shape {(len(seq), K)}, got {tab.kind} {tab.rows.shape}")
            tables[seq.name][kind] = lmeval.normalise_external(tab.rows)
    return lmeval.ExternalPredictor(K, tables)


def cmd_eval_lm(args, cfg):
    corpus = load_corpus(args.tokens_dir)
    if args.baseline_bigram == bool(args.predictor_dir):
        raise ConfigError("choose exactly one of --predictor-dir or --baseline-bigram")
    if args.baseline_bigram:
        train = load_corpus(args.train_dir) if args.train_dir else corpus
        predictor = lmeval.train_count_lm(train, None, cfg["lm.alpha"])
        if predictor.vocab_size != corpus[0].vocal.vocab_size:
            raise DataError("training and evaluation corpora use different vocabulary sizes")
    else:
        predictor = load_external(args.predictor_dir, corpus)
    has_cond = args.baseline_bigram or all("cond" in predictor.tables[s.name] for s in corpus)
    tau = None if cfg["tau"] < 0 else cfg["tau"]
    report = lmeval.evaluate(predictor, corpus, tau=tau, conditional=has_cond)
    Path(args.out_csv).write_text(report.to_csv())
    log.info("overall PPL@1024 %.4f", report.overall_ppl)


# --- pareto -----------------------------------------------------------------

PARETO_COLUMNS = ("name", "bitrate_kbps", "ppl_at_1024", "mel_l1")


def parse_codebook_sizes(text: str) -> list[int]:
    """``"1024;1024"`` or ``"8x1024"`` (count x size)."""
    text = text.strip().replace(",", "")
    if "x" in text:
        n, k = text.split("x", 1)
        return [int(k)] * int(n)
    return [int(p) for p in text.split(";") if p.strip()]


def pareto_rows(entries):
    rows = []
    for name, rate, sizes, ppl, mel in entries:
        rows.append((name, tokens.bitrate_kbps(rate, sizes), ppl, mel))
    return rows


def pareto_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PARETO_COLUMNS)
    for name, br, ppl, mel in rows:
        w.writerow([name, f"{br:.2f}", repr(float(ppl)), "" if mel is None else repr(float(mel))])
    return buf.getvalue()


def read_pareto_inputs(path):
    """Rows of ``name,token_rate,codebook_sizes,ppl_at_1024,mel_l1``."""
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        for n, row in enumerate(csv.DictReader(f), 2):
            try:
                mel = row["mel_l1"].strip()
                out.append((row["name"], float(row["token_rate"]), parse_codebook_sizes(row["codebook_sizes"]),
                            float(row["ppl_at_1024"]), float(mel) if mel else None))
            except (KeyError, ValueError, AttributeError) as exc:
                raise DataError(f"{path}:{n}: {exc!r}") from None
    return out


def cmd_pareto(args, cfg):
    entries = []
    if args.reference:
        entries += [(c.name, c.token_rate, c.codebook_sizes, c.ppl_at_1024, c.mel_l1) for c in tokens.REFERENCE_CODECS]
    for p in args.inputs:
        entries += read_pareto_inputs(p)
    Path(args.out_csv).write_text(pareto_csv(pareto_rows(entries)))


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="duotok", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def verb(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="flat key = value config file")
        sp.set_defaults(func=func)
        return sp

    sp = verb("featurize", cmd_featurize, "WAV -> DTFT feature file")
    sp.add_argument("in_wav")
    sp.add_argument("out_features")

    sp = verb("bestrq-targets", cmd_bestrq_targets, "DTFT -> random-projection target CSV")
    sp.add_argument("features")
    sp.add_argument("out_targets")
    sp.add_argument("--save-quantizer", metavar="PATH")

    sp = verb("train-vq", cmd_train_vq, "train dual SimVQ codebooks on routed feature files")
    sp.add_argument("feature_dir")
    sp.add_argument("manifest")
    sp.add_argument("out_dir")

    sp = verb("tokenize", cmd_tokenize, "DTFT (+ codebooks) -> DTOK")
    sp.add_argument("codebooks", help="directory with vocal.dtcb and accomp.dtcb")
    sp.add_argument("out_tokens")
    sp.add_argument("--vocal", metavar="DTFT")
    sp.add_argument("--accomp", metavar="DTFT")

    sp = verb("eval-lm", cmd_eval_lm, "LM-friendliness report over a directory of DTOK files")
    sp.add_argument("tokens_dir")
    sp.add_argument("out_csv")
    sp.add_argument("--predictor-dir", metavar="DIR")
    sp.add_argument("--baseline-bigram", action="store_true")
    sp.add_argument("--train-dir", metavar="DIR", help="corpus for the bigram baseline (default: tokens_dir)")

    sp = verb("pareto", cmd_pareto, "combine operating points into a bitrate/PPL/Mel-L1 CSV")
    sp.add_argument("out_csv")
    sp.add_argument("inputs", nargs="*")
    sp.add_argument("--reference", action="store_true", help="include published reference codecs")
    return p


def split_overrides(extra):
    """Turn leftover ``--key value`` / ``--key=value`` tokens into a dict."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{key}") from None
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig.load(args.config, split_overrides(extra))
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # parameter validation inside the library, driven by config values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
