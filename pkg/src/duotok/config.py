"""Flat ``key = value`` run configuration.

Every optimizer, schedule, loss-weight, noise and data-ratio setting of the
three training stages has a named key, alongside the per-command settings.
Precedence when merging: command-line overrides > config file > defaults.
"""
from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

_STAGE_OPT = {
    # peak_lr, warmup, cosine cycle, train steps, global batch
    "stage1": (3e-4, 5_000, 50_000, 3_000_000, 1920),
    "stage2": (1e-4, 3_000, 80_000, 100_000, 448),
    "stage3": (1e-4, 3_000, 30_000, 100_000, 1280),
}


def _schema() -> dict:
    s = {
        "adamw.beta1": (float, 0.9),
        "adamw.beta2": (float, 0.96),
        "adamw.weight_decay": (float, 0.1),
        "adamw.eps": (float, 1e-8),
    }
    for stage, (lr, warm, cycle, steps, batch) in _STAGE_OPT.items():
        s[f"{stage}.peak_lr"] = (float, lr)
        s[f"{stage}.warmup_steps"] = (int, warm)
        s[f"{stage}.cycle_steps"] = (int, cycle)
        s[f"{stage}.train_steps"] = (int, steps)
        s[f"{stage}.batch_size"] = (int, batch)
    s.update({
        "stage2.lambda_ctc": (float, 0.5),
        "stage2.lambda_mel": (float, 1.0),
        "stage2.lambda_chr": (float, 1.0),
        "stage2.lambda_mss": (float, 1.0),
        "stage2.replace_p": (float, 0.2),
        "stage2.replace_sigma": (float, 1.0),
        "stage2.ratio_full": (float, 4.0),
        "stage2.ratio_vocal": (float, 1.0),
        "stage2.ratio_accomp": (float, 1.0),
        "stage2.ratio_instr": (float, 1.0),
        "stage3.lambda_mel": (float, 1.0),
        "stage3.lambda_chr": (float, 1.0),
        "stage3.lambda_vq": (float, 1.0),
        "stage3.ratio_vocal": (float, 5.0),
        "stage3.ratio_accomp": (float, 4.0),
        "stage3.ratio_instr": (float, 1.0),
        "stage4.lambda_si": (float, 1.0),
        # commands
        "seed": (int, None),
        "sample_rate": (int, 24000),
        "fft_size": (int, 1024),
        "hop": (int, 240),
        "center_pad": (bool, True),
        "n_mels": (int, 128),
        "fmin": (float, 0.0),
        "fmax": (float, 0.0),  # 0 means Nyquist
        "mel_eps": (float, 1e-5),
        "feature": (str, "logmel"),
        "downsample": (int, 1),
        "encoder_dim": (int, 0),
        "rq.d_proj": (int, 16),
        "rq.K": (int, 8192),
        "vq.K": (int, 32768),
        "vq.d": (int, 16),
        "vq.beta": (float, 0.25),
        "lm.alpha": (float, 1.0),
        "tau": (int, -1),  # -1 means two seconds of tokens
    })
    return s


SCHEMA = _schema()


def _parse_value(key: str, text: str):
    typ, _ = SCHEMA[key]
    text = text.strip()
    try:
        if typ is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "1", "yes")
        if typ is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        return typ(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunConfig:
    def __init__(self, values: dict | None = None):
        self._values = {k: d for k, (_, d) in SCHEMA.items()}
        for k, v in (values or {}).items():
            self[k] = v

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def __setitem__(self, key: str, value):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self._values[key] = _parse_value(key, value) if isinstance(value, str) else value

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values

    def as_dict(self) -> dict:
        return dict(self._values)

    def require_seed(self) -> int:
        seed = self._values["seed"]
        if seed is None:
            raise ConfigError("this command is randomized: an explicit `seed` is required")
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        return seed

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cfg = cls()
        cfg.update_from_text(text)
        return cfg

    def update_from_text(self, text: str, origin: str = "<config>") -> None:
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{origin}:{n}: expected `key = value`")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"{origin}:{n}: unknown config key {key!r}")
            self[key] = value

    def to_text(self) -> str:
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in self._values.items() if v is not None)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        cfg = cls()
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            cfg.update_from_text(text, str(path))
        for k, v in (overrides or {}).items():
            cfg[k] = v
        return cfg
