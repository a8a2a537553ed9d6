"""Run configuration: flat key=value files, CLI overrides, per-env defaults.

Defaults follow the published hyperparameter tables for each environment,
scaled to a tenth of the full budget unless paper_scale is set.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

ENVS = ("fractal", "bitseq", "rna", "graph")
SAMPLERS = ("gfn", "a2c", "sac", "random")
CHUNKERS = ("atomic", "increment", "replace", "random_merge")
BACKWARDS = ("uniform", "maxent", "shortparse")

# per-environment defaults: (full-budget iterations, full chunk trigger period,
# eps schedule, reward exponent, buffer capacity, diversity cutoff,
# sac alpha, a2c alpha, log Z init)
_ENV_DEFAULTS = {
    "fractal": dict(iterations=31250, trigger_k=1250, eps_start=0.5, eps_end=0.1,
                    beta=1.0, capacity=1000, cutoff=1, sac_alpha=0.2,
                    a2c_alpha=0.5, logz_init=90.0),
    "bitseq": dict(iterations=25000, trigger_k=1000, eps_start=0.1, eps_end=0.01,
                   beta=100.0, capacity=10000, cutoff=8, sac_alpha=0.01,
                   a2c_alpha=0.05, logz_init=40.0),
    "rna": dict(iterations=25000, trigger_k=1000, eps_start=0.1, eps_end=0.01,
                beta=10.0, capacity=10000, cutoff=3, sac_alpha=0.1,
                a2c_alpha=0.05, logz_init=11.0),
    "graph": dict(iterations=25000, trigger_k=1000, eps_start=0.1, eps_end=0.01,
                  beta=1.0, capacity=10000, cutoff=3, sac_alpha=0.1,
                  a2c_alpha=0.1, logz_init=10.0),
}


@dataclass
class RunConfig:
    env: str = "fractal"
    side: int = 65            # fractal
    length: int = 64          # bitseq
    task: int = 1             # rna motif set
    rna_length: int = 14
    rna_beta: float = 0.1     # distance-decay rate of the rna reward
    n_max: int = 7            # graph
    sampler: str = "gfn"
    backward: str = "uniform"
    lam: float = -5.0
    chunker: str = "increment"
    trigger: str = ""          # "every:K" or "loss:INITIAL[:DECAY]"
    m: int = 25                # replace-chunker vocabulary budget
    corpus_n: int = 128
    corpus_p: float = 0.55
    eps_start: float = -1.0    # -1 → per-env default
    eps_end: float = -1.0
    alpha: float = -1.0        # entropy coefficient; -1 → per-env default
    lr: float = 1e-4
    logz_lr: float = 1e-3
    logz_init: float = float("nan")
    beta: float = float("nan")  # reward exponent
    batch: int = 64
    iterations: int = 0        # 0 → per-env default (desk scale unless paper_scale)
    capacity: int = 0
    cutoff: int = -1
    mixture: float = 0.55      # buffer share of TB training batches
    d: int = 128
    hidden: int = 128
    seed: int = 0
    out_dir: str = ""
    init_library: str = ""
    freeze_library: bool = False
    paper_scale: bool = False

    def env_kwargs(self) -> dict:
        if self.env == "fractal":
            return {"side": self.side}
        if self.env == "bitseq":
            return {"length": self.length}
        if self.env == "rna":
            return {"task": self.task, "length": self.rna_length, "beta": self.rna_beta}
        return {"n_max": self.n_max}


_BOOL_FIELDS = {"freeze_library", "paper_scale"}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise KeyError(key)
    if key in _BOOL_FIELDS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key} expects a boolean, got {raw!r}")
    t = _FIELD_TYPES[key]
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def _read_pairs(lines, source):
    out = {}
    for ln, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{ln}: expected key=value, got {line!r}")
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def _apply_defaults(cfg: RunConfig) -> RunConfig:
    dft = _ENV_DEFAULTS[cfg.env]
    scale = 1 if cfg.paper_scale else 10
    if cfg.iterations == 0:
        cfg.iterations = dft["iterations"] // scale
    if not cfg.trigger:
        cfg.trigger = f"every:{max(1, dft['trigger_k'] // scale)}"
    if cfg.eps_start < 0:
        cfg.eps_start = dft["eps_start"]
    if cfg.eps_end < 0:
        cfg.eps_end = dft["eps_end"]
    if cfg.alpha < 0:
        cfg.alpha = dft["sac_alpha"] if cfg.sampler == "sac" else dft["a2c_alpha"]
    if cfg.logz_init != cfg.logz_init:  # NaN check
        cfg.logz_init = dft["logz_init"]
    if cfg.beta != cfg.beta:
        cfg.beta = dft["beta"]
    if cfg.capacity == 0:
        cfg.capacity = dft["capacity"]
    if cfg.cutoff < 0:
        cfg.cutoff = dft["cutoff"]
    return cfg


def _validate(cfg: RunConfig) -> None:
    errors = []
    if cfg.env not in ENVS:
        errors.append(f"env must be one of {ENVS}, got {cfg.env!r}")
    if cfg.sampler not in SAMPLERS:
        errors.append(f"sampler must be one of {SAMPLERS}, got {cfg.sampler!r}")
    if cfg.chunker not in CHUNKERS:
        errors.append(f"chunker must be one of {CHUNKERS}, got {cfg.chunker!r}")
    if cfg.backward not in BACKWARDS:
        errors.append(f"backward must be one of {BACKWARDS}, got {cfg.backward!r}")
    if cfg.backward in ("maxent", "shortparse") and cfg.env in ("fractal", "graph"):
        errors.append(f"backward={cfg.backward} requires a sequence environment")
    if cfg.rna_beta <= 0.0:
        errors.append(f"rna_beta must be > 0, got {cfg.rna_beta}")
    if not 0.0 <= cfg.corpus_p <= 1.0:
        errors.append(f"corpus_p must be in [0,1], got {cfg.corpus_p}")
    if not 0.0 <= cfg.mixture <= 1.0:
        errors.append(f"mixture must be in [0,1], got {cfg.mixture}")
    if cfg.env in ENVS and cfg.iterations < 1:
        errors.append(f"iterations must be >= 1, got {cfg.iterations}")
    if cfg.batch < 1:
        errors.append(f"batch must be >= 1, got {cfg.batch}")
    if cfg.eps_start + 1e-12 < cfg.eps_end:
        errors.append("eps schedule must be non-increasing")
    if errors:
        raise ValueError("invalid configuration:\n  " + "\n  ".join(errors))


def parse_config(path: str | Path | None, overrides: list[str] = ()) -> RunConfig:
    """Build a validated RunConfig from a key=value file plus --key=value overrides."""
    pairs = {}
    if path is not None:
        pairs.update(_read_pairs(Path(path).read_text().splitlines(), str(path)))
    for ov in overrides:
        if not ov.startswith("--") or "=" not in ov:
            raise ValueError(f"override must look like --key=value, got {ov!r}")
        k, _, v = ov[2:].partition("=")
        pairs[k.strip()] = v.strip()

    cfg = RunConfig()
    bad = []
    for k, v in pairs.items():
        try:
            setattr(cfg, k, _parse_value(k, v))
        except KeyError:
            bad.append(f"unknown key {k!r}")
        except ValueError as e:
            bad.append(str(e))
    if bad:
        raise ValueError("invalid configuration:\n  " + "\n  ".join(bad))
    if cfg.env in ENVS:
        _apply_defaults(cfg)
    _validate(cfg)
    return cfg


def echo_config(cfg: RunConfig) -> str:
    """Normalized key=value text; parse(echo(cfg)) reproduces cfg exactly."""
    lines = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"
