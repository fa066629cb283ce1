"""Experiment configuration, run directories, and artifact writers.

A run is identified by the hash of its fully resolved configuration.  Every
artifact a run writes is deterministic in (config, seed): CSV floats go
through repr, JSON is emitted with sorted keys, and the manifest carries no
timestamps, so rerunning a config produces byte-identical files in a fresh
directory.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .env import (
    EnergyLaw,
    GapLaw,
    GeneratorSpec,
    PeriodicEnvironment,
    USpec,
    make_periodic,
)
from .errors import ConfigError

__all__ = [
    "ExperimentConfig",
    "parse_env_spec",
    "env_to_dict",
    "preset_names",
    "canonical_json",
    "config_hash",
    "prepare_run_dir",
    "write_manifest",
    "write_csv",
    "write_json",
]


# ---------------------------------------------------------------- env specs

# Fixed presets; the period-4 values are arbitrary but frozen, since run
# identity must not depend on any library's RNG stream layout.
_PRESETS = {
    "period1-lattice": lambda: make_periodic([1.0]),
    "period2-mix": lambda: make_periodic(
        [1.0, 2.0], [0.3, -0.2], u=USpec.mott(1.0, 1.0)
    ),
    "period4-random": lambda: make_periodic(
        [1.3, 2.1, 1.7, 2.9], [0.4, -0.6, 0.1, 0.8], u=USpec.mott(1.0, 1.0)
    ),
    "iid-exp3": lambda: GeneratorSpec(gap_law=GapLaw.exponential(d=1.0, rate=3.0)),
}


def preset_names() -> tuple:
    return tuple(sorted(_PRESETS))


def _parse_fields(body: str) -> dict:
    out = {}
    for part in body.split(";"):
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"malformed field {part!r}; want key=value")
        key, val = part.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def parse_env_spec(text: str):
    """Environment from a preset name or an inline description.

    Inline forms:
      periodic:gaps=1,2[;energies=0.3,-0.2][;beta=1[;bound=1]]
      iid:d=1;rate=3 | iid:d=1;alpha=2;cap=10  [;amp=A][;beta=B[;bound=U]][;window=W]
    """
    if text in _PRESETS:
        return _PRESETS[text]()
    if ":" not in text:
        raise ConfigError(
            f"unknown environment {text!r}; presets: {', '.join(preset_names())}"
        )
    kind, body = text.split(":", 1)
    fields = _parse_fields(body)

    def grab(key, default=None):
        return fields.pop(key, default)

    if kind == "periodic":
        gaps_text = grab("gaps")
        if gaps_text is None:
            raise ConfigError("periodic environment needs gaps=...")
        gaps = _floats(gaps_text)
        energies_text = grab("energies")
        energies = _floats(energies_text) if energies_text is not None else None
        beta = float(grab("beta", "0"))
        u = None
        if beta != 0.0:
            if energies is None:
                raise ConfigError("beta without energies has no effect; add energies=")
            bound = float(grab("bound", "0") or 0.0)
            if bound <= 0.0:
                bound = max(abs(e) for e in energies) or 1.0
            u = USpec.mott(beta, bound)
        if fields:
            raise ConfigError(f"unknown periodic fields {sorted(fields)}")
        return make_periodic(gaps, energies, u=u)

    if kind == "iid":
        d = grab("d")
        if d is None:
            raise ConfigError("iid environment needs d=...")
        d = float(d)
        rate, alpha, cap = grab("rate"), grab("alpha"), grab("cap")
        if rate is not None:
            if alpha is not None or cap is not None:
                raise ConfigError("give either rate= or alpha=,cap=, not both")
            gap_law = GapLaw.exponential(d, float(rate))
        elif alpha is not None and cap is not None:
            gap_law = GapLaw.heavy_tail(d, float(alpha), float(cap))
        elif alpha is None and cap is None:
            gap_law = GapLaw.constant(d)
        else:
            raise ConfigError("heavy-tail gaps need both alpha= and cap=")
        amp = float(grab("amp", "0"))
        energy_law = EnergyLaw("uniform", amp) if amp > 0 else EnergyLaw()
        beta = float(grab("beta", "0"))
        u = None
        if beta != 0.0:
            if amp <= 0:
                raise ConfigError("beta needs an energy amplitude amp=...")
            u = USpec.mott(beta, float(grab("bound", str(amp))))
        window = int(grab("window", "64"))
        if fields:
            raise ConfigError(f"unknown iid fields {sorted(fields)}")
        return GeneratorSpec(gap_law=gap_law, energy_law=energy_law, u=u, window=window)

    raise ConfigError(f"unknown environment kind {kind!r}; want periodic: or iid:")


def env_to_dict(env) -> dict:
    """Serializable description of a parsed environment."""
    if isinstance(env, PeriodicEnvironment):
        return {
            "kind": "periodic",
            "gaps": [float(g) for g in env.gaps],
            "energies": [float(e) for e in env.energies],
            "d": env.d,
            "u": env.u.to_dict(),
        }
    if isinstance(env, GeneratorSpec):
        return {"kind": "iid", **env.to_dict()}
    raise ConfigError(f"cannot serialize environment of type {type(env).__name__}")


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one run; the hash of this is the run id."""

    subcommand: str
    env: str
    lam: float = 0.0
    lam_grid: tuple = ()
    h_grid: tuple = ()
    steps: int = 1000
    replicas: int = 8
    seed: int = 0
    outdir: str = "runs"
    tail_tol: float = 1e-12
    h: float = 1e-3
    rho: int = 4
    p: float = 2.0
    f_spec: str = "pi"
    clock: str = "discrete"
    check: str = ""
    site: int = 0
    lo: int = -10
    hi: int = 10
    set_a: str = ""
    set_b: str = ""
    figures: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.tail_tol <= 0:
            raise ConfigError("tail_tol must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lam_grid"] = list(self.lam_grid)
        d["h_grid"] = list(self.h_grid)
        return d


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()[:12]


def prepare_run_dir(cfg: ExperimentConfig) -> Path:
    """Create a fresh directory named by the config hash; never overwrite."""
    base = Path(cfg.outdir)
    base.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.subcommand}-{config_hash(cfg)}"
    path = base / stem
    bump = 1
    while path.exists():
        bump += 1
        path = base / f"{stem}-{bump}"
    path.mkdir()
    return path


def write_manifest(run_dir: Path, cfg: ExperimentConfig, env) -> Path:
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "environment": env_to_dict(env),
        "seed": cfg.seed,
        "versions": {
            "motthop": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    return write_json(run_dir / "manifest.json", manifest)


# ---------------------------------------------------------------- artifacts


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _sanitize(obj):
    """Replace non-finite floats so the JSON stays strictly parseable."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return repr(float(obj))
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    return path
