"""Run configuration: key = value text format with env-var overrides.

Schema (defaults in parentheses):

  convention   lattice convention id ("standard")
  n_kx, n_ky   momentum grid counts (4, 4)
  pw_shells    plane-wave cutoff radius in units of |g1| (8.0)
  ff_shells    form-factor table cutoff in units of |g1| (pw_shells - 1)
  alpha        interlayer coupling, or "auto" to search (auto)
  alpha_lo/hi  search bracket (0.3, 0.9)
  alpha_tol    accepted flat-band residual for the search (1e-7)
  flavor       spinless | valley | valley-spin (spinless)
  interaction  yukawa | gaussian (yukawa)
  kappa        Yukawa screening (1.0)
  sigma        Gaussian width (1.0)
  seed         RNG seed for sampling commands (0)
  threads      worker threads, 0 = serial (0)
  out_dir      report directory (out)
  cache_dir    cache directory (cache)
  flat_tol     per-momentum flat-band residual bound (1e-6)
  kernel_tol   Sylvester kernel threshold (1e-10)
  zero_tol     many-body zero-energy threshold (1e-8)

Lines are `key = value`; blank lines and `#` comments are ignored.
Environment variables FBIHF_<KEY> (upper-cased key) override file values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigError

_FLAVOR_ALIASES = {"spinless": "spinless", "valley": "valley",
                   "valley-spin": "valley_spin", "valley_spin": "valley_spin"}

ENV_PREFIX = "FBIHF_"


@dataclass
class RunConfig:
    convention: str = "standard"
    n_kx: int = 4
    n_ky: int = 4
    pw_shells: float = 8.0
    ff_shells: float = -1.0          # negative means pw_shells - 1
    alpha: str = "auto"              # "auto" or a float literal
    alpha_lo: float = 0.3
    alpha_hi: float = 0.9
    alpha_tol: float = 1e-7
    flavor: str = "spinless"
    interaction: str = "yukawa"
    kappa: float = 1.0
    sigma: float = 1.0
    seed: int = 0
    threads: int = 0
    out_dir: str = "out"
    cache_dir: str = "cache"
    flat_tol: float = 1e-6
    kernel_tol: float = 1e-10
    zero_tol: float = 1e-8

    def validate(self) -> None:
        if self.n_kx < 1 or self.n_ky < 1:
            raise ConfigError("grid counts must be >= 1")
        if self.pw_shells <= 0:
            raise ConfigError("pw_shells must be positive")
        for name in ("alpha_tol", "flat_tol", "kernel_tol", "zero_tol",
                     "kappa", "sigma"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.flavor not in _FLAVOR_ALIASES:
            raise ConfigError(f"unknown flavor {self.flavor!r}")
        if self.interaction not in ("yukawa", "gaussian"):
            raise ConfigError(f"unknown interaction {self.interaction!r}")
        if self.alpha != "auto":
            try:
                float(self.alpha)
            except ValueError as exc:
                raise ConfigError(f"alpha must be 'auto' or a number, got "
                                  f"{self.alpha!r}") from exc

    @property
    def flavor_id(self) -> str:
        return _FLAVOR_ALIASES[self.flavor]

    @property
    def ff_shells_resolved(self) -> float:
        return self.ff_shells if self.ff_shells > 0 else self.pw_shells - 1.0

    def alpha_value(self) -> float | None:
        return None if self.alpha == "auto" else float(self.alpha)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw: str, lineno: int):
    kind = _FIELD_TYPES.get(name)
    if kind is None:
        raise ConfigError(f"line {lineno}: unknown key {name!r}")
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: field {name!r} expects {kind}, "
                          f"got {raw!r}") from exc


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        name, raw = stripped.split("=", 1)
        name = name.strip()
        setattr(cfg, name, _parse_value(name, raw, lineno))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def apply_env_overrides(cfg: RunConfig, environ=None) -> RunConfig:
    env = os.environ if environ is None else environ
    for name in _FIELD_TYPES:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            setattr(cfg, name, _parse_value(name, raw, 0))
    cfg.validate()
    return cfg


def config_to_text(cfg: RunConfig) -> str:
    """Serialize losslessly; float str() is shortest round-trip in py3."""
    return "\n".join(f"{f.name} = {getattr(cfg, f.name)}"
                     for f in fields(RunConfig)) + "\n"


def cache_key_fields(cfg: RunConfig, alpha: float) -> dict:
    """The subset of fields a cached bundle/table payload depends on."""
    return {
        "convention": cfg.convention,
        "n_kx": cfg.n_kx,
        "n_ky": cfg.n_ky,
        "pw_shells": repr(cfg.pw_shells),
        "ff_shells": repr(cfg.ff_shells_resolved),
        "alpha": f"{alpha:.17g}",
    }
