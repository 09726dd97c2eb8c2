"""Flat ``key = value`` run configuration.

Resolution order: built-in defaults, then the config file, then environment
variables named ``CAESAR_<KEY>`` (upper case), then explicit overrides.
Unknown keys and out-of-range values raise :class:`ConfigError`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .he.core import SUPPORTED_KEY_BITS, HEParams, Scheme

ENV_PREFIX = "CAESAR_"


class ConfigError(ValueError):
    pass


def _choice(*options):
    def conv(v):
        v = v.strip()
        if v not in options:
            raise ConfigError(f"expected one of {', '.join(options)}")
        return v

    return conv


def _int(lo, hi=None):
    def conv(v):
        try:
            x = int(v)
        except ValueError:
            raise ConfigError(f"{v!r} is not an integer") from None
        if x < lo or (hi is not None and x > hi):
            raise ConfigError(f"{x} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return x

    return conv


def _float(lo, hi=None, allow_none=False):
    def conv(v):
        if allow_none and str(v).strip().lower() in ("", "none"):
            return None
        try:
            x = float(v)
        except ValueError:
            raise ConfigError(f"{v!r} is not a number") from None
        if not lo <= x <= (hi if hi is not None else float("inf")):
            raise ConfigError(f"{x} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return x

    return conv


def _key_bits(v):
    x = _int(512)(v)
    if x not in SUPPORTED_KEY_BITS:
        raise ConfigError(f"key_bits must be one of {sorted(SUPPORTED_KEY_BITS)}")
    return x


def _ring_bits(v):
    x = _int(32, 128)(v)
    if x not in (32, 64, 128):
        raise ConfigError("l must be 32, 64 or 128")
    return x


def _addresses(v):
    parts = [p.strip() for p in str(v).split(",") if p.strip()]
    if len(parts) != 1:
        raise ConfigError("addresses takes one host:port (party A listens, B connects)")
    host, sep, port = parts[0].rpartition(":")
    if not sep:
        raise ConfigError(f"address {parts[0]!r} lacks a port")
    _int(0, 65535)(port)
    return parts[0]


# key -> (converter, default)
KEYS = {
    "scheme": (_choice("OU", "PAILLIER"), "OU"),
    "key_bits": (_key_bits, 2048),
    "l": (_ring_bits, 64),
    "c": (_int(0, 12), 4),
    "sigma": (_int(1, 128), 40),
    "alpha": (_float(0.0, 100.0), 0.5),
    "epochs": (_int(0), 3),
    "batch": (_int(1), 128),
    "workers": (_int(1, 256), 1),
    "bandwidth_mbps": (_float(1e-3, None, allow_none=True), None),
    "transport": (_choice("inproc", "tcp"), "inproc"),
    "addresses": (_addresses, "127.0.0.1:7700"),
    "seed": (_int(0), 0),
    "timeout": (_float(0.01), 60.0),
}


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "OU"
    key_bits: int = 2048
    l: int = 64
    c: int = 4
    sigma: int = 40
    alpha: float = 0.5
    epochs: int = 3
    batch: int = 128
    workers: int = 1
    bandwidth_mbps: float | None = None
    transport: str = "inproc"
    addresses: str = "127.0.0.1:7700"
    seed: int = 0
    timeout: float = 60.0

    @property
    def he(self) -> HEParams:
        return HEParams(Scheme.parse(self.scheme), self.key_bits)

    def train_config(self, **extra):
        from .training.config import TrainConfig

        try:
            return TrainConfig(
                alpha=self.alpha, epochs=self.epochs, batch=self.batch, c=self.c, l=self.l, sigma=self.sigma,
                seed=self.seed, workers=self.workers, bandwidth_mbps=self.bandwidth_mbps, **extra,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def dumps(self) -> str:
        return "".join(f"{k} = {'none' if getattr(self, k) is None else getattr(self, k)}\n" for k in KEYS)


def parse_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        out[key.strip().lower()] = value.strip()
    return out


def _convert(raw: dict, source: str) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            out[key] = KEYS[key][0](value) if isinstance(value, str) else KEYS[key][0](str(value))
        except ConfigError as exc:
            raise ConfigError(f"{source}: {key}: {exc}") from None
    return out


def load_config(path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    values = {k: default for k, (_, default) in KEYS.items()}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(_convert(parse_text(text, str(path)), str(path)))
    env = os.environ if environ is None else environ
    from_env = {k[len(ENV_PREFIX):].lower(): v for k, v in env.items() if k.startswith(ENV_PREFIX)}
    values.update(_convert(from_env, "environment"))
    if overrides:
        values.update(_convert({k: v for k, v in overrides.items() if v is not None}, "command line"))
    cfg = RunConfig(**values)
    cfg.train_config()
    return cfg
