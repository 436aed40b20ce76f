"""Flat key=value configuration with CLI flag overrides.  The only
environment variable honored is PRIVSHARE_CONFIG (path to the file)."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError

ENV_CONFIG = "PRIVSHARE_CONFIG"


@dataclass
class Config:
    data_dir: str = "./privshare-data"
    client_dir: str = "./privshare-client"
    sharing_host: str = "127.0.0.1"
    sharing_port: int = 7701
    search_host: str = "127.0.0.1"
    search_port: int = 7702
    scale_bits: int = 16
    range_bits: int = 24
    alpha: float = 0.5
    prime_bits: int = 512
    grid: int = 3
    ot_pad_factor: int = 4
    workers: int = 1


def _coerce(name: str, kind, raw: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ParseError(f"config key {name}: {exc}") from exc


def load_config(path: str | None = None) -> Config:
    cfg = Config()
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return cfg
    text = Path(path).read_text(encoding="utf-8")
    known = {f.name: f.type for f in fields(Config)}
    types = {"int": int, "float": float, "str": str}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip().strip('"')
        if key not in known:
            raise ParseError(f"config line {lineno}: unknown key {key!r}")
        kind = types.get(known[key], str) if isinstance(known[key], str) else known[key]
        setattr(cfg, key, _coerce(key, kind, value))
    return cfg
