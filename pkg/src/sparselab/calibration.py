"""Versioned key=value store of empirically frozen constants."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .errors import InvalidInput

__all__ = ["load", "parse", "version"]


def parse(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"line {ln}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


@lru_cache(maxsize=1)
def load() -> dict:
    text = resources.files("sparselab").joinpath("data/calibration.txt").read_text()
    return parse(text)


def version() -> int:
    return int(load()["version"])
