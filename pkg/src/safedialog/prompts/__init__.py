"""Versioned prompt templates with named placeholders.

Templates are plain UTF-8 text files shipped with the package; loaders cache
them, so they are immutable after first load.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = resources.files(__package__).joinpath(f"{name}.txt")
    return path.read_text(encoding="utf-8")
