"""Bundled scenario files."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

NAMES = ("chemical_plant_v1", "chemical_plant_v2")


def path(name: str) -> Path:
    """Filesystem path of a bundled scenario (``name`` without extension)."""
    return Path(str(resources.files(__name__).joinpath(f"{name}.dcs")))


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
