"""Bundled example chains (JSON chain specs)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..model import ChainSpec, parse_spec


def fixture_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".json"))


def fixture_path(name: str) -> Path:
    path = resources.files(__name__) / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}; have {fixture_names()}")
    return Path(str(path))


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text()


def load_fixture(name: str) -> ChainSpec:
    return parse_spec(fixture_text(name))
