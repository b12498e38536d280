"""Named parameter presets shipped as package data.

Each recipe is a plain TOML config file; loading one is equivalent to
passing the same file to --config. Recipes are pure data, never code
branches.
"""

from __future__ import annotations

from importlib import resources

try:
    import tomllib as _toml
except ImportError:                                     # python < 3.11
    import tomli as _toml

from ..config import RunConfig, parse_config
from ..errors import ConfigurationError


def _recipe_root():
    return resources.files(__package__)


def list_recipes() -> list[str]:
    names = [entry.name[:-5] for entry in _recipe_root().iterdir()
             if entry.name.endswith(".toml")]
    return sorted(names)


def recipe_text(name: str) -> str:
    """Raw TOML text of a named recipe."""
    entry = _recipe_root() / f"{name}.toml"
    if not entry.is_file():
        raise ConfigurationError(
            f"unknown recipe {name!r}; available: {', '.join(list_recipes())}"
        )
    return entry.read_text()


def load_recipe(name: str) -> RunConfig:
    return parse_config(_toml.loads(recipe_text(name)), recipe=name)
