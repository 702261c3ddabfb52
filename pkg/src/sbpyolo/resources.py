"""Locate the configs and fixtures shipped inside the package."""

import os
from importlib import resources


def bundled_configs():
    root = resources.files("sbpyolo") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config(name_or_path):
    """Return a filesystem path for a config file or a bundled config name.

    Existing paths win; otherwise ``name_or_path`` (with or without the
    ``.cfg`` suffix) is looked up among the bundled configs.
    """
    if os.path.exists(name_or_path):
        return str(name_or_path)
    name = os.path.basename(str(name_or_path))
    if not name.endswith(".cfg"):
        name += ".cfg"
    candidate = resources.files("sbpyolo") / "configs" / name
    if candidate.is_file():
        return str(candidate)
    raise FileNotFoundError(
        f"no such config: {name_or_path} (bundled: {', '.join(bundled_configs())})"
    )


def data_path(name):
    path = resources.files("sbpyolo") / "data" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file {name}")
    return str(path)
