"""Bundled worlds, scenarios, and negative fixtures."""

import os


def data_path(name: str) -> str:
    """Absolute path of a bundled data file."""
    return os.path.join(os.path.dirname(__file__), name)
