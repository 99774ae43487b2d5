"""Reconstruct structural temperature-change fields from displacement and strain sensors."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

SCENARIOS = (
    "bar-1",
    "plate-6",
    "plate-14",
    "bridge-8",
    "bridge-20",
    "dam-reduced-27",
    "dam-reduced-36",
    "dam-reduced-59",
)


def data_path(name: str = "") -> Path:
    """Path of a bundled data file (or the data directory when ``name`` is empty)."""
    root = Path(str(resources.files(__package__) / "data"))
    return root / name if name else root


def scenario_path(name: str) -> Path:
    """Bundled scenario file for one of :data:`SCENARIOS`."""
    if name not in SCENARIOS:
        raise KeyError(f"unknown bundled scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return data_path(f"{name}.scenario.json")
