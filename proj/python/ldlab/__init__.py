"""Python front end for the ldlab solvers.

Configs are plain dicts with the same schema as the JSON files read by the
``ldlab`` command line tool.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import _core
from ._core import ConfigError, core_integral, q_profile

__all__ = [
    "ConfigError",
    "core_integral",
    "gamma_sweep",
    "load_config",
    "normalize_config",
    "q_profile",
    "read_field",
    "read_state",
    "run",
]


def _text(config: Mapping[str, Any] | str | Path) -> str:
    if isinstance(config, Mapping):
        return json.dumps(config)
    return Path(config).read_text()


def normalize_config(config: Mapping[str, Any] | str | Path) -> dict:
    """Validate ``config`` and return it with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


def load_config(path: str | Path) -> dict:
    return normalize_config(Path(path))


def run(config: Mapping[str, Any] | str | Path, *, quiet: bool = True, **overrides: Any) -> tuple[bool, dict]:
    """Run the mode named in ``config``; keyword arguments replace top-level keys."""
    cfg = json.loads(_text(config))
    cfg.update(overrides)
    converged, summary = _core.run(json.dumps(cfg), quiet)
    return converged, json.loads(summary)


def gamma_sweep(config: Mapping[str, Any] | str | Path, *, quiet: bool = True, **overrides: Any) -> list[dict]:
    cfg = json.loads(_text(config))
    cfg.update(overrides)
    return _core.gamma_sweep(json.dumps(cfg), quiet)


def read_field(stem: str | Path) -> tuple[np.ndarray, dict]:
    """Read ``<stem>.bin`` with the shape recorded in ``<stem>.json``."""
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    data = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    return data.reshape(meta["shape"]), meta


def read_state(directory: str | Path) -> dict:
    """Load a state dump: ``u`` as a complex array [layer, y, x], ``A1..A3`` on box edges."""
    directory = Path(directory)
    u, _ = read_field(directory / "u")
    state = {"u": u[..., 0] + 1j * u[..., 1]}
    for name in ("A1", "A2", "A3"):
        state[name], _ = read_field(directory / name)
    state["meta"] = json.loads((directory / "state.json").read_text())
    return state
