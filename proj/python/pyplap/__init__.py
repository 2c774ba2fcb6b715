"""Python interface to the plap obstacle-problem solvers."""

import json
from pathlib import Path

from ._plap import (
    ConfigError,
    PlapError,
    __version__,
    constant_audit,
    evaluate,
    exponent_catalog,
    p_laplacian,
    residual_scan,
    run_config_json,
    solve_obstacle,
)


def run_config(path, out_dir=None, write_files=False):
    """Run an experiment config and return the report as a dict."""
    out = None if out_dir is None else Path(out_dir)
    return json.loads(run_config_json(Path(path), out, write_files))


__all__ = [
    "ConfigError",
    "PlapError",
    "__version__",
    "constant_audit",
    "evaluate",
    "exponent_catalog",
    "p_laplacian",
    "residual_scan",
    "run_config",
    "solve_obstacle",
]
