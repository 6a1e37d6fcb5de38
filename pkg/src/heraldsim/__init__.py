"""Simulator for a heralded atom-photon entanglement source.

Modules: :mod:`qstate` (two-qubit states), :mod:`source` (emission events),
:mod:`decoherence` (atomic memory), :mod:`channel` (fiber and gating),
:mod:`readout` (atomic state detection), :mod:`tomography` (state
reconstruction) and :mod:`scenarios` (end-to-end runs).
"""

from importlib.metadata import PackageNotFoundError, version

from .config import ConfigError, Model, ScenarioConfig
from .fitting import CosineFit, FitError, GaussianDecayFit, fit_gaussian_decay, fit_oscillation
from .scenarios import ScenarioResult, run_scenario

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "ConfigError",
    "CosineFit",
    "FitError",
    "GaussianDecayFit",
    "Model",
    "ScenarioConfig",
    "ScenarioResult",
    "fit_gaussian_decay",
    "fit_oscillation",
    "run_scenario",
]
