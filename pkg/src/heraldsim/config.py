"""Scenario configuration: model parameters with dotted-key overrides.

Overrides use ``namespace.field=value`` keys, e.g. ``source.eta_q=0.5`` or
``scan.delay_step_us=5``.  Config files hold one such assignment per line;
blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams
from .decoherence import LarmorParams
from .readout import BASIS_ROTATION, PI_TRANSFER, RabiParams, ReadoutParams
from .source import SourceParams

OUTPUT_DIR_ENV = "HERALDSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "sim-output"

SCENARIOS = (
    "fig2_readout",
    "fig3_tomography",
    "fig3d_delay",
    "fig4_timing",
    "fig4c_noise",
    "appx_rabi",
    "appx_precession",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanSettings:
    """Sweep grids and estimator settings that are not physical parameters."""

    duration_max_us: float = 15.0
    duration_points: int = 30
    histogram_duration_us: float = 7.5
    delay_max_us: float = 400.0
    delay_step_us: float = 10.0
    precession_max_us: float = 20.0
    precession_step_us: float = 0.25
    noise_min_hz: float = 1.0
    noise_max_hz: float = 1e9
    noise_points: int = 33
    fixed_gate_ns: float = 400.0
    herald_gate_ns: float = 40.0
    gate_max_ns: float = 400.0
    gate_points: int = 40
    histogram_bin_ns: float = 2.0
    rabi_max_pulses: float = 2.5
    rabi_points: int = 51
    n_bootstrap: int = 200
    write_events: bool = True


@dataclass(frozen=True)
class Model:
    source: SourceParams = field(default_factory=SourceParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    readout: ReadoutParams = field(default_factory=ReadoutParams)
    larmor: LarmorParams = field(default_factory=LarmorParams)
    transfer: RabiParams = PI_TRANSFER
    rotation: RabiParams = BASIS_ROTATION
    scan: ScanSettings = field(default_factory=ScanSettings)

    def with_overrides(self, overrides):
        groups = {}
        for key, raw in overrides.items():
            ns, _, name = key.partition(".")
            if not name or ns not in {f.name for f in dataclasses.fields(self)}:
                raise ConfigError(f"unknown override key {key!r}; expected <namespace>.<field>")
            part = getattr(self, ns)
            names = {f.name for f in dataclasses.fields(part)}
            if name not in names:
                raise ConfigError(f"unknown field {name!r} in {ns!r}; choose from {sorted(names)}")
            groups.setdefault(ns, {})[name] = _coerce(raw, getattr(part, name))
        try:
            updated = {ns: dataclasses.replace(getattr(self, ns), **vals) for ns, vals in groups.items()}
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return dataclasses.replace(self, **updated)

    def snapshot(self):
        return {f.name: dataclasses.asdict(getattr(self, f.name)) for f in dataclasses.fields(self)}


def _coerce(raw, current):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    low = text.lower()
    if low in ("none", "null"):
        return None
    if isinstance(current, bool):
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if current is None:
            try:
                return int(text)
            except ValueError:
                return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as a number") from exc
    return text


def parse_assignments(items):
    """``["a.b=1", ...]`` -> ``{"a.b": "1", ...}``."""
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def read_config_file(path):
    lines = Path(path).read_text().splitlines()
    items = [ln.split("#", 1)[0].strip() for ln in lines]
    return parse_assignments([ln for ln in items if ln])


def default_output_dir():
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int = 0
    trials: int | None = None
    overrides: dict = field(default_factory=dict)
    output_dir: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def model(self):
        return Model().with_overrides(self.overrides)

    @property
    def out(self):
        base = Path(self.output_dir) if self.output_dir is not None else default_output_dir()
        return base / self.scenario


def point_seed(master_seed, scenario, index):
    """Seed for one sweep point, fixed by (master seed, scenario, index) alone."""
    return np.random.SeedSequence([int(master_seed), zlib.crc32(scenario.encode()), int(index)])
