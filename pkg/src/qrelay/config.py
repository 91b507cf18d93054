"""Bench configuration: a single YAML file with full defaulting.

Every physical parameter can be overridden; unknown keys and out-of-range
values are rejected with :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from qrelay.errors import DomainError
from qrelay.source import CouplerParams, DetectorParams, LaserParams, QdSourceParams

BACKENDS = ("analytic", "montecarlo", "both")


class ConfigError(DomainError):
    """Raised for schema violations in a bench configuration."""


@dataclass(frozen=True)
class RunParams:
    seed: int = 7
    backend: str = "both"
    heralds_per_point: int = 10000
    duration_s: float | None = None
    output_dir: str = "qrelay-out"
    noise_disabled: bool = False

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed must be an unsigned 64-bit integer")
        if self.backend not in BACKENDS:
            raise ConfigError(f"run.backend must be one of {BACKENDS}")
        if self.heralds_per_point <= 0:
            raise ConfigError("run.heralds_per_point must be positive")
        if self.duration_s is not None and not self.duration_s > 0:
            raise ConfigError("run.duration_s must be positive")


@dataclass(frozen=True)
class AnalysisParams:
    bin_ps: int = 8
    t1_range_ps: tuple[int, int] = (-204, 204)
    t2_range_ps: tuple[int, int] = (-200, 1400)
    bb84_window_ps: tuple[int, int] = (88, 120)
    sweep_max_ps: tuple[int, int] = (200, 400)
    detuning_ghz: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    detuning_window_ps: tuple[int, int] = (24, 56)
    tomography_t1_window_ps: int = 72
    tomography_t2_bin_ps: int = 56
    tomography_t2_span_ps: int = 1008
    entanglement_tau_max_ps: int = 5000
    entanglement_bin_ps: int = 8
    entanglement_pairs: int = 2_000_000
    landscape_grid: tuple[int, int] = (37, 73)
    bootstrap_samples: int = 200

    def __post_init__(self):
        b = self.bin_ps
        if not 0 < b <= 8:
            raise ConfigError("analysis.bin_ps must lie in (0, 8]")
        for name in ("t1_range_ps", "t2_range_ps"):
            lo, hi = getattr(self, name)
            if hi <= lo or (hi - lo) % b:
                raise ConfigError(f"analysis.{name} must be a non-empty multiple of bin_ps")
        for name in ("bb84_window_ps", "sweep_max_ps", "detuning_window_ps"):
            a, c = getattr(self, name)
            if a <= 0 or c <= 0 or a % b or c % b:
                raise ConfigError(f"analysis.{name} entries must be positive multiples of bin_ps")
        if self.tomography_t1_window_ps <= 0 or self.tomography_t1_window_ps % b:
            raise ConfigError("analysis.tomography_t1_window_ps must be a positive multiple of bin_ps")
        if self.tomography_t2_bin_ps <= 0 or self.tomography_t2_bin_ps % b:
            raise ConfigError("analysis.tomography_t2_bin_ps must be a positive multiple of bin_ps")
        if self.tomography_t2_span_ps % self.tomography_t2_bin_ps or self.tomography_t2_span_ps <= 0:
            raise ConfigError("analysis.tomography_t2_span_ps must be a multiple of the tomography bin")
        if not self.detuning_ghz:
            raise ConfigError("analysis.detuning_ghz must not be empty")
        if self.entanglement_tau_max_ps <= 0 or self.entanglement_bin_ps <= 0:
            raise ConfigError("entanglement range and bin must be positive")
        if self.entanglement_pairs <= 0 or self.bootstrap_samples < 0:
            raise ConfigError("entanglement_pairs must be positive and bootstrap_samples non-negative")
        if min(self.landscape_grid) < 2:
            raise ConfigError("analysis.landscape_grid needs at least 2 points per axis")


_SECTIONS = {
    "source": QdSourceParams,
    "laser": LaserParams,
    "detector": DetectorParams,
    "coupler": CouplerParams,
    "run": RunParams,
    "analysis": AnalysisParams,
}


@dataclass(frozen=True)
class BenchConfig:
    source: QdSourceParams = field(default_factory=QdSourceParams)
    laser: LaserParams = field(default_factory=LaserParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    coupler: CouplerParams = field(default_factory=CouplerParams)
    run: RunParams = field(default_factory=RunParams)
    analysis: AnalysisParams = field(default_factory=AnalysisParams)

    # -- (de)serialization

    @classmethod
    def from_dict(cls, data: dict | None) -> BenchConfig:
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError("configuration root must be a mapping")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        kwargs = {}
        for name, typ in _SECTIONS.items():
            kwargs[name] = _build_section(name, typ, data.get(name) or {})
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for name in _SECTIONS:
            sec = getattr(self, name)
            out[name] = {f.name: _plain(getattr(sec, f.name)) for f in dataclasses.fields(sec)}
        return out

    @classmethod
    def from_yaml(cls, text: str) -> BenchConfig:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None
        return cls.from_dict(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def load(cls, path) -> BenchConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_yaml(text)

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form, excluding where outputs are written."""
        d = self.to_dict()
        del d["run"]["output_dir"]
        blob = json.dumps(d, sort_keys=True, allow_nan=True).encode()
        return hashlib.sha256(blob).digest()

    # -- derived configurations

    def replace(self, **sections) -> BenchConfig:
        return dataclasses.replace(self, **sections)

    def effective(self) -> BenchConfig:
        """Configuration actually simulated: the ideal limit when noise is disabled."""
        if not self.run.noise_disabled:
            return self
        return self.replace(
            source=dataclasses.replace(self.source, depolarization=0.0, coh2x_ps=math.inf,
                                       antibunching_ps=0.0),
            laser=dataclasses.replace(self.laser, detuning_ghz=0.0),
            detector=dataclasses.replace(self.detector, jitter_fwhm_ps=0.0, dark_cps=0.0,
                                         extinction_ratio_db=math.inf),
        )


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _coerce(section: str, key: str, default, value):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        if default and len(value) != len(default) and key != "detuning_ghz":
            raise ConfigError(f"{where} must have {len(default)} entries")
        elem = default[0] if default else 0.0
        return tuple(_coerce(section, key, elem, x) for x in value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    raise ConfigError(f"{where}: unsupported value")


def _build_section(name: str, typ, values):
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    defaults = typ()
    known = {f.name for f in dataclasses.fields(typ)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {sorted(unknown)}")
    kwargs = {k: _coerce(name, k, getattr(defaults, k), v) for k, v in values.items()}
    try:
        return typ(**kwargs)
    except ConfigError:
        raise
    except DomainError as exc:
        raise ConfigError(f"{name}: {exc}") from None
