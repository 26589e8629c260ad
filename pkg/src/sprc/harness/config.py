"""Load-case configuration and the shipped presets.

A config file is YAML with an optional ``defaults`` mapping and a ``cases``
list. Each case entry is merged over the defaults (nested mappings merge
key by key) and validated into a :class:`LoadCase`.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Optional

import yaml

from ..errors import ConfigurationError

CONTROLLERS = ("baseline", "mbc", "sprc")


@dataclass
class SprcSettings:
    p: int = 12
    lam: float = 0.99999
    gamma: float = 1e4
    n_p: int = 4
    n_u: int = 2
    output_weight: float = 1e2
    theta_weight: float = 1.0
    r_weight: float = 1.0
    move_tail: str = "repeat"
    excitation_amplitude: float = 1.0
    excitation_mode: str = "filtered-noise"
    decay_rotations: float = 20.0
    residual_threshold: float = 0.5
    abort_streak: int = 10


@dataclass
class MbcSettings:
    ki: float = 2e-5
    lpf_ratio: float = 0.05             # low-pass corner as a fraction of 1P
    azimuth_offset: Optional[float] = None   # None: derived from the plant at 1P


@dataclass
class Seeds:
    wind: int = 11
    noise: int = 12
    excitation: int = 13


@dataclass
class LoadCase:
    """One closed-loop run.

    Time is in seconds and is rounded to whole rotations of the plant.
    The SPRC (or MBC) loop closes at ``identification_s``; the actuator
    limits enter the controller at ``constrained_from_s``.
    """

    id: str
    wind: float
    u_max: float
    du_max: float
    ti: float = 0.0
    u_min: float = 0.0
    controller: str = "sprc"
    identification_s: float = 300.0
    constrained_from_s: float = 900.0
    end_s: float = 1150.0
    constrained: bool = True
    tags: list = field(default_factory=list)
    seeds: Seeds = field(default_factory=Seeds)
    plant: dict = field(default_factory=dict)
    sprc: SprcSettings = field(default_factory=SprcSettings)
    mbc: MbcSettings = field(default_factory=MbcSettings)

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigurationError(f"unknown controller {self.controller!r}")
        if not 0.0 <= self.identification_s <= self.constrained_from_s <= self.end_s:
            raise ConfigurationError("durations must be monotone")
        if self.end_s <= 0:
            raise ConfigurationError("end_s must be positive")
        if not self.u_max > self.u_min or not self.du_max > 0:
            raise ConfigurationError("need u_max > u_min and du_max > 0")
        if self.ti < 0 or self.wind <= 0:
            raise ConfigurationError("wind must be positive and ti >= 0")

    @property
    def unconstrained_s(self) -> float:
        return self.constrained_from_s - self.identification_s

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def laminar(self) -> bool:
        return self.ti == 0.0

    def with_seed(self, seed: int) -> "LoadCase":
        """Derive all three seeds from one base value."""
        return self.with_overrides(seeds={"wind": seed, "noise": seed + 1, "excitation": seed + 2})

    def with_overrides(self, **kw) -> "LoadCase":
        d = self.to_dict()
        _deep_merge(d, kw)
        return case_from_dict(d)

    def config_hash(self) -> str:
        from .. import __version__
        blob = json.dumps({"case": self.to_dict(), "version": __version__}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _deep_merge(base: dict, over: dict) -> dict:
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_merge(base[k], v)
        else:
            base[k] = copy.deepcopy(v)
    return base


def _build(cls, data, name):
    if data is None:
        return cls()
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigurationError(f"{name} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigurationError(f"unknown {name} keys: {sorted(extra)}")
    return cls(**data)


def case_from_dict(d: dict) -> LoadCase:
    d = dict(d)
    known = {f.name for f in fields(LoadCase)}
    extra = set(d) - known
    if extra:
        raise ConfigurationError(f"unknown case keys: {sorted(extra)}")
    missing = {"id", "wind", "u_max", "du_max"} - set(d)
    if missing:
        raise ConfigurationError(f"case missing keys: {sorted(missing)}")
    d["seeds"] = _build(Seeds, d.get("seeds"), "seeds")
    d["sprc"] = _build(SprcSettings, d.get("sprc"), "sprc")
    d["mbc"] = _build(MbcSettings, d.get("mbc"), "mbc")
    if d.get("plant") is None:
        d["plant"] = {}
    try:
        return LoadCase(**d)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def parse_config(text: str) -> dict:
    """Parse YAML text into ``{case id: LoadCase}`` (file order kept)."""
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("cases"), list):
        raise ConfigurationError("config needs a 'cases' list")
    defaults = raw.get("defaults") or {}
    out = {}
    for entry in raw["cases"]:
        if not isinstance(entry, dict):
            raise ConfigurationError("each case must be a mapping")
        merged = _deep_merge(copy.deepcopy(defaults), entry)
        case = case_from_dict(merged)
        if case.id in out:
            raise ConfigurationError(f"duplicate case id {case.id}")
        out[case.id] = case
    return out


def load_cases(path=None) -> dict:
    """Cases from ``path``, or the shipped presets when None."""
    if path is None:
        text = resources.files("sprc.harness").joinpath("presets.yaml").read_text()
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def get_case(case_id: str, path=None, **overrides) -> LoadCase:
    cases = load_cases(path)
    if case_id not in cases:
        raise ConfigurationError(f"no case {case_id!r}; known: {', '.join(cases)}")
    case = cases[case_id]
    return case.with_overrides(**overrides) if overrides else case
