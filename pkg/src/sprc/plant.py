"""Surrogate three-bladed rotor: blade loads, wind and baseline collective pitch.

Each blade maps pitch (deg) to its out-of-plane root moment (kN m) through
the same second-order low-pass, discretised with a zero-order hold so the
load at sample k depends only on pitch up to k-1. An azimuth-locked 1P/2P
disturbance and white measurement noise are added on top.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import cont2discrete, lfilter

from .errors import ConfigurationError

log = logging.getLogger(__name__)

BLADE_OFFSETS = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
PITCH_ENVELOPE = (-5.0, 90.0)


@dataclass
class PlantConfig:
    samples_per_period: int = 128
    rotor_speed: float = 2.0 * math.pi / 6.25   # rad/s, 9.6 rpm
    natural_freq_ratio: float = 0.6             # blade filter corner / 1P
    damping: float = 0.7
    gain: float = -3000.0                       # kN m per deg at DC
    dist_amp_1p: float = 2000.0                 # kN m
    dist_amp_2p: float = 400.0                  # kN m
    noise_sigma: float = 20.0                   # kN m
    seed: int = 1

    @property
    def dt(self) -> float:
        return 2.0 * math.pi / (self.rotor_speed * self.samples_per_period)

    @property
    def period(self) -> float:
        return self.samples_per_period * self.dt


class SurrogatePlant:
    """Three identical blade channels with an azimuth-locked disturbance."""

    def __init__(self, cfg: PlantConfig | None = None, wind_ref: float = 16.0):
        self.cfg = cfg or PlantConfig()
        c = self.cfg
        if c.samples_per_period < 3:
            raise ConfigurationError("samples_per_period must be >= 3")
        wn = c.natural_freq_ratio * c.rotor_speed
        A = np.array([[0.0, 1.0], [-wn * wn, -2.0 * c.damping * wn]])
        B = np.array([[0.0], [wn * wn]])
        C = np.array([[1.0, 0.0]])
        Ad, Bd, Cd, Dd, _ = cont2discrete((A, B, C, np.zeros((1, 1))), c.dt, method="zoh")
        if np.max(np.abs(np.linalg.eigvals(Ad))) >= 1.0:
            raise ConfigurationError("blade filter is unstable")
        self.Ad, self.Bd, self.Cd = Ad, Bd[:, 0], Cd[0]
        self.wind_ref = float(wind_ref)
        self.rng = np.random.default_rng([c.seed, 0xB1ADE])
        self.x = np.zeros((2, 3))
        self.k = 0

    @property
    def dt(self) -> float:
        return self.cfg.dt

    def azimuth(self, k: int | None = None) -> float:
        k = self.k if k is None else k
        P = self.cfg.samples_per_period
        return 2.0 * np.pi * (k % P) / P

    def settle(self, pitch) -> None:
        """Put every blade filter in steady state for a constant pitch."""
        pitch = np.broadcast_to(np.asarray(pitch, dtype=float), (3,))
        xs = np.linalg.solve(np.eye(2) - self.Ad, self.Bd)
        self.x = np.outer(xs, pitch)

    def frequency_response(self, cycles_per_rev: float = 1.0) -> complex:
        """Discrete pitch-to-load response (including gain) at a rotor harmonic."""
        w = 2.0 * np.pi * cycles_per_rev / self.cfg.samples_per_period
        z = np.exp(1j * w)
        h = self.Cd @ np.linalg.solve(z * np.eye(2) - self.Ad, self.Bd)
        return complex(self.cfg.gain * h)

    def disturbance(self, k: int, wind: float) -> np.ndarray:
        psi = self.azimuth(k) + BLADE_OFFSETS
        c = self.cfg
        mod = (wind / self.wind_ref) ** 2
        return c.dist_amp_1p * np.cos(psi) * mod + c.dist_amp_2p * np.cos(2.0 * psi)

    def step(self, wind: float, pitch) -> np.ndarray:
        """Advance one sample; returns the blade loads for the current sample."""
        pitch = np.asarray(pitch, dtype=float).reshape(3)
        lo, hi = PITCH_ENVELOPE
        if np.any(pitch < lo) or np.any(pitch > hi):
            log.warning("pitch command %s outside [%g, %g], clamped", pitch, lo, hi)
            pitch = np.clip(pitch, lo, hi)
        c = self.cfg
        y = c.gain * (self.Cd @ self.x) + self.disturbance(self.k, wind)
        if c.noise_sigma > 0:
            y = y + self.rng.normal(0.0, c.noise_sigma, 3)
        self.x = self.Ad @ self.x + np.outer(self.Bd, pitch)
        self.k += 1
        return y


def step_plant(plant: SurrogatePlant, wind_sample: float, pitch_command) -> np.ndarray:
    return plant.step(wind_sample, pitch_command)


# -- wind --------------------------------------------------------------------

_WIND_BLOCK = 8192


@dataclass
class WindField:
    """Mean wind plus first-order coloured turbulence with std ``TI * mean``."""

    mean_speed: float
    turbulence_intensity: float = 0.0
    seed: int = 0
    dt: float = 6.25 / 128
    time_constant: float = 2.0
    _series: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.turbulence_intensity < 0:
            raise ConfigurationError("turbulence intensity must be >= 0")
        self._series = np.zeros(0)
        self._state = None

    @property
    def laminar(self) -> bool:
        return self.turbulence_intensity == 0.0

    def _extend(self, n: int) -> None:
        a = math.exp(-self.dt / self.time_constant)
        std = self.turbulence_intensity * self.mean_speed
        parts = [self._series]
        b = self._series.size // _WIND_BLOCK
        while sum(p.size for p in parts) < n:
            rng = np.random.default_rng([self.seed, 0x714D, b])
            w = rng.standard_normal(_WIND_BLOCK)
            if self._state is None:
                self._state = std * w[0]
                w = w[1:]
                head = [self._state]
            else:
                head = []
            y, zf = lfilter([std * math.sqrt(1.0 - a * a)], [1.0, -a], w,
                            zi=[a * self._state])
            self._state = y[-1]
            parts.append(np.concatenate([head, y]))
            b += 1
        self._series = np.concatenate(parts)

    def sample(self, k: int) -> float:
        if self.laminar:
            return float(self.mean_speed)
        if k >= self._series.size:
            self._extend(k + 1)
        return float(self.mean_speed + self._series[k])


def sample_wind(field_: WindField, k: int) -> float:
    return field_.sample(k)


# -- baseline collective pitch ---------------------------------------------

DEFAULT_SCHEDULE = ((3.0, 0.0), (11.4, 0.0), (12.0, 4.0), (16.0, 12.0), (20.0, 17.5), (25.0, 23.0))


@dataclass
class BaselineCpc:
    """Gain-scheduled collective pitch with a PI rotor-speed correction.

    The schedule is evaluated at a slowly tracked mean wind. A first-order
    rotor-speed error, driven by the gap between actual and tracked wind
    and relieved by pitching, feeds a PI loop whose output is added to the
    scheduled pitch. Output slew is limited to ``rate_limit`` deg/s.
    """

    schedule: tuple = DEFAULT_SCHEDULE
    track_time: float = 30.0
    wind_torque: float = 0.1
    pitch_torque: float = 1.0
    kp: float = 0.5
    ki: float = 0.0625
    rate_limit: float = 5.0
    dt: float = 6.25 / 128

    def __post_init__(self):
        sw = np.array([p[0] for p in self.schedule], dtype=float)
        sp = np.array([p[1] for p in self.schedule], dtype=float)
        if np.any(np.diff(sw) <= 0) or np.any(np.diff(sp) < 0):
            raise ConfigurationError("pitch schedule must be monotone in wind speed")
        self._sw, self._sp = sw, sp
        self.v_track = None
        self.omega_err = 0.0
        self.integ = 0.0
        self.pitch = None

    def scheduled(self, wind: float) -> float:
        return float(np.interp(wind, self._sw, self._sp))

    def reset(self, wind: float) -> None:
        self.v_track = float(wind)
        self.omega_err = 0.0
        self.integ = 0.0
        self.pitch = self.scheduled(wind)

    @property
    def correction(self) -> float:
        return self.kp * self.omega_err + self.ki * self.integ

    def step(self, wind: float) -> float:
        if self.v_track is None:
            self.reset(wind)
        dt = self.dt
        self.v_track += dt / self.track_time * (wind - self.v_track)
        corr = self.correction
        self.omega_err += dt * (self.wind_torque * (wind - self.v_track) - self.pitch_torque * corr)
        self.integ += dt * self.omega_err
        target = self.scheduled(self.v_track) + self.correction
        lim = self.rate_limit * dt
        self.pitch = self.pitch + min(max(target - self.pitch, -lim), lim)
        return self.pitch


def collective_pitch(cpc: BaselineCpc, wind_sample: float) -> float:
    return cpc.step(wind_sample)
