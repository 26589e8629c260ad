"""Multi-blade-coordinate IPC with output saturation, the comparator controller.

Blade loads are mapped to fixed-frame tilt and yaw moments, low-pass
filtered, integrated, and mapped back to blade pitch. The final command is
clipped to the angle box and then rate-limited, which is where the
flat-topped waveforms and their odd harmonics come from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .plant import BLADE_OFFSETS


def coleman_forward(loads, azimuth: float):
    """Rotating-frame blade loads to ``(tilt, yaw)``."""
    m = np.asarray(loads, dtype=float).reshape(3)
    psi = azimuth + BLADE_OFFSETS
    tilt = 2.0 / 3.0 * float(np.cos(psi) @ m)
    yaw = 2.0 / 3.0 * float(np.sin(psi) @ m)
    return tilt, yaw


def coleman_inverse(tilt: float, yaw: float, azimuth: float) -> np.ndarray:
    psi = azimuth + BLADE_OFFSETS
    return tilt * np.cos(psi) + yaw * np.sin(psi)


@dataclass
class MbcIpc:
    """Integral-only tilt/yaw controller.

    Attributes:
        ki: integral gain, deg per (kN m s). Positive for a plant whose
            load falls when pitch rises.
        azimuth_offset: phase lead (rad) added in the inverse transform to
            undo the pitch-to-load lag at 1P.
        dt: sample time, s.
        lpf_cutoff: tilt/yaw low-pass corner, Hz.
        u_min, u_max: angle box for the total pitch, deg.
        du_max: rate limit, deg/s.
        saturate: when False the output is neither clipped nor rate limited.
    """

    ki: float
    azimuth_offset: float
    dt: float
    lpf_cutoff: float
    u_max: float = 90.0
    du_max: float = 10.0
    u_min: float = 0.0
    saturate: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.lpf_cutoff <= 0:
            raise ConfigurationError("dt and lpf_cutoff must be positive")
        self.alpha = 1.0 - math.exp(-2.0 * math.pi * self.lpf_cutoff * self.dt)
        self.filtered = np.zeros(2)
        self.integrator = np.zeros(2)
        self.last_total: Optional[np.ndarray] = None

    def reset(self) -> None:
        self.filtered[:] = 0.0
        self.integrator[:] = 0.0
        self.last_total = None

    def ipc_demand(self, loads, azimuth_meas: float, azimuth_cmd: float) -> np.ndarray:
        """Advance the integrator with loads seen at ``azimuth_meas``; pitch offsets for ``azimuth_cmd``."""
        tilt, yaw = coleman_forward(loads, azimuth_meas)
        self.filtered += self.alpha * (np.array([tilt, yaw]) - self.filtered)
        self.integrator += self.ki * self.dt * self.filtered
        if not np.all(np.isfinite(self.integrator)):
            raise FloatingPointError("MBC integrator diverged")
        t, y = self.integrator
        return coleman_inverse(t, y, azimuth_cmd + self.azimuth_offset)

    def limit(self, total) -> np.ndarray:
        """Clip to the angle box, then to ``du_max * dt`` from the previous command."""
        total = np.asarray(total, dtype=float)
        if not self.saturate:
            self.last_total = total.copy()
            return total
        out = np.clip(total, self.u_min, self.u_max)
        if self.last_total is not None:
            step = self.du_max * self.dt
            out = np.clip(out, self.last_total - step, self.last_total + step)
        self.last_total = out.copy()
        return out


def mbc_step(ctl: MbcIpc, loads, azimuth: float, collective: float = 0.0,
             azimuth_cmd: Optional[float] = None) -> np.ndarray:
    """Pitch increments (deg) on top of ``collective`` after saturation.

    ``loads`` are measured at ``azimuth``; the command is evaluated at
    ``azimuth_cmd`` (defaults to the same angle).
    """
    azimuth_cmd = azimuth if azimuth_cmd is None else azimuth_cmd
    demand = ctl.ipc_demand(loads, azimuth, azimuth_cmd)
    total = ctl.limit(collective + demand)
    return total - collective
