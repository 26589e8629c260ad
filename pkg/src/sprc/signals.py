"""Azimuth-synchronised sample buffers and the periodic difference operator.

Samples are indexed by an absolute counter ``k`` starting at 0. The
period-difference of a signal is ``s[k] - s[k - P]``; it removes anything
that repeats exactly once per rotor revolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NotReadyError


@dataclass(frozen=True)
class PeriodClock:
    """Fixed-speed rotor clock.

    Attributes:
        samples_per_period: samples per revolution (P).
        dt: sample time in seconds.
    """

    samples_per_period: int
    dt: float

    def __post_init__(self):
        if int(self.samples_per_period) != self.samples_per_period or self.samples_per_period < 3:
            raise ConfigurationError("samples_per_period must be an integer >= 3")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")

    @property
    def period(self) -> float:
        return self.samples_per_period * self.dt

    @property
    def rotor_speed(self) -> float:
        return 2.0 * math.pi / self.period

    def azimuth_of(self, k: int) -> float:
        P = self.samples_per_period
        return 2.0 * math.pi * (k % P) / P

    def rotation_of(self, k: int) -> int:
        return k // self.samples_per_period


class DeltaBuffer:
    """Ring buffer holding the most recent ``capacity`` vectors of one signal."""

    def __init__(self, width: int, period: int, capacity: int):
        if capacity < period + 1:
            raise ConfigurationError("capacity must exceed the period")
        self.width = int(width)
        self.period = int(period)
        self.capacity = int(capacity)
        self._data = np.zeros((self.capacity, self.width))
        self.count = 0

    def push(self, value) -> None:
        v = np.asarray(value, dtype=float).reshape(-1)
        if v.size != self.width:
            raise ConfigurationError(f"expected width {self.width}, got {v.size}")
        self._data[self.count % self.capacity] = v
        self.count += 1

    def value(self, k: int) -> np.ndarray:
        if k < 0 or k >= self.count or k < self.count - self.capacity:
            raise NotReadyError(f"sample {k} not in buffer (count={self.count})")
        return self._data[k % self.capacity].copy()

    def delta(self, k: int) -> np.ndarray:
        if k - self.period < 0:
            raise NotReadyError(f"delta({k}) needs sample {k - self.period}")
        return self.value(k) - self.value(k - self.period)

    def deltas(self, k: int, p: int) -> np.ndarray:
        """Rows ``delta(k) .. delta(k+p-1)`` as a (p, width) array."""
        lo, hi = k - self.period, k + p - 1
        if lo < 0 or hi >= self.count or lo < self.count - self.capacity:
            raise NotReadyError(f"deltas({k}, {p}) not in buffer (count={self.count})")
        idx = np.arange(k, k + p)
        return self._data[idx % self.capacity] - self._data[(idx - self.period) % self.capacity]


@dataclass
class StackedWindow:
    """Period-differenced input/output windows, oldest sample first."""

    du: np.ndarray
    dy: np.ndarray
    p: int


class SignalBuffers:
    """Paired input/output buffers for the identifier.

    Capacity is ``P + p + 1`` so that, right after sample ``k`` is pushed,
    both the target ``delta(k)`` and the window ``k-p .. k-1`` are available.
    """

    def __init__(self, n_inputs: int, n_outputs: int, period: int, p: int):
        if p < 1:
            raise ConfigurationError("window length p must be >= 1")
        self.p = int(p)
        self.period = int(period)
        cap = self.period + self.p + 1
        self.u = DeltaBuffer(n_inputs, period, cap)
        self.y = DeltaBuffer(n_outputs, period, cap)

    @property
    def count(self) -> int:
        return self.u.count

    def push_sample(self, u, y) -> None:
        u = np.asarray(u, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if u.size != self.u.width or y.size != self.y.width:
            raise ConfigurationError(
                f"sample widths ({u.size}, {y.size}) do not match "
                f"({self.u.width}, {self.y.width})")
        self.u.push(u)
        self.y.push(y)

    def stacked_windows(self, k: int, p: int | None = None) -> StackedWindow:
        """Windows of period differences covering samples ``k .. k+p-1``."""
        p = self.p if p is None else int(p)
        du = self.u.deltas(k, p).reshape(-1)
        dy = self.y.deltas(k, p).reshape(-1)
        return StackedWindow(du=du, dy=dy, p=p)

    def regression_ready(self, k: int) -> bool:
        """True when the target at ``k`` and its past window exist."""
        return k - self.p - self.period >= 0 and k < self.count
