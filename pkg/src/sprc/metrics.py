"""Post-processing: duty cycle, spectra, harmonic amplitudes and limit audits."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import welch

from .errors import ConfigurationError, NotReadyError


def _as_2d(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass
class AdcReport:
    adc_percent: list
    window: tuple

    def to_dict(self) -> dict:
        return {"adc_percent": list(self.adc_percent), "window": list(self.window)}

    @property
    def mean(self) -> float:
        return float(np.mean(self.adc_percent))


def adc(pitch_series, dt: float, du_max: float, window: Optional[tuple] = None,
        min_samples: int = 2) -> AdcReport:
    """Actuator duty cycle in percent.

    ``100 * mean(|diff(pitch)| / dt) / du_max`` over the samples in
    ``window = (start_s, end_s)`` (whole series when None), per column.

    Raises:
        ConfigurationError: ``du_max <= 0`` or the window holds fewer than
            ``min_samples`` samples.
    """
    if du_max <= 0:
        raise ConfigurationError("du_max must be positive")
    x = _as_2d(pitch_series)
    n = x.shape[0]
    if window is None:
        window = (0.0, n * dt)
    i0 = max(0, int(round(window[0] / dt)))
    i1 = min(n, int(round(window[1] / dt)))
    if i1 - i0 < max(2, min_samples):
        raise ConfigurationError("ADC window too short")
    rate = np.abs(np.diff(x[i0:i1], axis=0)) / dt
    pct = 100.0 * rate.mean(axis=0) / du_max
    return AdcReport(adc_percent=[float(v) for v in pct], window=(i0 * dt, i1 * dt))


@dataclass
class PsdReport:
    frequencies: np.ndarray
    density: np.ndarray          # (n_freq, n_channels)
    segment_len: int
    overlap: float
    window: str = "hann"

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def bin_density(self, freq: float) -> np.ndarray:
        """Density of the bin nearest ``freq``, per channel."""
        i = int(np.argmin(np.abs(self.frequencies - freq)))
        return self.density[i]

    def band_power(self, f_lo: float, f_hi: float) -> np.ndarray:
        sel = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        return self.density[sel].sum(axis=0) * self.resolution

    def to_dict(self) -> dict:
        return {"frequencies": self.frequencies.tolist(), "density": self.density.tolist(),
                "segment_len": self.segment_len, "overlap": self.overlap, "window": self.window}

    def write_csv(self, path) -> None:
        """Columns: ``freq_hz, ch0, ch1, ...``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz"] + [f"ch{i}" for i in range(self.density.shape[1])])
            for f, row in zip(self.frequencies, self.density):
                w.writerow([repr(float(f))] + [repr(float(v)) for v in row])


def psd(series, dt: float, segment_len: int, overlap: float = 0.5) -> PsdReport:
    """Welch averaged periodogram with a Hann window, one-sided density.

    Raises:
        NotReadyError: fewer than ``2 * segment_len`` samples.
    """
    x = _as_2d(series)
    if segment_len < 2:
        raise ConfigurationError("segment_len must be >= 2")
    if x.shape[0] < 2 * segment_len:
        raise NotReadyError(f"need {2 * segment_len} samples, have {x.shape[0]}")
    if not 0.0 <= overlap < 1.0:
        raise ConfigurationError("overlap must lie in [0, 1)")
    f, d = welch(x, fs=1.0 / dt, window="hann", nperseg=segment_len,
                 noverlap=int(round(overlap * segment_len)), detrend="constant",
                 scaling="density", axis=0)
    return PsdReport(frequencies=f, density=d, segment_len=segment_len, overlap=overlap)


def harmonic_amplitude(series, samples_per_period: int, harmonic: float = 1.0) -> np.ndarray:
    """Single-bin DFT amplitude at ``harmonic`` times the rotor frequency.

    Uses the largest whole number of rotations at the end of the series.
    A sinusoid of amplitude A on that bin returns A.
    """
    x = _as_2d(series)
    P = samples_per_period
    n = (x.shape[0] // P) * P
    if n == 0:
        raise NotReadyError("series shorter than one rotation")
    x = x[x.shape[0] - n:]
    k = np.arange(n)
    e = np.exp(-2j * np.pi * harmonic * k / P)
    return 2.0 * np.abs(e @ x) / n


def one_p_amplitude(series, samples_per_period: int) -> np.ndarray:
    return harmonic_amplitude(series, samples_per_period, 1.0)


@dataclass
class ViolationReport:
    max_excess: float            # deg above u_max (or below u_min), >= 0
    max_rate_excess: float       # deg/s above du_max, >= 0
    angle_count: int
    rate_count: int
    max_rate: float

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def clean(self) -> bool:
        return self.angle_count == 0 and self.rate_count == 0


def audit_constraints(pitch_series, u_max: float, du_max: float, dt: float,
                      u_min: float = 0.0, tol: float = 0.0) -> ViolationReport:
    """Exact per-sample audit of the angle box and the sample-to-sample rate.

    A sample counts as a violation when it exceeds a bound by more than
    ``tol`` (deg for angles, deg per sample for rates).
    """
    x = _as_2d(pitch_series)
    over = np.maximum(x - u_max, u_min - x)
    max_ex = max(0.0, float(over.max())) if x.size else 0.0
    n_angle = int(np.sum(over > tol))
    if x.shape[0] > 1:
        step = np.abs(np.diff(x, axis=0))
        rate_over = step - du_max * dt
        max_rate_ex = max(0.0, float(rate_over.max())) / dt
        n_rate = int(np.sum(rate_over > tol))
        max_rate = float(step.max()) / dt
    else:
        max_rate_ex, n_rate, max_rate = 0.0, 0, 0.0
    return ViolationReport(max_ex, max_rate_ex, n_angle, n_rate, max_rate)


def leakage_amplitude(pitch, reference, fit) -> float:
    """Largest out-of-basis deviation ``|pitch - reference - fit|`` (deg)."""
    d = np.asarray(pitch, dtype=float) - np.asarray(reference, dtype=float) - np.asarray(fit, dtype=float)
    return float(np.max(np.abs(d))) if d.size else 0.0


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_rows_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
