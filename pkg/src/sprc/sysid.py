"""Online estimation of the Markov matrix and the probing signal.

The estimator is a square-root (QR) recursive least-squares filter in
information form. It keeps an upper-triangular ``R`` with ``R.T @ R`` equal
to the exponentially weighted information matrix, and ``Z`` with
``R @ xi_hat.T = Z``. Each new sample is folded in by one Householder QR of
the stacked pre-array::

    [ sqrt(lam) R   sqrt(lam) Z ]
    [   x^T            y^T      ]

``R^-1`` is the square root of the inverse information (covariance) matrix.
"""

from __future__ import annotations

import copy
import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConditioningError, ConfigurationError
from .signals import StackedWindow

DEFAULT_FORGETTING = 0.99999
DIAG_FLOOR = 1e-12


@dataclass
class MarkovEstimate:
    """Running estimate of the Markov matrix.

    Attributes:
        r_factor: (n, n) upper-triangular information square root, positive diagonal.
        z: (n, l) right-hand side, ``r_factor @ xi_hat.T == z``.
        lam: forgetting factor in (0, 1].
        sample_count: number of accepted updates.
        rejected: number of updates skipped by the conditioning guard.
    """

    r_factor: np.ndarray
    z: np.ndarray
    lam: float = DEFAULT_FORGETTING
    sample_count: int = 0
    rejected: int = 0
    _xi_cache: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def initial(cls, n_regressor: int, n_outputs: int,
                lam: float = DEFAULT_FORGETTING, gamma: float = 1e4) -> "MarkovEstimate":
        """Zero estimate with a diffuse prior, ``R0 = I / gamma``."""
        if not 0.0 < lam <= 1.0:
            raise ConfigurationError("forgetting factor must lie in (0, 1]")
        if gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        return cls(r_factor=np.eye(n_regressor) / gamma,
                   z=np.zeros((n_regressor, n_outputs)), lam=float(lam))

    @property
    def n_regressor(self) -> int:
        return self.r_factor.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.z.shape[1]

    @property
    def xi_hat(self) -> np.ndarray:
        """Markov matrix estimate, shape (l, n)."""
        if self._xi_cache is None:
            self._xi_cache = solve_triangular(self.r_factor, self.z, lower=False).T
        return self._xi_cache

    def copy(self) -> "MarkovEstimate":
        return copy.deepcopy(self)

    def well_conditioned(self) -> bool:
        return bool(np.min(np.diag(self.r_factor)) > DIAG_FLOOR)

    def update(self, regressor, target) -> bool:
        """Fold one sample in place. Returns False when the guard skipped it."""
        x = np.asarray(regressor, dtype=float).reshape(-1)
        y = np.asarray(target, dtype=float).reshape(-1)
        n, l = self.n_regressor, self.n_outputs
        if x.size != n or y.size != l:
            raise ConfigurationError(
                f"regressor/target sizes ({x.size}, {y.size}) != ({n}, {l})")
        if not self.well_conditioned():
            self.rejected += 1
            return False
        s = math.sqrt(self.lam)
        pre = np.empty((n + 1, n + l))
        pre[:n, :n] = s * self.r_factor
        pre[:n, n:] = s * self.z
        pre[n, :n] = x
        pre[n, n:] = y
        post = np.linalg.qr(pre, mode="r")
        sign = np.sign(np.diag(post[:n, :n]))
        sign[sign == 0] = 1.0
        self.r_factor = np.triu(post[:n, :n] * sign[:, None])
        self.z = post[:n, n:] * sign[:, None]
        self.sample_count += 1
        self._xi_cache = None
        return True


def rls_update(est: MarkovEstimate, regressor, target) -> MarkovEstimate:
    """Return a new estimate with one more sample folded in.

    Raises:
        ConditioningError: the factor diagonal has collapsed below 1e-12.
    """
    if not est.well_conditioned():
        raise ConditioningError("information factor is ill-conditioned")
    new = est.copy()
    new.update(regressor, target)
    return new


def build_regressor(w: StackedWindow) -> np.ndarray:
    """Concatenate ``[dU; dY]`` in the estimator's column order."""
    du = np.asarray(w.du, dtype=float).reshape(-1)
    dy = np.asarray(w.dy, dtype=float).reshape(-1)
    if w.p < 1 or du.size % w.p or dy.size % w.p:
        raise ConfigurationError("window lengths must be multiples of p")
    return np.concatenate([du, dy])


def write_snapshots(path, snapshots) -> None:
    """Dump ``[(rotation, xi), ...]`` as CSV, one row-major matrix per row.

    The header line records ``rows`` and ``cols`` of every matrix.
    """
    snapshots = list(snapshots)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if not snapshots:
            w.writerow(["rows", 0, "cols", 0])
            return
        rows, cols = np.shape(snapshots[0][1])
        w.writerow(["rows", rows, "cols", cols])
        for rot, xi in snapshots:
            w.writerow([rot] + [repr(float(v)) for v in np.asarray(xi).ravel()])


def read_snapshots(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        rows, cols = int(head[1]), int(head[3])
        return [(int(row[0]), np.array(row[1:], dtype=float).reshape(rows, cols))
                for row in r]


# -- persistent excitation ---------------------------------------------------

@dataclass(frozen=True)
class ExcitationConfig:
    """Probing signal added to the pitch command.

    ``filtered-noise`` interpolates linearly between uniform random knots
    placed every ``knot_spacing`` samples (default P/16); the result is
    bounded by ``amplitude`` and broadband up to roughly 16P.
    ``multi-sine`` puts equal lines at 0.5P, 1P and 2P with seeded phases.
    Integer harmonics of 1P vanish under the period difference, so only the
    0.5P line excites the identifier in that mode.
    """

    amplitude: float = 1.0
    mode: str = "filtered-noise"
    seed: int = 0
    decay_rotations: Optional[float] = 20.0
    samples_per_period: int = 128
    n_channels: int = 3
    knot_spacing: Optional[int] = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigurationError("excitation amplitude must be >= 0")
        if self.mode not in ("filtered-noise", "multi-sine"):
            raise ConfigurationError(f"unknown excitation mode {self.mode!r}")


_KNOT_BLOCK = 1024


class _KnotTable:
    def __init__(self, seed: int, n_channels: int):
        self.seed = seed
        self.n = n_channels
        self._blocks = {}

    def knot(self, i: int) -> np.ndarray:
        b, off = divmod(i, _KNOT_BLOCK)
        blk = self._blocks.get(b)
        if blk is None:
            rng = np.random.default_rng([self.seed, b])
            blk = rng.uniform(-1.0, 1.0, size=(_KNOT_BLOCK, self.n))
            self._blocks[b] = blk
        return blk[off]


@functools.lru_cache(maxsize=64)
def _knots(seed: int, n: int) -> _KnotTable:
    return _KnotTable(seed, n)


@functools.lru_cache(maxsize=64)
def _sine_phases(seed: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, 0x51]).uniform(0, 2 * np.pi, size=(3, n))


def excitation(k: int, cfg: ExcitationConfig, ramp_start: Optional[int] = None) -> np.ndarray:
    """Perturbation (deg) for sample ``k``; deterministic in ``(k, cfg)``.

    With ``ramp_start`` set and ``cfg.decay_rotations`` given, the signal is
    scaled down linearly to exactly zero over that many rotations.
    """
    n = cfg.n_channels
    if cfg.amplitude == 0.0:
        return np.zeros(n)
    scale = cfg.amplitude
    if ramp_start is not None and cfg.decay_rotations is not None:
        span = cfg.decay_rotations * cfg.samples_per_period
        frac = 1.0 - (k - ramp_start) / span if span > 0 else 0.0
        if frac <= 0.0:
            return np.zeros(n)
        scale *= min(frac, 1.0)
    P = cfg.samples_per_period
    if cfg.mode == "multi-sine":
        ph = _sine_phases(cfg.seed, n)
        w = 2 * np.pi * k / P
        s = (np.sin(0.5 * w + ph[0]) + np.sin(w + ph[1]) + np.sin(2 * w + ph[2])) / 3.0
        return scale * s
    m = cfg.knot_spacing or max(1, P // 16)
    i, r = divmod(k, m)
    tbl = _knots(cfg.seed, n)
    a = r / m
    return scale * ((1.0 - a) * tbl.knot(i) + a * tbl.knot(i + 1))
