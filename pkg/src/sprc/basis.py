"""Once-per-revolution sinusoidal basis for per-period trajectories.

A period trajectory is stored sample-major: entry ``s*r + c`` is channel
``c`` at sample ``s``. The coefficient vector is ordered sine block first,
``theta = [sin_1..sin_r, cos_1..cos_r]``, which is what
``kron([sin psi, cos psi], I_r)`` produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

N_BASIS = 2


@dataclass(frozen=True, eq=False)
class BasisProjection:
    phi: np.ndarray
    phi_pinv: np.ndarray
    samples_per_period: int
    width: int

    @property
    def n_coeff(self) -> int:
        return N_BASIS * self.width

    def row(self, s: int) -> np.ndarray:
        """(width, n_coeff) block mapping theta to sample ``s``."""
        r = self.width
        return self.phi[s * r:(s + 1) * r]


def build_phi(P: int, r: int) -> BasisProjection:
    if P < 3:
        raise ConfigurationError("1P basis needs at least 3 samples per period")
    if r < 1:
        raise ConfigurationError("width must be positive")
    psi = 2.0 * np.pi * np.arange(P) / P
    uf = np.column_stack([np.sin(psi), np.cos(psi)])
    phi = np.kron(uf, np.eye(r))
    gram = phi.T @ phi
    phi_pinv = np.linalg.solve(gram, phi.T)
    return BasisProjection(phi=phi, phi_pinv=phi_pinv, samples_per_period=P, width=r)


def synthesize(phi: BasisProjection, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != phi.n_coeff:
        raise ConfigurationError(f"theta has {theta.size} entries, expected {phi.n_coeff}")
    return phi.phi @ theta


def project(phi: BasisProjection, y_period) -> np.ndarray:
    y = np.asarray(y_period, dtype=float).reshape(-1)
    if y.size != phi.phi.shape[0]:
        raise ConfigurationError(f"period vector has {y.size} entries, expected {phi.phi.shape[0]}")
    return phi.phi_pinv @ y
