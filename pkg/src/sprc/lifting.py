"""Period-lifted predictor assembled from Markov parameter blocks.

Only products of the predictor-form matrices are ever formed. With the
truncation ``A_tilde^i = 0`` for ``i >= p``, the per-sample model

    dy_t = sum_{i<p} Mu_i du_{t-1-i} + My_i dy_{t-1-i}

is lifted over one period of ``P`` samples. Terms reaching back into the
previous period form the ``gamma_*`` matrices; terms inside the current
period form the strictly lower block-Toeplitz ``H`` and ``G``. The implicit
output feedback is removed by forward substitution through ``(I - G)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisProjection
from .errors import ConfigurationError


@dataclass
class MarkovBlocks:
    """``m_u[i] = C At^i B`` (l, r) and ``m_y[i] = C At^i L`` (l, l), i < p."""

    m_u: np.ndarray
    m_y: np.ndarray

    @property
    def p(self) -> int:
        return self.m_u.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.m_u.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.m_u.shape[2]


@dataclass
class LiftedPredictor:
    gamma_ku: np.ndarray
    gamma_ky: np.ndarray
    h_hat: np.ndarray
    P: int


@dataclass
class ReducedModel:
    """Per-rotation state space on ``[Ybar; dtheta; dYbar]``."""

    a_bar: np.ndarray
    b_hat: np.ndarray

    @property
    def n_state(self) -> int:
        return self.a_bar.shape[0]

    @property
    def n_input(self) -> int:
        return self.b_hat.shape[1]


def extract_blocks(xi, p: int, r: int) -> MarkovBlocks:
    """Split ``xi = [C Ku, C Ky]`` into per-lag blocks.

    Column block ``j`` of each group multiplies the window sample ``j``
    (oldest first), i.e. lag ``p - j``, so it holds lag index ``p - 1 - j``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2:
        raise ConfigurationError("xi must be a matrix")
    l, cols = xi.shape
    if cols != p * (r + l):
        raise ConfigurationError(f"xi has {cols} columns, expected p(r+l) = {p * (r + l)}")
    xu = xi[:, :p * r].reshape(l, p, r).transpose(1, 0, 2)
    xy = xi[:, p * r:].reshape(l, p, l).transpose(1, 0, 2)
    return MarkovBlocks(m_u=xu[::-1].copy(), m_y=xy[::-1].copy())


def _toeplitz_strict(blocks: np.ndarray, P: int) -> np.ndarray:
    p, l, w = blocks.shape
    out = np.zeros((l * P, w * P))
    for s in range(1, P):
        for d in range(1, min(p, s) + 1):
            q = s - d
            out[s * l:(s + 1) * l, q * w:(q + 1) * w] = blocks[d - 1]
    return out


def _carry_over(blocks: np.ndarray, P: int) -> np.ndarray:
    # block (s, q) = m[P - 1 - q + s] while that lag is < p
    p, l, w = blocks.shape
    out = np.zeros((l * P, w * P))
    for s in range(min(p, P)):
        for q in range(P - p + s, P):
            i = P - 1 - q + s
            out[s * l:(s + 1) * l, q * w:(q + 1) * w] = blocks[i]
    return out


def toeplitz_matrices(blocks: MarkovBlocks, P: int):
    """Dense ``(H_tilde, G_tilde, Gamma Ku, Gamma Ky)`` before feedback removal."""
    return (_toeplitz_strict(blocks.m_u, P), _toeplitz_strict(blocks.m_y, P),
            _carry_over(blocks.m_u, P), _carry_over(blocks.m_y, P))


def forward_substitute(m_y: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I - G_tilde) X = rhs`` using the band structure of ``G_tilde``.

    Row block ``s`` of the solution is ``rhs_s + sum_i m_y[i] X_{s-1-i}``.
    """
    p, l, _ = m_y.shape
    P = rhs.shape[0] // l
    X = np.array(rhs, dtype=float, copy=True)
    for s in range(1, P):
        acc = X[s * l:(s + 1) * l]
        for i in range(min(p, s)):
            q = s - 1 - i
            acc += m_y[i] @ X[q * l:(q + 1) * l]
    return X


def assemble_lifted(blocks: MarkovBlocks, P: int) -> LiftedPredictor:
    if P < blocks.p:
        raise ConfigurationError("period must be at least the past window length")
    h_t, _, gk_u, gk_y = toeplitz_matrices(blocks, P)
    r = blocks.n_inputs
    rhs = np.hstack([h_t, gk_u, gk_y])
    sol = forward_substitute(blocks.m_y, rhs)
    n = r * P
    return LiftedPredictor(h_hat=sol[:, :n], gamma_ku=sol[:, n:2 * n],
                           gamma_ky=sol[:, 2 * n:], P=P)


def predict_period(lifted: LiftedPredictor, y_prev, du_prev, dy_prev, du_next) -> np.ndarray:
    """Next-period stacked output from the lifted equation."""
    return (np.asarray(y_prev) + lifted.gamma_ku @ du_prev
            + lifted.gamma_ky @ dy_prev + lifted.h_hat @ du_next)


def reduce(lifted: LiftedPredictor, phi: BasisProjection,
           phi_out: BasisProjection | None = None) -> ReducedModel:
    """Project the lifted predictor onto the 1P basis.

    State ordering is ``[Ybar (b l); dtheta (b r); dYbar (b l)]``.
    """
    phi_out = phi if phi_out is None else phi_out
    if phi.samples_per_period != lifted.P or phi_out.samples_per_period != lifted.P:
        raise ConfigurationError("basis period does not match the lifted predictor")
    if lifted.h_hat.shape != (phi_out.phi.shape[0], phi.phi.shape[0]):
        raise ConfigurationError("basis widths do not match the lifted predictor")
    m_u = phi_out.phi_pinv @ lifted.gamma_ku @ phi.phi
    m_y = phi_out.phi_pinv @ lifted.gamma_ky @ phi_out.phi
    m_h = phi_out.phi_pinv @ lifted.h_hat @ phi.phi
    ny, nu = m_u.shape
    n = 2 * ny + nu
    a = np.zeros((n, n))
    a[:ny, :ny] = np.eye(ny)
    a[:ny, ny:ny + nu] = m_u
    a[:ny, ny + nu:] = m_y
    a[ny + nu:, ny:ny + nu] = m_u
    a[ny + nu:, ny + nu:] = m_y
    b = np.vstack([m_h, np.eye(nu), m_h])
    return ReducedModel(a_bar=a, b_hat=b)
