"""Receding-horizon repetitive control on the reduced per-rotation model.

Decision vector ``U = [dtheta_{j+1}; ...; dtheta_{j+Nu}]``. Predictions
``X = A_pred K + B_pred U`` stack the reduced state over ``0..Np``. With the
default ``move_tail="repeat"`` the last move is repeated after ``Nu``, which
is where the tail sums in the last block column of ``B_pred`` come from;
``"hold"`` sets later moves to zero instead (theta frozen).

Pitch limits are imposed on every sample of every period trajectory inside
the control horizon. With ``ubar`` the collective-pitch forecast and
``theta_{j+i} = theta_j + sum_{m<=i} dtheta_{j+m}``:

* angle:  ``u_min <= ubar + phi theta_{j+i} <= u_max``
* rate:   ``|total(s) - total(s-1)| <= du_max * dt`` for every sample,
  including the wrap-around pair of each trajectory and the junction with
  the previous trajectory (the previously applied sample for ``i = 1``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qpsolver
from .basis import BasisProjection
from .errors import ConfigurationError, InfeasibleError
from .lifting import ReducedModel

log = logging.getLogger(__name__)


@dataclass
class HorizonConfig:
    n_p: int = 4
    n_u: int = 2
    q_weight: np.ndarray = None
    r_weight: np.ndarray = None
    move_tail: str = "repeat"

    def __post_init__(self):
        if not 1 <= self.n_u <= self.n_p:
            raise ConfigurationError("horizons must satisfy 1 <= n_u <= n_p")
        if self.move_tail not in ("repeat", "hold"):
            raise ConfigurationError("move_tail must be 'repeat' or 'hold'")
        if self.q_weight is None:
            self.q_weight = default_q()
        if self.r_weight is None:
            self.r_weight = np.eye(6)
        self.q_weight = np.asarray(self.q_weight, dtype=float)
        self.r_weight = np.asarray(self.r_weight, dtype=float)
        for name, m in (("Q", self.q_weight), ("R", self.r_weight)):
            if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T):
                raise ConfigurationError(f"{name} must be a symmetric square matrix")
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError as exc:
                raise ConfigurationError(f"{name} must be positive definite") from exc


def default_q(n_y: int = 6, n_theta: int = 6, output_weight: float = 1e2) -> np.ndarray:
    """Identity with the two output blocks scaled by ``output_weight``."""
    d = np.concatenate([np.full(n_y, output_weight), np.ones(n_theta), np.full(n_y, output_weight)])
    return np.diag(d)


@dataclass
class ConstraintSpec:
    """Actuator limits for one receding-horizon solve.

    Attributes:
        u_max: upper total-pitch limit, deg.
        du_max: pitch-rate limit, deg/s.
        dt: sample time, s.
        u_bar: collective-pitch forecast over one period, (P*r,) deg.
        u_min: lower total-pitch limit, deg.
        u_prev_last: total pitch applied at the last sample of the current
            period, (r,). When None the junction with it is not constrained.
    """

    u_max: float
    du_max: float
    dt: float
    u_bar: np.ndarray
    u_min: float = 0.0
    u_prev_last: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.u_max > 0 or not self.du_max > 0 or not self.dt > 0:
            raise ConfigurationError("u_max, du_max and dt must be positive")
        self.u_bar = np.asarray(self.u_bar, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.u_bar)):
            raise ConfigurationError("u_bar must be finite")

    @property
    def step_limit(self) -> float:
        return self.du_max * self.dt


@dataclass
class QpProblem:
    """``min U'HU + 2 linear'U  s.t.  g_ineq U <= w_ineq``."""

    hessian: np.ndarray
    linear: np.ndarray
    g_ineq: np.ndarray
    w_ineq: np.ndarray


@dataclass
class StepResult:
    delta_theta: np.ndarray
    status: str
    u_opt: np.ndarray
    solution: Optional[qpsolver.QpSolution] = None
    fallback: bool = False
    notes: list = field(default_factory=list)


def build_prediction(model: ReducedModel, cfg: HorizonConfig):
    """Stacked prediction matrices ``(A_pred, B_pred)`` with ``X = A_pred K + B_pred U``."""
    A, B = model.a_bar, model.b_hat
    n, m = model.n_state, model.n_input
    Np, Nu = cfg.n_p, cfg.n_u
    powers = [np.eye(n)]
    for _ in range(Np):
        powers.append(A @ powers[-1])
    a_pred = np.vstack(powers)
    b_pred = np.zeros((n * (Np + 1), m * Nu))
    for i in range(1, Np + 1):
        rows = slice(i * n, (i + 1) * n)
        for c in range(Nu - 1):
            if i - 1 - c >= 0:
                b_pred[rows, c * m:(c + 1) * m] = powers[i - 1 - c] @ B
        if i >= Nu:
            if cfg.move_tail == "repeat":
                tail = sum(powers[t] for t in range(i - Nu + 1))
            else:
                tail = powers[i - Nu]
            b_pred[rows, (Nu - 1) * m:] = tail @ B
    return a_pred, b_pred


def _weights(cfg: HorizonConfig, n_state: int, n_input: int):
    if cfg.q_weight.shape != (n_state, n_state) or cfg.r_weight.shape != (n_input, n_input):
        raise ConfigurationError("weight matrices do not match the model dimensions")
    Qb = np.kron(np.eye(cfg.n_p + 1), cfg.q_weight)
    Rb = np.kron(np.eye(cfg.n_u), cfg.r_weight)
    return Qb, Rb


def cost(model: ReducedModel, state, U, cfg: HorizonConfig) -> float:
    a_pred, b_pred = build_prediction(model, cfg)
    Qb, Rb = _weights(cfg, model.n_state, model.n_input)
    X = a_pred @ np.asarray(state) + b_pred @ np.asarray(U)
    return float(X @ Qb @ X + U @ Rb @ U)


def qp_cost_terms(model: ReducedModel, state, cfg: HorizonConfig):
    """Hessian ``B'QB + R`` and linear term ``F' K`` with ``F = A'QB``."""
    a_pred, b_pred = build_prediction(model, cfg)
    Qb, Rb = _weights(cfg, model.n_state, model.n_input)
    H = b_pred.T @ Qb @ b_pred + Rb
    F = a_pred.T @ Qb @ b_pred
    return 0.5 * (H + H.T), F.T @ np.asarray(state, dtype=float)


def _cumulative_selectors(n_theta: int, n_u: int):
    return [np.hstack([np.eye(n_theta) if c < i else np.zeros((n_theta, n_theta))
                       for c in range(n_u)]) for i in range(1, n_u + 1)]


def build_constraints(spec: ConstraintSpec, phi: BasisProjection, theta_j, cfg: HorizonConfig):
    """Stack angle and rate limits over the control horizon into ``G U <= W``.

    Raises:
        InfeasibleError: the angle box itself is empty for some sample.
    """
    Phi = phi.phi
    r = phi.width
    P = phi.samples_per_period
    nt = phi.n_coeff
    theta_j = np.asarray(theta_j, dtype=float).reshape(-1)
    ubar = spec.u_bar
    if ubar.size != P * r:
        raise ConfigurationError(f"u_bar must have {P * r} entries")
    if spec.u_max < spec.u_min:
        raise InfeasibleError("u_max below u_min")
    lim = spec.step_limit

    base = ubar + Phi @ theta_j              # trajectory if theta is held
    prev_idx = (np.arange(P) - 1) % P
    D_rows = np.arange(P * r).reshape(P, r)
    prev_rows = D_rows[prev_idx].reshape(-1)
    DPhi = Phi - Phi[prev_rows]
    Dbase = base - base[prev_rows]
    phi0, philast = Phi[:r], Phi[(P - 1) * r:]

    sels = _cumulative_selectors(nt, cfg.n_u)
    G_parts, W_parts = [], []
    for i, S in enumerate(sels, start=1):
        PS = Phi @ S
        G_parts += [PS, -PS]
        W_parts += [spec.u_max - base, base - spec.u_min]
        DS = DPhi @ S
        G_parts += [DS, -DS]
        W_parts += [lim - Dbase, lim + Dbase]
        if i == 1:
            if spec.u_prev_last is None:
                continue
            prev = np.asarray(spec.u_prev_last, dtype=float).reshape(-1)
            J = phi0 @ S
            off = ubar[:r] + phi0 @ theta_j - prev
        else:
            J = phi0 @ S - philast @ sels[i - 2]
            off = ubar[:r] - ubar[(P - 1) * r:] + (phi0 - philast) @ theta_j
        G_parts += [J, -J]
        W_parts += [lim - off, lim + off]
    return np.vstack(G_parts), np.concatenate(W_parts)


def qp_problem(model: ReducedModel, state, cfg: HorizonConfig,
               spec: Optional[ConstraintSpec] = None,
               phi: Optional[BasisProjection] = None, theta_j=None) -> QpProblem:
    H, f = qp_cost_terms(model, state, cfg)
    if spec is None:
        G = np.zeros((0, H.shape[0]))
        W = np.zeros(0)
    else:
        G, W = build_constraints(spec, phi, theta_j, cfg)
    return QpProblem(hessian=H, linear=f, g_ineq=G, w_ineq=W)


def receding_step(model: ReducedModel, state, spec: Optional[ConstraintSpec],
                  cfg: HorizonConfig, phi: Optional[BasisProjection] = None,
                  theta_j=None) -> StepResult:
    """Solve one horizon and keep only the first move.

    Infeasible problems and solver failures fall back to holding theta
    (``dtheta = 0``) and log a warning.
    """
    m = model.n_input
    zero = np.zeros(m)
    try:
        prob = qp_problem(model, state, cfg, spec, phi, theta_j)
    except InfeasibleError as exc:
        log.warning("constraint box empty, holding theta: %s", exc)
        return StepResult(zero, qpsolver.INFEASIBLE, np.zeros(m * cfg.n_u), None, True)
    scale = float(np.max(np.abs(prob.hessian)))
    scale = scale if scale > 0 else 1.0
    sol = qpsolver.solve(prob.hessian / scale, prob.linear / scale, prob.g_ineq, prob.w_ineq)
    if not sol.ok:
        log.warning("QP %s, holding theta", sol.status)
        return StepResult(zero, sol.status, np.zeros(m * cfg.n_u), sol, True)
    return StepResult(sol.u_star[:m].copy(), sol.status, sol.u_star, sol, False)
