"""Dense primal active-set solver for small strictly convex QPs.

Solves::

    minimize    u' H u + 2 f' u
    subject to  G u <= W

The multipliers reported satisfy ``2 H u + 2 f + G' lam = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import linprog

from .errors import ConfigurationError

OPTIMAL = "optimal"
MAX_ITER = "max-iterations"
INFEASIBLE = "infeasible"

FEAS_TOL = 1e-9


@dataclass
class QpSolution:
    u_star: np.ndarray
    status: str
    active_rows: frozenset = field(default_factory=frozenset)
    kkt_residual: float = float("inf")
    multipliers: np.ndarray | None = None
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def objective(H, f, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(u @ H @ u + 2.0 * f @ u)


def kkt_residual(H, f, G, W, u, lam) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    stat = 2.0 * H @ u + 2.0 * f
    if G.shape[0]:
        stat = stat + G.T @ lam
        slack = G @ u - W
        primal = max(0.0, float(np.max(slack)))
        dual = max(0.0, float(np.max(-lam)))
        comp = float(np.max(np.abs(lam * slack)))
    else:
        primal = dual = comp = 0.0
    return max(float(np.max(np.abs(stat))) if stat.size else 0.0, primal, dual, comp)


def _phase_one(G, W):
    """Point with ``G u <= W`` from an LP minimising the worst violation."""
    m, n = G.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A = np.hstack([G, -np.ones((m, 1))])
    scale = max(1.0, float(np.max(np.abs(W)))) if m else 1.0
    bounds = [(None, None)] * n + [(-scale, None)]
    res = linprog(c, A_ub=A, b_ub=W, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    u = res.x[:n]
    if np.max(G @ u - W) > FEAS_TOL * max(1.0, scale):
        return None
    return u


def _eqp_step(H2, g, Aw):
    """Minimise 0.5 p'H2 p + g'p subject to Aw p = 0; also return multipliers.

    Null-space method on a QR of ``Aw'``, so ``p`` is exactly zero once the
    working rows span the whole space.
    """
    n = H2.shape[0]
    k = Aw.shape[0]
    if k == 0:
        return -np.linalg.solve(H2, g), np.zeros(0)
    Q, R = np.linalg.qr(Aw.T, mode="complete")
    Z = Q[:, k:]
    if Z.shape[1]:
        p = -Z @ np.linalg.solve(Z.T @ H2 @ Z, Z.T @ g)
    else:
        p = np.zeros(n)
    lam = solve_triangular(R[:k, :k], -(Q[:, :k].T @ (H2 @ p + g)), lower=False)
    return p, lam


def solve(H, f, G=None, W=None, max_iter: int | None = None, x0=None) -> QpSolution:
    """Active-set solve.

    Args:
        H: symmetric positive-definite (n, n) matrix.
        f: linear term, objective is ``u'Hu + 2 f'u``.
        G, W: inequality data ``G u <= W``; may be omitted.
        max_iter: iteration cap, default ``50 * (n + min(m, n))``.
        x0: optional feasible start; otherwise zero is tried, then an LP.

    Raises:
        ConfigurationError: H not symmetric positive definite or shapes clash.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    n = f.size
    if H.shape != (n, n):
        raise ConfigurationError("H and f dimensions differ")
    if not np.allclose(H, H.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ConfigurationError("H is not symmetric")
    try:
        cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("H is not positive definite") from exc
    H = 0.5 * (H + H.T)
    if G is None:
        G = np.zeros((0, n))
        W = np.zeros(0)
    G = np.asarray(G, dtype=float).reshape(-1, n)
    W = np.asarray(W, dtype=float).reshape(-1)
    m = G.shape[0]
    if W.size != m:
        raise ConfigurationError("G and W row counts differ")
    if max_iter is None:
        max_iter = 50 * (n + min(m, n))

    H2 = 2.0 * H
    if m == 0:
        u = cho_solve(cho_factor(H), -f)
        res = kkt_residual(H, f, G, W, u, np.zeros(0))
        return QpSolution(u, OPTIMAL, frozenset(), res, np.zeros(0), 0)

    wscale = max(1.0, float(np.max(np.abs(W))))
    tol = FEAS_TOL * wscale
    u = None
    for cand in (x0, np.zeros(n)):
        if cand is not None:
            cand = np.asarray(cand, dtype=float).reshape(-1)
            if np.all(G @ cand - W <= tol):
                u = cand.copy()
                break
    if u is None:
        u = _phase_one(G, W)
        if u is None:
            return QpSolution(np.zeros(n), INFEASIBLE)

    row_norm = np.linalg.norm(G, axis=1)
    row_norm[row_norm == 0] = 1.0
    work: list[int] = []
    it = 0
    while it < max_iter:
        it += 1
        g = H2 @ u + 2.0 * f
        Aw = G[work]
        p, lam_w = _eqp_step(H2, g, Aw)
        pscale = max(1.0, float(np.max(np.abs(u))))
        if np.max(np.abs(p)) <= 1e-12 * pscale:
            if not work or np.all(lam_w >= -1e-12):
                # one refinement solve on the final active set
                u = _polish(H2, f, G, W, work, u)
                lam = _multipliers(H2, f, G, work, u, m)
                res = kkt_residual(H, f, G, W, u, lam)
                return QpSolution(u, OPTIMAL, frozenset(work), res, lam, it)
            # drop the most negative multiplier, smallest index on ties
            order = sorted(range(len(work)), key=lambda i: (lam_w[i], work[i]))
            work.pop(order[0])
            continue
        Gp = G @ p
        slack = W - G @ u
        cand = Gp > 1e-12 * row_norm * np.linalg.norm(p)
        if work:
            cand[work] = False
        alpha = 1.0
        block = -1
        if np.any(cand):
            idx = np.flatnonzero(cand)
            ratios = np.maximum(slack[idx], 0.0) / Gp[idx]
            j = int(np.argmin(ratios))  # argmin returns the first (smallest index) tie
            if ratios[j] < 1.0:
                alpha = float(ratios[j])
                block = int(idx[j])
        u = u + alpha * p
        if block >= 0:
            work.append(block)
    lam = _multipliers(H2, f, G, work, u, m)
    return QpSolution(u, MAX_ITER, frozenset(work), kkt_residual(H, f, G, W, u, lam), lam, it)


def _polish(H2, f, G, W, work, u):
    """Re-solve the equality-constrained problem on the active rows exactly."""
    if not work:
        return np.linalg.solve(H2, -2.0 * f)
    n = H2.shape[0]
    Aw = G[work]
    k = len(work)
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H2
    K[:n, n:] = Aw.T
    K[n:, :n] = Aw
    rhs = np.concatenate([-2.0 * f, W[work]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return u
    cand = sol[:n]
    # keep the polished point only if it is no less feasible than u
    worst = max(0.0, float(np.max(G @ u - W)))
    if float(np.max(G @ cand - W)) <= worst + 1e-14 * max(1.0, float(np.max(np.abs(W)))):
        return cand
    return u


def _multipliers(H2, f, G, work, u, m):
    lam = np.zeros(m)
    if work:
        g = H2 @ u + 2.0 * f
        Aw = G[work]
        sol, *_ = np.linalg.lstsq(Aw.T, -g, rcond=None)
        lam[work] = sol
    return lam


# -- plain-text problem files ------------------------------------------------

def dump_problem(path, H, f, G, W) -> None:
    """Write ``n m`` then H, f, G, W row-major, one matrix row per line."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    f = np.asarray(f, dtype=float).reshape(-1)
    n = f.size
    G = np.asarray(G, dtype=float).reshape(-1, n)
    W = np.asarray(W, dtype=float).reshape(-1)
    fmt = lambda row: " ".join(repr(float(v)) for v in row)
    with open(path, "w") as fh:
        fh.write(f"{n} {G.shape[0]}\n")
        for row in H:
            fh.write(fmt(row) + "\n")
        fh.write(fmt(f) + "\n")
        for row in G:
            fh.write(fmt(row) + "\n")
        fh.write(fmt(W) + "\n")


def load_problem(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh]
    try:
        n, m = (int(v) for v in lines[0])
        body = [np.array(ln, dtype=float) for ln in lines[1:]]
        H = np.vstack(body[:n]) if n else np.zeros((0, 0))
        f = body[n]
        G = np.vstack(body[n + 1:n + 1 + m]) if m else np.zeros((0, n))
        W = body[n + 1 + m] if m else np.zeros(0)
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"malformed QP file {path}") from exc
    if H.shape != (n, n) or G.shape != (m, n) or W.size != m:
        raise ConfigurationError(f"malformed QP file {path}")
    return H, f, G, W
