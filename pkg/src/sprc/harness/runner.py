"""Closed-loop executor: plant, collective pitch, IPC controller and excitation.

Every sample the applied pitch is ``collective + ipc + excitation``. The
SPRC plans once per rotation, at the first sample of the rotation, from the
loads of the rotation that just finished.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import qpsolver
from ..baselines import MbcIpc
from ..basis import build_phi, project
from ..errors import NotReadyError, RunAborted
from ..lifting import assemble_lifted, extract_blocks, reduce
from ..metrics import adc, audit_constraints, harmonic_amplitude, psd
from ..mpc import ConstraintSpec, HorizonConfig, StepResult, receding_step
from ..plant import BaselineCpc, PlantConfig, SurrogatePlant, WindField
from ..signals import SignalBuffers
from ..sysid import ExcitationConfig, MarkovEstimate, build_regressor, excitation
from .config import LoadCase

log = logging.getLogger(__name__)

N_BLADES = 3
AUDIT_TOL = 1e-9
PSD_SEGMENT_ROTATIONS = 20
PRE_WINDOW_ROTATIONS = 10


@dataclass
class RunRecord:
    """Per-sample series plus per-rotation controller log of one run."""

    case: LoadCase
    dt: float
    samples_per_period: int
    series: dict
    rotations: list
    metrics: dict = field(default_factory=dict)
    config_hash: str = ""
    aborted: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return int(self.series["pitch"].shape[0])

    @property
    def period(self) -> float:
        return self.samples_per_period * self.dt


class SprcController:
    """Online identifier plus per-rotation receding-horizon planner."""

    def __init__(self, case: LoadCase, P: int, dt: float):
        s = case.sprc
        r = l = N_BLADES
        self.P, self.dt, self.p = P, dt, s.p
        self.buffers = SignalBuffers(r, l, P, s.p)
        self.est = MarkovEstimate.initial(s.p * (r + l), l, s.lam, s.gamma)
        self.phi = build_phi(P, r)
        nb = self.phi.n_coeff
        q = np.diag(np.concatenate([np.full(nb, s.output_weight), np.full(nb, s.theta_weight),
                                    np.full(nb, s.output_weight)]))
        self.cfg = HorizonConfig(n_p=s.n_p, n_u=s.n_u, q_weight=q,
                                 r_weight=s.r_weight * np.eye(nb), move_tail=s.move_tail)
        self.theta = np.zeros(nb)
        self.theta_prev = np.zeros(nb)
        self.ybar = []
        self._res = [0.0, 0.0]
        self.last_residual = float("nan")

    def observe(self, k: int, u, y) -> None:
        """Record sample ``k`` and fold it into the estimate when possible."""
        self.buffers.push_sample(u, y)
        if not self.buffers.regression_ready(k):
            return
        w = self.buffers.stacked_windows(k - self.p)
        x = build_regressor(w)
        target = self.buffers.y.delta(k)
        e = target - self.est.xi_hat @ x
        self._res[0] += float(e @ e)
        self._res[1] += float(target @ target)
        self.est.update(x, target)

    def end_rotation(self, y_period) -> None:
        self.ybar.append(project(self.phi, y_period))
        num, den = self._res
        self.last_residual = float(np.sqrt(num / den)) if den > 0 else float("nan")
        self._res = [0.0, 0.0]

    def state(self) -> np.ndarray:
        if len(self.ybar) < 2:
            raise NotReadyError("need two completed rotations")
        y1, y0 = self.ybar[-1], self.ybar[-2]
        return np.concatenate([y1, self.theta - self.theta_prev, y1 - y0])

    def model(self):
        blocks = extract_blocks(self.est.xi_hat, self.p, N_BLADES)
        return reduce(assemble_lifted(blocks, self.P), self.phi)

    def plan(self, spec: Optional[ConstraintSpec], retry_without_junction: bool = False):
        model = self.model()
        state = self.state()
        res = receding_step(model, state, spec, self.cfg, self.phi, self.theta)
        if (res.fallback and retry_without_junction and spec is not None
                and spec.u_prev_last is not None):
            relaxed = ConstraintSpec(u_max=spec.u_max, du_max=spec.du_max, dt=spec.dt,
                                     u_bar=spec.u_bar, u_min=spec.u_min)
            res2 = receding_step(model, state, relaxed, self.cfg, self.phi, self.theta)
            res2.notes.append("junction rows dropped")
            res = res2
        self.theta_prev = self.theta
        self.theta = self.theta + res.delta_theta
        return res


def _mbc_for(case: LoadCase, plant: SurrogatePlant) -> MbcIpc:
    m = case.mbc
    offset = m.azimuth_offset
    if offset is None:
        # undo the pitch-to-load phase lag at 1P (gain sign folded in)
        beta = np.angle(-plant.frequency_response(1.0))
        offset = float(-beta)
    f1p = plant.cfg.rotor_speed / (2.0 * np.pi)
    return MbcIpc(ki=m.ki, azimuth_offset=offset, dt=plant.dt, lpf_cutoff=m.lpf_ratio * f1p,
                  u_max=case.u_max, du_max=case.du_max, u_min=case.u_min)


def run_case(case: LoadCase) -> RunRecord:
    """Simulate one load case.

    Raises:
        RunAborted: more than ``abort_streak`` consecutive rotations without
            a usable QP solution. The partial record is on ``exc.record``.
    """
    pcfg = PlantConfig(**{**case.plant, "seed": case.seeds.noise})
    plant = SurrogatePlant(pcfg, wind_ref=case.wind)
    P, dt = pcfg.samples_per_period, plant.dt
    T = P * dt
    id_rot = int(round(case.identification_s / T))
    con_rot = int(round(case.constrained_from_s / T))
    end_rot = int(round(case.end_s / T))
    N = end_rot * P

    wind = WindField(case.wind, case.ti, case.seeds.wind, dt)
    cpc = BaselineCpc(dt=dt)
    cpc.reset(wind.sample(0))
    plant.settle(cpc.pitch)

    ctrl = case.controller
    sprc = SprcController(case, P, dt) if ctrl == "sprc" else None
    mbc = _mbc_for(case, plant) if ctrl == "mbc" else None
    exc_cfg = ExcitationConfig(amplitude=case.sprc.excitation_amplitude if sprc else 0.0,
                               mode=case.sprc.excitation_mode, seed=case.seeds.excitation,
                               decay_rotations=case.sprc.decay_rotations,
                               samples_per_period=P, n_channels=N_BLADES)
    ramp_start = None

    wind_s = np.zeros(N)
    coll = np.zeros(N)
    ipc = np.zeros((N, N_BLADES))
    exc = np.zeros((N, N_BLADES))
    pitch = np.zeros((N, N_BLADES))
    load = np.zeros((N, N_BLADES))
    rotations = []
    streak = 0
    theta_now = np.zeros(2 * N_BLADES)
    forecast = np.full(end_rot, np.nan)

    def finish(aborted=None):
        series = dict(wind=wind_s, collective=coll, ipc=ipc, excitation=exc, pitch=pitch, moop=load)
        if aborted:
            series = {k: v[:k_done] for k, v in series.items()}
        rec = RunRecord(case=case, dt=dt, samples_per_period=P, series=series,
                        rotations=rotations, config_hash=case.config_hash(), aborted=aborted)
        rec.metrics = compute_metrics(rec, id_rot, con_rot, forecast)
        return rec

    k_done = 0
    for k in range(N):
        j, s = divmod(k, P)
        if s == 0 and k > 0:
            if sprc is not None:
                sprc.end_rotation(load[k - P:k])
                if j >= id_rot:
                    if ramp_start is None and sprc.last_residual < case.sprc.residual_threshold:
                        ramp_start = k
                    spec = None
                    if case.constrained and j >= con_rot:
                        forecast[j] = coll[k - 1]
                        spec = ConstraintSpec(u_max=case.u_max, du_max=case.du_max, dt=dt,
                                              u_bar=np.full(P * N_BLADES, coll[k - 1]),
                                              u_min=case.u_min, u_prev_last=pitch[k - 1].copy())
                    res = sprc.plan(spec, retry_without_junction=(j == con_rot))
                    theta_now = sprc.theta
                    streak = streak + 1 if res.fallback else 0
                    rotations.append(_rotation_entry(j, res, sprc, forecast[j]))
                    if streak > case.sprc.abort_streak:
                        k_done = k
                        msg = (f"{case.id}: no usable QP solution for {streak} consecutive "
                               f"rotations (last status {res.status}) at t={k * dt:.1f}s")
                        err = RunAborted(msg)
                        err.record = finish(aborted=msg)
                        raise err
            if mbc is not None and case.constrained and j == con_rot:
                mbc.saturate = True
                mbc.last_total = pitch[k - 1].copy()

        v = wind.sample(k)
        c = cpc.step(v)
        if sprc is not None:
            u_ipc = sprc.phi.row(s) @ theta_now
            e = excitation(k, exc_cfg, ramp_start) if exc_cfg.amplitude > 0 else np.zeros(N_BLADES)
        elif mbc is not None and j >= id_rot:
            demand = mbc.ipc_demand(load[k - 1], plant.azimuth(k - 1), plant.azimuth(k))
            u_ipc = mbc.limit(c + demand) - c
            e = np.zeros(N_BLADES)
        else:
            u_ipc = np.zeros(N_BLADES)
            e = np.zeros(N_BLADES)
        u = c + u_ipc + e
        y = plant.step(v, u)
        wind_s[k], coll[k] = v, c
        ipc[k], exc[k], pitch[k], load[k] = u_ipc, e, u, y
        if sprc is not None:
            sprc.observe(k, u, y)
        k_done = k + 1
    return finish()


def _rotation_entry(j, res: StepResult, sprc: SprcController, fc) -> dict:
    sol = res.solution
    return {
        "rotation": j,
        "status": res.status,
        "fallback": bool(res.fallback),
        "theta": [float(v) for v in sprc.theta],
        "forecast": float(fc),
        "residual": sprc.last_residual,
        "kkt": float(sol.kkt_residual) if sol is not None else float("nan"),
        "active": len(sol.active_rows) if sol is not None else 0,
        "notes": ";".join(res.notes),
    }


def compute_metrics(rec: RunRecord, id_rot: int, con_rot: int, forecast) -> dict:
    case = rec.case
    P, dt = rec.samples_per_period, rec.dt
    pitch = rec.series["pitch"]
    moop = rec.series["moop"]
    n = pitch.shape[0]
    kc = min(con_rot * P, n)
    m: dict = {"n_samples": n, "dt": dt, "samples_per_period": P,
               "identification_rotation": id_rot, "constrained_rotation": con_rot}
    pre0 = max(0, kc - PRE_WINDOW_ROTATIONS * P)
    if kc - pre0 >= P:
        m["moop_1p_pre"] = harmonic_amplitude(moop[pre0:kc], P).tolist()
    win = pitch[kc:]
    if win.shape[0] >= 2 * P:
        m["adc_percent"] = adc(win, dt, case.du_max).adc_percent
        m["adc_mean"] = float(np.mean(m["adc_percent"]))
        m["audit"] = audit_constraints(win, case.u_max, case.du_max, dt, case.u_min,
                                       tol=AUDIT_TOL).to_dict()
        m["moop_1p_constrained"] = harmonic_amplitude(moop[kc:], P).tolist()
        seg = PSD_SEGMENT_ROTATIONS * P
        if win.shape[0] >= 2 * seg:
            rep = psd(win, dt, seg)
            f1p = 1.0 / (P * dt)
            m["psd_3p"] = rep.bin_density(3.0 * f1p).tolist()
            m["psd_1p"] = rep.bin_density(f1p).tolist()
        if kc > 0:
            m["entry_step_deg"] = float(np.max(np.abs(pitch[kc] - pitch[kc - 1])))
        fc = np.asarray(forecast, dtype=float)
        rot_idx = np.arange(kc, n) // P
        if rot_idx.size and np.all(np.isfinite(fc[rot_idx])):
            ipc = rec.series["ipc"][kc:]
            coll_fc = fc[rot_idx][:, None]
            m["leakage_deg"] = float(np.max(np.abs(win - coll_fc - ipc)))
    stats = {}
    for r in rec.rotations:
        stats[r["status"]] = stats.get(r["status"], 0) + 1
    m["qp_status_counts"] = stats
    m["fallbacks"] = int(sum(r["fallback"] for r in rec.rotations))
    if rec.aborted:
        m["aborted"] = rec.aborted
    return m


def qp_ok(status: str) -> bool:
    return status == qpsolver.OPTIMAL
