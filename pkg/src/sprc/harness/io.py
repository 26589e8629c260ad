"""Run directories and the comparison table.

A run directory ``<out>/<case>-<controller>-s<wind seed>/`` holds:

* ``series.csv``: one row per sample. Columns ``k, time_s, wind_mps,
  collective_deg, ipc_1..3, exc_1..3, pitch_1..3, moop_1..3`` (deg, kN m).
  ``pitch_i == collective + ipc_i + exc_i`` evaluated left to right.
* ``rotations.csv``: one row per SPRC plan (status, theta, forecast).
* ``metrics.json``: metrics bundle, config snapshot and config hash.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from ..metrics import write_json
from .runner import RunRecord

SERIES_HEADER = (["k", "time_s", "wind_mps", "collective_deg"]
                 + [f"ipc_{i}" for i in (1, 2, 3)] + [f"exc_{i}" for i in (1, 2, 3)]
                 + [f"pitch_{i}" for i in (1, 2, 3)] + [f"moop_{i}" for i in (1, 2, 3)])
ROTATION_HEADER = (["rotation", "status", "fallback"] + [f"theta_{i}" for i in range(1, 7)]
                   + ["forecast_deg", "residual", "kkt", "active_rows", "notes"])
TABLE_HEADER = ["case", "sprc_adc", "mbc_adc", "adc_ratio", "sprc_psd_3p", "mbc_psd_3p",
                "psd_3p_ratio", "sprc_1p_reduction", "mbc_1p_reduction"]
MISSING = "NA"


def run_dir_name(rec_or_case) -> str:
    case = getattr(rec_or_case, "case", rec_or_case)
    return f"{case.id}-{case.controller}-s{case.seeds.wind}"


def _r(v) -> str:
    return repr(float(v))


def write_series(path, rec: RunRecord) -> None:
    s = rec.series
    n = s["pitch"].shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for k in range(n):
            row = [str(k), _r(k * rec.dt), _r(s["wind"][k]), _r(s["collective"][k])]
            row += [_r(v) for v in s["ipc"][k]]
            row += [_r(v) for v in s["excitation"][k]]
            row += [_r(v) for v in s["pitch"][k]]
            row += [_r(v) for v in s["moop"][k]]
            w.writerow(row)


def read_series(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    cols = {h: data[:, i] for i, h in enumerate(head)}
    grab = lambda p: np.column_stack([cols[f"{p}_{i}"] for i in (1, 2, 3)])
    return {"k": cols["k"].astype(int), "time": cols["time_s"], "wind": cols["wind_mps"],
            "collective": cols["collective_deg"], "ipc": grab("ipc"),
            "excitation": grab("exc"), "pitch": grab("pitch"), "moop": grab("moop")}


def write_rotations(path, rec: RunRecord) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROTATION_HEADER)
        for r in rec.rotations:
            w.writerow([r["rotation"], r["status"], int(r["fallback"])]
                       + [_r(v) for v in r["theta"]]
                       + [_r(r["forecast"]), _r(r["residual"]), _r(r["kkt"]), r["active"], r["notes"]])


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_record(rec: RunRecord, out_root) -> Path:
    d = Path(out_root) / run_dir_name(rec)
    d.mkdir(parents=True, exist_ok=True)
    write_series(d / "series.csv", rec)
    write_rotations(d / "rotations.csv", rec)
    payload = {"case": rec.case.id, "controller": rec.case.controller,
               "config": rec.case.to_dict(), "config_hash": rec.config_hash,
               "aborted": rec.aborted, "metrics": rec.metrics}
    write_json(d / "metrics.json", _clean(payload))
    return d


def load_metrics(out_root) -> dict:
    """``{(case id, controller): metrics}`` for every run directory under ``out_root``."""
    out = {}
    root = Path(out_root)
    if not root.is_dir():
        return out
    for p in sorted(root.glob("*/metrics.json")):
        with open(p) as fh:
            payload = json.load(fh)
        out[(payload["case"], payload["controller"])] = payload["metrics"]
    return out


def _ratio(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


def _reduction(m, base):
    if m is None or base is None or "moop_1p_constrained" not in m or "moop_1p_constrained" not in base:
        return None
    a = np.mean(m["moop_1p_constrained"])
    b = np.mean(base["moop_1p_constrained"])
    return float(1.0 - a / b) if b else None


def compare(results: dict, cases, controllers=("sprc", "mbc")) -> list:
    """Cross table of ADC, 3P pitch PSD and 1P load reduction per case.

    ``results`` maps ``(case, controller)`` to a metrics dict. Missing runs
    leave ``None`` in their cells. With an empty controller list the table
    is empty.
    """
    controllers = list(controllers)
    if not controllers:
        return []
    rows = []
    for cid in cases:
        s = results.get((cid, "sprc")) if "sprc" in controllers else None
        m = results.get((cid, "mbc")) if "mbc" in controllers else None
        base = results.get((cid, "baseline"))
        get = lambda d, k: d.get(k) if d else None
        mean3 = lambda d: float(np.mean(d["psd_3p"])) if d and "psd_3p" in d else None
        rows.append({
            "case": cid,
            "sprc_adc": get(s, "adc_mean"),
            "mbc_adc": get(m, "adc_mean"),
            "adc_ratio": _ratio(get(s, "adc_mean"), get(m, "adc_mean")),
            "sprc_psd_3p": mean3(s),
            "mbc_psd_3p": mean3(m),
            "psd_3p_ratio": _ratio(mean3(m), mean3(s)),
            "sprc_1p_reduction": _reduction(s, base),
            "mbc_1p_reduction": _reduction(m, base),
        })
    return rows


def summary(rows: list) -> dict:
    ratios = [r["adc_ratio"] for r in rows if r["adc_ratio"] is not None]
    return {"mean_adc_ratio": float(np.mean(ratios)) if ratios else None,
            "cases_with_ratio": len(ratios)}


def write_table(path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_HEADER)
        for r in rows:
            w.writerow([MISSING if r[h] is None else (r[h] if h == "case" else repr(float(r[h])))
                        for h in TABLE_HEADER])
        s = summary(rows)
        if rows:
            w.writerow(["mean"] + [MISSING] * 2
                       + [MISSING if s["mean_adc_ratio"] is None else repr(s["mean_adc_ratio"])]
                       + [MISSING] * (len(TABLE_HEADER) - 4))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
