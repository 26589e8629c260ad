"""Command-line entry point: ``sprc run | suite | compare``.

Exit codes: 0 success, 2 configuration error, 3 run aborted, 4 a
``suite --check`` acceptance check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError, RunAborted
from . import io
from .config import CONTROLLERS, LoadCase, get_case, load_cases
from .runner import run_case

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED, EXIT_CHECK = 0, 2, 3, 4
MAX_EXCESS_FRACTION = 0.05
MAX_MEAN_ADC_RATIO = 0.8
AUDIT_TOL = 1e-9

log = logging.getLogger("sprc")


def _prepare(case: LoadCase, controller, seed) -> LoadCase:
    if controller:
        case = case.with_overrides(controller=controller)
    if seed is not None:
        case = case.with_seed(seed)
    return case


def _execute(case: LoadCase, out) -> tuple:
    """Run and persist one case; returns ``(record, exit code)``."""
    try:
        rec = run_case(case)
        code = EXIT_OK
    except RunAborted as exc:
        log.error("%s", exc)
        rec = exc.record
        code = EXIT_ABORTED
    d = io.write_record(rec, out)
    log.info("%s/%s -> %s", case.id, case.controller, d)
    return rec, code


def cmd_run(args) -> int:
    case = _prepare(get_case(args.case, args.config), args.controller, args.seed)
    _, code = _execute(case, args.out)
    return code


def suite_checks(cases: dict, results: dict) -> list:
    """Acceptance-style checks over a finished suite; returns ``(name, ok, detail)``."""
    checks = []
    for cid, case in cases.items():
        m = results.get((cid, "sprc"))
        if m is None or "audit" not in m:
            continue
        a = m["audit"]
        if case.laminar:
            ok = a["angle_count"] == 0 and a["rate_count"] == 0
            checks.append((f"{cid} laminar audit", ok,
                           f"angle {a['angle_count']}, rate {a['rate_count']}"))
        else:
            lim = MAX_EXCESS_FRACTION * case.u_max
            leak = m.get("leakage_deg")
            ok = a["max_excess"] < lim and leak is not None and a["max_excess"] <= leak + AUDIT_TOL
            checks.append((f"{cid} turbulent excess", ok,
                           f"excess {a['max_excess']:.4g} deg, leakage {leak}, limit {lim:.4g}"))
    rows = io.compare(results, list(cases))
    for r in rows:
        if "tight" in cases[r["case"]].tags and r["adc_ratio"] is not None:
            checks.append((f"{r['case']} ADC ordering", r["sprc_adc"] <= r["mbc_adc"],
                           f"sprc {r['sprc_adc']:.2f}% vs mbc {r['mbc_adc']:.2f}%"))
    mean = io.summary(rows)["mean_adc_ratio"]
    if mean is not None:
        checks.append(("mean SPRC/MBC ADC ratio", mean <= MAX_MEAN_ADC_RATIO, f"{mean:.3f}"))
    return checks


def cmd_suite(args) -> int:
    cases = load_cases(args.config)
    if args.cases:
        wanted = args.cases.split(",")
        missing = [c for c in wanted if c not in cases]
        if missing:
            raise ConfigurationError(f"unknown cases: {missing}")
        cases = {c: cases[c] for c in wanted}
    controllers = [c for c in args.controllers.split(",") if c]
    bad = [c for c in controllers if c not in CONTROLLERS]
    if bad:
        raise ConfigurationError(f"unknown controllers: {bad}")
    results, worst = {}, EXIT_OK
    for cid, base in cases.items():
        for ctrl in controllers:
            case = _prepare(base, ctrl, args.seed)
            rec, code = _execute(case, args.out)
            results[(cid, ctrl)] = rec.metrics
            worst = max(worst, code)
    rows = io.compare(results, list(cases), controllers)
    io.ensure_dir(args.out)
    io.write_table(Path(args.out) / "table.csv", rows)
    if args.check:
        failed = False
        for name, ok, detail in suite_checks(cases, results):
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            failed |= not ok
        if failed:
            return EXIT_CHECK
    return worst


def cmd_compare(args) -> int:
    results = io.load_metrics(args.out)
    cases = list(load_cases(args.config)) if args.config or not results else sorted({c for c, _ in results})
    controllers = [c for c in args.controllers.split(",") if c]
    rows = io.compare(results, cases, controllers)
    io.ensure_dir(args.out)
    io.write_table(Path(args.out) / "table.csv", rows)
    for r in rows:
        cells = " ".join(f"{k}={'NA' if v is None else (v if k == 'case' else f'{v:.4g}')}"
                         for k, v in r.items())
        print(cells)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sprc", description="Constrained repetitive pitch control runs")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML case file (default: shipped presets)")
        p.add_argument("--out", default="runs", help="output root directory")
        p.add_argument("--seed", type=int, default=None, help="base seed for wind, noise, excitation")

    p = sub.add_parser("run", help="run one load case")
    p.add_argument("--case", required=True)
    p.add_argument("--controller", choices=CONTROLLERS, default=None)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run every case for each controller")
    p.add_argument("--controllers", default="baseline,mbc,sprc")
    p.add_argument("--cases", default=None, help="comma-separated subset of case ids")
    p.add_argument("--check", action="store_true", help="evaluate acceptance checks")
    common(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("compare", help="tabulate finished runs under --out")
    p.add_argument("--controllers", default="sprc,mbc")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
