import json

import numpy as np
import pytest

from sprc.errors import ConfigurationError, RunAborted
from sprc.harness import io
from sprc.harness.cli import EXIT_ABORTED, EXIT_CONFIG, EXIT_OK, main, suite_checks
from sprc.harness.config import get_case, load_cases, parse_config
from sprc.harness.runner import run_case

T_ROT = 6.25
# excitation has decayed before the limits switch on, as in the presets
SHORT = dict(identification_s=20 * T_ROT, constrained_from_s=45 * T_ROT, end_s=55 * T_ROT)


def short(case_id="LC3", **kw):
    return get_case(case_id, **{**SHORT, **kw})


@pytest.fixture(scope="module")
def sprc_short():
    return run_case(short())


class TestConfig:
    def test_presets(self):
        cases = load_cases()
        assert list(cases) == [f"LC{i}" for i in range(1, 9)]
        table = {c.id: (c.wind, c.u_max, c.du_max) for c in cases.values()}
        assert table["LC3"] == (16, 12.9, 1.0)
        assert table["LC4"] == (16, 13.1, 0.2)
        assert table["LC8"] == (16, 20.0, 1.5)
        assert {c.id for c in cases.values() if "tight" in c.tags} == {"LC2", "LC4", "LC6"}
        assert [c.id for c in cases.values() if not c.laminar] == ["LC7", "LC8"]
        assert cases["LC7"].ti == 0.0375

    def test_defaults_merge(self):
        text = """
defaults: {sprc: {n_p: 5, n_u: 3}, constrained_from_s: 400, end_s: 500}
cases:
  - {id: A, wind: 14, u_max: 10, du_max: 1, sprc: {n_u: 1}}
"""
        c = parse_config(text)["A"]
        assert (c.sprc.n_p, c.sprc.n_u, c.end_s) == (5, 1, 500)

    @pytest.mark.parametrize("text", [
        "cases: [{id: A, wind: 14, u_max: 10, du_max: 1, bogus: 3}]",
        "cases: [{id: A, wind: 14, u_max: 10}]",
        "cases: [{id: A, wind: 14, u_max: 10, du_max: 1, controller: pid}]",
        "cases: [{id: A, wind: 14, u_max: 10, du_max: 1, end_s: 10}]",
        "cases: [{id: A, wind: 14, u_max: 10, du_max: -1}]",
        "cases: [{id: A, wind: 14, u_max: 10, du_max: 1, sprc: {horizon: 3}}]",
        "cases: [{id: A, wind: 14, u_max: 10, du_max: 1}, {id: A, wind: 14, u_max: 10, du_max: 1}]",
        "cases: {id: A}",
        "cases: [unclosed",
    ])
    def test_rejects_bad_config(self, text):
        with pytest.raises(ConfigurationError):
            parse_config(text)

    def test_unknown_case(self):
        with pytest.raises(ConfigurationError):
            get_case("LC99")

    def test_seed_and_hash(self):
        a = get_case("LC1")
        b = a.with_seed(100)
        assert (b.seeds.wind, b.seeds.noise, b.seeds.excitation) == (100, 101, 102)
        assert a.config_hash() == get_case("LC1").config_hash()
        assert a.config_hash() != b.config_hash()


class TestRunner:
    def test_baseline_blades_identical(self):
        rec = run_case(short(controller="baseline", end_s=10 * T_ROT,
                             identification_s=2 * T_ROT, constrained_from_s=5 * T_ROT))
        p = rec.series["pitch"]
        assert np.array_equal(p[:, 0], p[:, 1]) and np.array_equal(p[:, 0], p[:, 2])
        assert not rec.series["ipc"].any()

    def test_pitch_is_sum_of_parts(self, sprc_short):
        s = sprc_short.series
        total = s["collective"][:, None] + s["ipc"] + s["excitation"]
        np.testing.assert_array_equal(s["pitch"], total)

    def test_deterministic(self, sprc_short, tmp_path):
        again = run_case(short())
        for key, v in sprc_short.series.items():
            np.testing.assert_array_equal(v, again.series[key])
        a = io.write_record(sprc_short, tmp_path / "a")
        b = io.write_record(again, tmp_path / "b")
        assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()

    def test_constrained_window_is_audited(self, sprc_short):
        m = sprc_short.metrics
        assert m["audit"]["angle_count"] == 0 and m["audit"]["rate_count"] == 0
        assert "leakage_deg" in m and "entry_step_deg" in m
        assert len(sprc_short.rotations) == 35

    def test_abort_on_persistent_infeasibility(self):
        case = short(u_max=1.0, end_s=70 * T_ROT)
        with pytest.raises(RunAborted) as info:
            run_case(case)
        rec = info.value.record
        assert rec.aborted and rec.metrics["fallbacks"] == 11
        assert rec.n_samples < 70 * 128


class TestIo:
    def test_series_round_trip(self, sprc_short, tmp_path):
        d = io.write_record(sprc_short, tmp_path)
        back = io.read_series(d / "series.csv")
        for key in ("pitch", "moop", "ipc", "excitation", "collective", "wind"):
            np.testing.assert_array_equal(back[key], sprc_short.series[key])
        payload = json.loads((d / "metrics.json").read_text())
        assert payload["config_hash"] == sprc_short.config_hash
        assert d.name == "LC3-sprc-s11"

    def test_identical_runs_ratio_one(self):
        m = {"adc_mean": 12.5, "psd_3p": [1.0, 2.0, 3.0]}
        rows = io.compare({("A", "sprc"): m, ("A", "mbc"): m}, ["A"])
        assert rows[0]["adc_ratio"] == 1.0 and rows[0]["psd_3p_ratio"] == 1.0

    def test_missing_runs_and_empty_controllers(self, tmp_path):
        rows = io.compare({("A", "sprc"): {"adc_mean": 3.0}}, ["A", "B"])
        assert rows[0]["mbc_adc"] is None and rows[0]["adc_ratio"] is None
        assert rows[1]["sprc_adc"] is None
        assert io.compare({}, ["A"], []) == []
        io.write_table(tmp_path / "t.csv", rows)
        assert "NA" in (tmp_path / "t.csv").read_text()
        assert io.summary(rows)["mean_adc_ratio"] is None

    def test_reduction_against_baseline(self):
        res = {("A", "sprc"): {"moop_1p_constrained": [10.0, 10.0, 10.0]},
               ("A", "baseline"): {"moop_1p_constrained": [100.0, 100.0, 100.0]}}
        assert io.compare(res, ["A"])[0]["sprc_1p_reduction"] == pytest.approx(0.9)

    def test_suite_checks_flag_bad_ordering(self):
        cases = {"LC2": get_case("LC2")}
        res = {("LC2", "sprc"): {"adc_mean": 50.0, "audit": {"angle_count": 0, "rate_count": 0}},
               ("LC2", "mbc"): {"adc_mean": 40.0}}
        checks = {name: ok for name, ok, _ in suite_checks(cases, res)}
        assert checks["LC2 laminar audit"] is True
        assert checks["LC2 ADC ordering"] is False
        assert checks["mean SPRC/MBC ADC ratio"] is False


class TestCli:
    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("cases: [{id: A}]")
        assert main(["run", "--case", "A", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "configuration error" in capsys.readouterr().err
        assert main(["run", "--case", "LC99", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_run_and_compare(self, tmp_path, capsys):
        cfg = tmp_path / "short.yaml"
        cfg.write_text(f"""
defaults: {{identification_s: {5 * T_ROT}, constrained_from_s: {10 * T_ROT}, end_s: {50 * T_ROT}}}
cases:
  - {{id: S, wind: 16, u_max: 12.9, du_max: 1.0}}
""")
        out = tmp_path / "runs"
        for ctrl in ("mbc", "baseline"):
            assert main(["run", "--case", "S", "--controller", ctrl, "--config", str(cfg),
                         "--out", str(out)]) == EXIT_OK
        assert (out / "S-mbc-s11" / "series.csv").exists()
        assert main(["compare", "--out", str(out), "--config", str(cfg)]) == EXIT_OK
        assert "case=S" in capsys.readouterr().out
        assert (out / "table.csv").exists()

    def test_seed_option_changes_run_dir(self, tmp_path):
        cfg = tmp_path / "tiny.yaml"
        cfg.write_text(f"""
defaults: {{identification_s: {T_ROT}, constrained_from_s: {2 * T_ROT}, end_s: {3 * T_ROT}}}
cases:
  - {{id: S, wind: 12, u_max: 5, du_max: 1.0, controller: baseline}}
""")
        assert main(["run", "--case", "S", "--config", str(cfg), "--out", str(tmp_path),
                     "--seed", "7"]) == EXIT_OK
        assert (tmp_path / "S-baseline-s7").is_dir()

    def test_abort_exit_code(self, tmp_path):
        cfg = tmp_path / "abort.yaml"
        cfg.write_text(f"""
defaults: {{identification_s: {20 * T_ROT}, constrained_from_s: {30 * T_ROT}, end_s: {60 * T_ROT}}}
cases:
  - {{id: X, wind: 16, u_max: 1.0, du_max: 1.0}}
""")
        assert main(["run", "--case", "X", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_ABORTED
        payload = json.loads((tmp_path / "X-sprc-s11" / "metrics.json").read_text())
        assert payload["aborted"]

    def test_suite_rejects_unknown_controller(self, tmp_path):
        assert main(["suite", "--controllers", "pid", "--out", str(tmp_path)]) == EXIT_CONFIG
