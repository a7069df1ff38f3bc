import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlc_capacity import cli
from vlc_capacity.errors import DomainError


def _data_lines(data: bytes):
    return [l for l in data.decode("utf-8").splitlines() if not l.startswith("#")]


def _rows_by_curve(rows):
    out = {}
    for r in rows:
        out.setdefault(r.curve, []).append(r)
    return out


@pytest.fixture(scope="module")
def swept():
    return {name: cli.run_sweep(cli.preset(name)) for name in cli.PRESETS}


# ---- dB ------------------------------------------------------------------


@given(st.floats(0, 80))
def test_db_round_trip(x):
    assert abs(cli.to_db(cli.from_db(x)) - x) <= 1e-12


def test_db_convention():
    assert cli.from_db(30.0) == pytest.approx(1000.0, rel=1e-15)
    assert cli.from_db(45.0) == pytest.approx(31622.776601683792, rel=1e-15)


# ---- presets ---------------------------------------------------------------


def test_every_preset_runs_without_row_errors(swept):
    for name, rows in swept.items():
        cfg = cli.preset(name)
        assert len(rows) == len(cfg.grid) * len(cfg.curves)
        assert all(r.error == "" for r in rows), name
        assert all(math.isfinite(r.c_low) and math.isfinite(r.c_upp) for r in rows), name


def test_fig2_lower_bound_nondecreasing(swept):
    for label, rows in _rows_by_curve(swept["fig2"]).items():
        assert np.all(np.diff([r.c_low for r in rows]) >= 0), label


def test_fig3_increases_then_plateaus(swept):
    for label, rows in _rows_by_curve(swept["fig3"]).items():
        c = [r.c_low for r in rows]
        assert c[1] > c[0]
        assert max(c[-3:]) - min(c[-3:]) < 0.05, label


def test_fig4_settings_and_trend(swept):
    cfg = cli.preset("fig4")
    assert [dict(c.overrides)["varsigma2"] for c in cfg.curves] == [0.0, 1.0, 2.0, 4.0]
    fixed = dict(cfg.fixed)
    assert fixed["xi"] == 0.3 and fixed["A_over_P"] == 1.5
    assert fixed["sigma2"] == 1.0 and fixed["beta"] == fixed["delta"] == 1e-3
    curves = list(_rows_by_curve(swept["fig4"]).values())
    for lo, hi in zip(curves[:-1], curves[1:]):
        assert all(a.c_low >= b.c_low for a, b in zip(lo, hi))


def test_fig5_gap_small_at_60_db(swept):
    for label, rows in _rows_by_curve(swept["fig5"]).items():
        r = next(r for r in rows if r.sweep_value == 60.0)
        assert abs(r.c_upp - r.c_low) < 0.05, label


def test_fig6_nonincreasing_in_varsigma2_and_slope(swept):
    by = _rows_by_curve(swept["fig6"])
    for label, rows in by.items():
        assert np.all(np.diff([r.c_low for r in rows]) <= 0), label
    at = {label: next(r.c_low for r in rows if r.sweep_value == 1.5) for label, rows in by.items()}
    assert 1.0 <= at["P=50dB"] - at["P=40dB"] <= 1.3


def test_fig7_fig8_contents(swept):
    for name in ("fig7", "fig8"):
        cfg = cli.preset(name)
        assert {c.label for c in cfg.curves} >= {"shannon"}
        assert any("omitted" in n for n in cfg.notes)
        data = cli.write_sweep(cfg, swept[name])
        assert b"# curves of the earlier signal-independent results are omitted" in data
    # constant in xi: dimming plays no part in the RF reference
    for r in _rows_by_curve(swept["fig8"])["shannon"]:
        assert r.c_low == pytest.approx(0.5 * math.log1p(cli.from_db(45.0) ** 2), rel=1e-14)
    # the AWGN reference sits above both VLC curves along fig7
    fig7 = _rows_by_curve(swept["fig7"])
    for s, a, b in zip(fig7["shannon"], fig7["avg-only"], fig7["peak-avg A=P"]):
        assert s.c_low > max(a.c_upp, b.c_upp)


def test_unknown_preset():
    with pytest.raises(DomainError):
        cli.preset("fig9")


# ---- CSV -----------------------------------------------------------------


def test_csv_is_deterministic(tmp_path):
    cfg = cli.preset("fig2")
    a = cli.write_sweep(cfg, cli.run_sweep(cfg), tmp_path / "a.csv")
    b = cli.write_sweep(cfg, cli.run_sweep(cfg), tmp_path / "b.csv")
    assert a == b
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_parallel_sweep_matches_serial():
    cfg = cli.preset("fig5")
    assert cli.run_sweep(cfg, jobs=2) == cli.run_sweep(cfg)


def test_empty_rows_give_header_only():
    data = cli.emit_csv([])
    assert data.decode().splitlines() == ["curve,sweep_value,c_low,c_upp,gap,asymptotic_gap,error"]


def test_fig2_schema(swept):
    cfg = cli.preset("fig2")
    lines = _data_lines(cli.write_sweep(cfg, swept["fig2"]))
    header = lines[0].split(",")
    assert header == ["curve", "A_dB", "c_low", "c_upp", "gap", "asymptotic_gap", "b",
                      "branch", "error"]
    table = list(csv.reader(io.StringIO("\n".join(lines))))
    assert all(len(r) == 9 for r in table)
    # 12 significant digits with '.' as the decimal separator
    c_low = table[1][2]
    assert "," not in c_low and len(c_low.replace(".", "").lstrip("0")) <= 12
    assert float(c_low) == pytest.approx(swept["fig2"][0].c_low, rel=1e-11)


def test_csv_columns_follow_row_field_order():
    cfg = cli.preset("fig7")
    cols = cli.columns_for(cfg)
    assert list(cols) == [f for f in cli.ROW_FIELDS if f in cols]
    assert {"b", "branch", "m", "n"} <= set(cols)


def test_csv_rejects_unknown_column():
    with pytest.raises(DomainError):
        cli.emit_csv([], columns=["nope"])


def test_csv_unwritable_destination(tmp_path):
    with pytest.raises(OSError):
        cli.emit_csv([], tmp_path / "missing" / "x.csv")


def test_oracle_columns():
    cfg = cli.build_config({"preset": "fig5", "grid": "40,50", "oracles": "mi,monte_carlo",
                            "mc_samples": "4000"})
    rows = cli.run_sweep(cfg)
    assert all(r.mi_oracle is not None and r.mc_oracle is not None for r in rows)
    for r in rows:
        assert r.mi_oracle >= r.c_low - 2e-2
    assert cli.run_sweep(cfg) == rows
    assert "mi_oracle" in cli.columns_for(cfg) and "mc_oracle" in cli.columns_for(cfg)


# ---- configuration -------------------------------------------------------


@pytest.mark.parametrize("grid", [(), (1.0, 1.0), (2.0, 1.0), (1.0, math.nan)])
def test_grid_validation(grid):
    with pytest.raises(DomainError):
        cli.SweepConfig(cli.preset("fig2").scenario, "A_dB", grid)


def test_infeasible_point_becomes_row_error():
    cfg = cli.build_config({"preset": "fig2", "grid": "40"})
    cfg = cli.SweepConfig(cfg.scenario, "A_dB", (40.0,), (("xi", 0.3), ("varsigma2", 1.5)),
                          (cli._curve("odd", A_over_P=1.0, xi=1.0),))
    rows = cli.run_sweep(cfg)
    assert rows[0].error and rows[0].c_low is None


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# custom\nscenario = avg-only\nsweep_var = P_dB\ngrid = 30:50:10\n"
                    "xi = 0.3  # dimming\nvarsigma2 = 1.5\n", encoding="utf-8")
    cfg = cli.build_config(cli.read_config_file(path))
    assert cfg.grid == (30.0, 40.0, 50.0)
    assert cli.build_config({**cli.read_config_file(path), "xi": "0.5"}).point_params(
        cfg.curves[0], 40.0)["xi"] == 0.5
    out = tmp_path / "o.csv"
    assert cli.main(["sweep", "--config", str(path), "--set", "varsigma2=2", "--out",
                     str(out)]) == 0
    lines = _data_lines(out.read_bytes())
    assert len(lines) == 4
    assert "# varsigma2 = 2" in out.read_text()


def test_curve_settings():
    cfg = cli.build_config({"preset": "fig5", "curve_var": "xi", "curve_values": "0.2,0.4"})
    assert [c.label for c in cfg.curves] == ["xi=0.2", "xi=0.4"]
    with pytest.raises(DomainError):
        cli.build_config({"preset": "fig5", "curve_var": "xi"})


@pytest.mark.parametrize("settings", [{"preset": "fig2", "bogus": "1"},
                                      {"preset": "fig2", "xi": "abc"},
                                      {"scenario": "peak-avg"}])
def test_bad_settings(settings):
    with pytest.raises(DomainError):
        cli.build_config(settings)


# ---- entry point ---------------------------------------------------------


def test_main_bounds_text(capsys):
    assert cli.main(["bounds", "--scenario", "peak-avg", "--A-dB", "45", "--xi", "0.3",
                     "--varsigma2", "1.5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("scenario") and "c_low" in out and "note:" in out


def test_main_bounds_json(capsys):
    assert cli.main(["bounds", "--scenario", "avg-only", "--P-dB", "50", "--xi", "0.3",
                     "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["scenario"] == "AvgOnly"
    assert doc["c_upp"] >= doc["c_low"]
    assert doc["asymptotic_gap"] == pytest.approx(-math.log(1 - 1e-3), rel=1e-12)


def test_main_sweep_to_stdout(capsys):
    assert cli.main(["sweep", "--preset", "fig5", "--set", "grid=40,50"]) == 0
    lines = _data_lines(capsys.readouterr().out.encode())
    assert lines[0].startswith("curve,P_dB,")
    assert len(lines) == 1 + 2 * 4


@pytest.mark.parametrize("argv", [
    ["bounds", "--scenario", "peak-avg", "--A-dB", "40", "--xi", "1.5"],
    ["bounds", "--scenario", "avg-only", "--A-dB", "40", "--xi", "0.3"],
    ["bounds", "--scenario", "peak-avg", "--xi", "0.3"],
    ["sweep", "--preset", "fig2", "--set", "grid=3,2"],
    ["sweep", "--preset", "fig2", "--set", "nonsense"],
])
def test_main_usage_errors(argv, capsys):
    assert cli.main(argv) == 2
    assert "vlc-capacity:" in capsys.readouterr().err


def test_main_unknown_preset_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--preset", "fig9"])
    assert exc.value.code == 2


def test_main_solver_error_exits_3(capsys):
    assert cli.main(["bounds", "--scenario", "peak-avg", "--A-dB", "40", "--xi", "1"]) == 3
    assert "solver error" in capsys.readouterr().err
