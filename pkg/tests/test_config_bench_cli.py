from dataclasses import fields, replace

import pytest

from irs_secrecy import bench, cli
from irs_secrecy.bench import (
    CSV_COLUMNS,
    Record,
    emit_csv,
    read_csv,
    run_sweep,
    summarize,
    sweep_cells,
)
from irs_secrecy.channel import Rect, SystemParams, Vec2
from irs_secrecy.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    dbm_to_watts,
    load_config,
)
from irs_secrecy.sdp import SolverFailure
from irs_secrecy.verify import CriterionResult

# cheap scenario for plumbing tests: two IRS elements, few draws, no timing column noise
SMALL = {"n_irs": 2, "n_seeds": 2, "verify_draws": 500, "record_timing": False}


def _write_yaml(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# --- config -----------------------------------------------------------------


def test_empty_config_gives_default_system():
    got = config_from_dict({}).system_params()
    want = SystemParams()
    for f in fields(SystemParams):
        a, b = getattr(got, f.name), getattr(want, f.name)
        if isinstance(a, float):
            assert a == pytest.approx(b, rel=1e-12), f.name
        else:
            assert a == b, f.name
    assert got.n_tx == 4 and got.p_out == 0.05 and got.carrier_hz == 2.4e9
    assert got.bob_loc == Vec2(100.0, 15.0) and got.eve_loc == Vec2(95.0, 13.0)
    assert got.irs_area == Rect(0.0, 105.0, 20.0, 30.0)


def test_empty_file_and_none_path(tmp_path):
    assert load_config(None) == RunConfig()
    assert load_config(_write_yaml(tmp_path, "")) == RunConfig()


def test_dbm_conversion():
    assert dbm_to_watts(30) == 1.0
    assert config_from_dict({"power_dbm": 30}).system_params().tx_power == 1.0
    assert dbm_to_watts(-95) == pytest.approx(10**-12.5)


@pytest.mark.parametrize(
    ("raw", "field"),
    [
        ({"p_out": 1.5}, "p_out"),
        ({"n_irs": 0}, "n_irs"),
        ({"colour": "red"}, "colour"),
        ({"schemes": ["proposed", "magic"]}, "schemes"),
        ({"sweep": {"axis": "n_irs", "values": []}}, "sweep.values"),
        ({"sweep": {"axis": "temperature", "values": [1]}}, "sweep.axis"),
        ({"eve": None}, "eve"),
        ({"irs_area": [10, 0, 20, 30]}, "irs_area"),
    ],
)
def test_validation_errors_name_the_field(raw, field):
    with pytest.raises(ConfigError, match=field):
        config_from_dict(raw)


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError, match="parse error"):
        load_config(_write_yaml(tmp_path, "n_irs: [1, 2\n"))
    with pytest.raises(ConfigError, match="mapping"):
        load_config(_write_yaml(tmp_path, "- 1\n- 2\n"))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.yaml"))


def test_dump_round_trips(tmp_path):
    cfg = config_from_dict({"n_irs": 8, "sweep": {"axis": "power_dbm", "values": [20, 25]}, "eve": [80, 10]})
    assert load_config(_write_yaml(tmp_path, cfg.dump())) == cfg


def test_sweep_cells_cover_value_scheme_seed():
    cfg = config_from_dict(
        {"sweep": {"axis": "n_irs", "values": [4, 6]}, "schemes": ["proposed", "mrt"], "n_seeds": 3, "seed": 7}
    )
    cells = sweep_cells(cfg)
    assert len(cells) == 12
    assert [c.seed for c in cells[:3]] == [7, 8, 9]
    assert {c.config.n_irs for c in cells} == {4, 6}


def test_eve_area_axis_switches_to_suspicious_area():
    cfg = config_from_dict({"sweep": {"axis": "eve_area_index", "values": [0, 3]}})
    p = cfg.at_sweep_value(3).system_params()
    assert p.eve_loc is None and p.eve_area == Rect(*cfg.eve_areas[3])
    with pytest.raises(ConfigError, match="sweep.values"):
        config_from_dict({"sweep": {"axis": "eve_area_index", "values": [4]}})


# --- csv --------------------------------------------------------------------


def test_empty_results_give_header_only(tmp_path):
    path = emit_csv([], tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == ",".join(CSV_COLUMNS) + "\n"


def test_column_order():
    assert CSV_COLUMNS == (
        "sweep_value", "scheme", "seed", "rate_bits", "omega_i_x", "omega_i_y",
        "eve_x", "eve_y", "outage_hat", "iters", "wall_ms",
    )


def test_csv_round_trip(tmp_path):
    recs = [
        Record(20.0, "proposed", 3, 0.1 + 0.2, 100.11084467294458, 20.0, 95.0, 13.0, 0.0123, 4, 1.5e-3),
        Record(float("nan"), "mrt", 0, 0.0, 1e-300, 30.0, -5.0, 13.0, 1.0, 0, 0.0),
    ]
    rows = read_csv(emit_csv(recs, tmp_path / "r.csv"))
    assert list(rows[0]) == list(CSV_COLUMNS)
    for rec, row in zip(recs, rows):
        assert row["scheme"] == rec.scheme and int(row["seed"]) == rec.seed and int(row["iters"]) == rec.iters
        for col in ("rate_bits", "omega_i_x", "omega_i_y", "eve_x", "eve_y", "outage_hat", "wall_ms"):
            assert float(row[col]) == getattr(rec, col)
    assert rows[1]["sweep_value"] == "nan"


def test_summary_mean_and_se():
    recs = [Record(1.0, "proposed", s, r, 0, 0, 0, 0, 0, 1, 0) for s, r in enumerate((1.0, 2.0, 3.0))]
    recs.append(Record(1.0, "proposed", 9, float("nan"), 0, 0, 0, 0, 0, 0, 0, error="boom"))
    mean, se, n = summarize(recs)[(1.0, "proposed")]
    assert (mean, n) == (2.0, 3)
    assert se == pytest.approx(1 / 3**0.5)


# --- sweeps -----------------------------------------------------------------


def test_identical_config_gives_identical_csv_bytes(tmp_path):
    cfg = config_from_dict({**SMALL, "schemes": ["proposed", "random_location"]})
    a = emit_csv(run_sweep(cfg).records, tmp_path / "a.csv").read_bytes()
    b = emit_csv(run_sweep(cfg).records, tmp_path / "b.csv").read_bytes()
    assert a == b
    assert a.count(b"\n") == 1 + 4


def test_worker_pool_keeps_row_order():
    cfg = config_from_dict({**SMALL, "sweep": {"axis": "power_dbm", "values": [25, 30]}})
    serial = run_sweep(cfg).records
    pooled = run_sweep(replace(cfg, workers=2)).records
    assert pooled == serial


def test_failed_cell_is_recorded_and_sweep_continues(monkeypatch):
    real = bench.run_scenario

    def flaky(cfg, scheme, seed):
        if seed == 0:
            raise SolverFailure("backend gave up")
        return real(cfg, scheme, seed)

    monkeypatch.setattr(bench, "run_scenario", flaky)
    table = run_sweep(config_from_dict(SMALL))
    assert [bool(r.error) for r in table.records] == [True, False]
    assert "SolverFailure" in table.records[0].error
    assert table.summary[(table.records[1].sweep_value, "proposed")][2] == 1


@pytest.mark.slow
def test_rate_increases_with_rician_factor():
    cfg = config_from_dict({"sweep": {"axis": "rician_k", "values": [2, 10]}, "n_seeds": 20})
    table = run_sweep(cfg)
    assert not any(r.error for r in table.records)
    assert table.summary[(10.0, "proposed")][0] > table.summary[(2.0, "proposed")][0]


# --- cli --------------------------------------------------------------------


def test_cli_run_prints_config_and_rows(capsys):
    assert cli.main(["run", "--scheme", "mrt", "--seed", "1"]) == cli.EXIT_OK
    out, err = capsys.readouterr()
    assert "# resolved configuration" in err and "n_irs: 5" in err and "seed: 1" in err
    lines = out.strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].split(",")[1:3] == ["mrt", "1"]


def test_cli_sweep_writes_csv(tmp_path, capsys):
    cfg = _write_yaml(tmp_path, "n_irs: 2\nverify_draws: 500\nrecord_timing: false\n")
    out = tmp_path / "sweep.csv"
    code = cli.main(["sweep", "--config", cfg, "--seeds", "2", "--sweep", "power_dbm=25,30", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = read_csv(out)
    assert [(r["sweep_value"], r["seed"]) for r in rows] == [("25.0", "0"), ("25.0", "1"), ("30.0", "0"), ("30.0", "1")]
    assert "mean" in capsys.readouterr().err


def test_cli_quantile_table(capsys):
    assert cli.main(["quantile", "--sweep", "n_irs=4,8"]) == cli.EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert "alpha_E" in lines[0] and len(lines) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--seeds", "0"],
        ["run", "--scheme", "nope"],
        ["sweep", "--sweep", "temperature=1,2"],
        ["verify", "--only", "11"],
        ["run", "--config", "/nonexistent/cfg.yaml"],
    ],
)
def test_cli_config_errors_exit_1(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    capsys.readouterr()


def test_cli_solver_failure_exits_2(monkeypatch, capsys):
    def boom(*_):
        raise SolverFailure("no certificate")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["run"]) == cli.EXIT_SOLVER
    monkeypatch.setattr(bench, "run_scenario", boom)
    assert cli.main(["sweep", "--seeds", "1"]) == cli.EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_cli_verify_exit_codes(monkeypatch, capsys):
    assert cli.main(["verify", "--only", "4,5"]) == cli.EXIT_OK
    assert capsys.readouterr().out.count("[PASS]") == 2

    from irs_secrecy import verify

    monkeypatch.setattr(verify, "run_criteria", lambda _: [CriterionResult(1, "stub", False, "forced", 0.0)])
    assert cli.main(["verify", "--only", "1"]) == cli.EXIT_ACCEPTANCE
    assert "[FAIL]" in capsys.readouterr().out
