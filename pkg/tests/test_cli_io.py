import dataclasses
import json
import math
import os

import numpy as np
import pytest

from tanktrack import (
    CflError,
    ConfigError,
    ExperimentConfig,
    FunnelSpec,
    InitialProfile,
    PhysicalParams,
    RunFailure,
    SpatialGrid,
    TRACE_COLUMNS,
    TRACE_HEADER,
    TraceValidationError,
    derive_grids,
    emit_plots,
    format_config,
    main,
    parse_config,
    preset_experiment1,
    preset_experiment2,
    PRESETS,
    read_trace,
    run_closed_loop,
    run_setups,
    simulate_config,
    transfer_sweep,
    validate_run_config,
    validate_trace,
    write_config,
    write_trace,
)

P = PhysicalParams(m=1.0, h0=0.5, g=9.81, mu=0.1)


def _small_config(out_dir, **overrides):
    """Fast linear scenario (400 samples, 200 nodes, wide funnels)."""
    cfg = preset_experiment1()
    changes = dict(
        m_points=400,
        horizon=0.45,
        funnel0=FunnelSpec(20.0, cfg.funnel0.omega),
        funnel1=FunnelSpec(20.0, cfg.funnel1.omega),
        out_dir=str(out_dir),
    )
    changes.update(overrides)
    return dataclasses.replace(cfg, **changes)


# ----------------------------------------------------------------------
# presets and grid derivation


def test_presets_validate_and_share_grid_facts():
    for name, make in PRESETS.items():
        info = validate_run_config(make())
        assert info["m"] == 2000
        assert info["n"] == 1000
    info = validate_run_config(preset_experiment1())
    assert info["dt"] == pytest.approx(0.00022587475787180135, rel=1e-15)
    assert info["cfl"] == pytest.approx(0.4997498749374688, rel=1e-15)
    assert preset_experiment2().model == "both"


def test_derive_grids_scales_with_sampling():
    cfg = preset_experiment1()
    _, grid = derive_grids(cfg)
    assert grid.n_points == 1000
    _, half = derive_grids(dataclasses.replace(cfg, m_points=1000))
    assert half.n_points == 500


def test_derive_grids_rejects_tiny_sampling():
    cfg = dataclasses.replace(preset_experiment1(), m_points=2)
    with pytest.raises(ConfigError, match="node"):
        derive_grids(cfg)


def test_derive_grids_cfl_hint_is_usable():
    cfg = dataclasses.replace(preset_experiment1(), horizon=10.0)
    with pytest.raises(CflError, match=r"grid\.horizon <=") as err:
        derive_grids(cfg)
    h_ok = float(str(err.value).rsplit("<=", 1)[1].split()[0])
    derive_grids(dataclasses.replace(cfg, horizon=h_ok))  # hint must be stable


# ----------------------------------------------------------------------
# config files


def test_config_round_trip(tmp_path):
    cfg = _small_config(tmp_path / "out", model="linear")
    path = str(tmp_path / "scenario.cfg")
    write_config(cfg, path)
    assert parse_config(path) == cfg


def test_config_text_is_flat_key_value(tmp_path):
    text = format_config(_small_config(tmp_path))
    for line in text.splitlines():
        assert "=" in line
    assert "model = linear" in text
    assert "grid.m = 400" in text


def _write_text(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_config_parse_errors(tmp_path):
    base = format_config(_small_config(tmp_path))

    with pytest.raises(ConfigError, match="not found"):
        parse_config(str(tmp_path / "nope.cfg"))

    path = _write_text(tmp_path, "unknown.cfg", base + "physical.nu = 1.0\n")
    with pytest.raises(ConfigError, match="unknown config key.*physical.nu"):
        parse_config(path)

    path = _write_text(tmp_path, "dup.cfg", base + "model = linear\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(path)

    stripped = "\n".join(
        line for line in base.splitlines() if not line.startswith("physical.mu")
    )
    path = _write_text(tmp_path, "missing.cfg", stripped + "\n")
    with pytest.raises(ConfigError, match="missing required.*physical.mu"):
        parse_config(path)

    path = _write_text(tmp_path, "badval.cfg", base.replace("0.1", "abc", 1))
    with pytest.raises(ConfigError, match="bad value"):
        parse_config(path)

    path = _write_text(tmp_path, "noeq.cfg", base + "banana\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config(path)


def test_config_accepts_comments_and_blanks(tmp_path):
    cfg = _small_config(tmp_path)
    text = "# scenario\n\n" + format_config(cfg)
    assert parse_config(_write_text(tmp_path, "c.cfg", text)) == cfg


def test_both_model_requires_matched_wall_drag():
    cfg = preset_experiment2()
    bad = dataclasses.replace(cfg.params, c_d=0.5)
    with pytest.raises(ConfigError, match="c_d"):
        dataclasses.replace(cfg, params=bad)


def test_config_rejects_unknown_model_and_bad_grid(tmp_path):
    with pytest.raises(ConfigError, match="model"):
        _small_config(tmp_path, model="quantum")
    with pytest.raises(ConfigError):
        _small_config(tmp_path, horizon=-1.0)
    with pytest.raises(ConfigError):
        _small_config(tmp_path, snapshots=0)


# ----------------------------------------------------------------------
# initial profiles


def test_initial_profile_flat_and_sine():
    grid = SpatialGrid(41)  # 41 nodes put the first crest zeta = 1/4 on a node
    state = InitialProfile("flat").build(grid, P)
    assert np.all(state.z1 == P.h0)
    assert np.all(state.z2 == 0.0)

    state = InitialProfile("sine-squared", amplitude=0.2, waves=2.0).build(grid, P)
    assert np.all(state.z1 == P.h0)
    assert state.z2.max() == pytest.approx(0.2, rel=1e-12)
    assert abs(state.z2[0]) < 1e-15 and abs(state.z2[-1]) < 1e-15


def test_initial_profile_table(tmp_path):
    path = tmp_path / "profile.csv"
    path.write_text("0.0,0.5,0.0\n0.5,0.54,0.02\n1.0,0.5,0.0\n")
    grid = SpatialGrid(101)
    state = InitialProfile("table", table=str(path)).build(grid, P)
    assert state.z1[0] == 0.5 and state.z1[-1] == 0.5
    assert state.z1[50] == pytest.approx(0.54, rel=1e-12)
    assert state.z2[50] == pytest.approx(0.02, rel=1e-12)
    # linear interpolation between the knots
    assert state.z1[25] == pytest.approx(0.52, rel=1e-12)


def test_initial_profile_table_errors(tmp_path):
    grid = SpatialGrid(11)
    with pytest.raises(ConfigError, match="requires"):
        InitialProfile("table")
    with pytest.raises(ConfigError, match="one of"):
        InitialProfile("gaussian")

    missing = InitialProfile("table", table=str(tmp_path / "gone.csv"))
    with pytest.raises(ConfigError, match="cannot read"):
        missing.build(grid, P)

    bad = tmp_path / "bad.csv"
    bad.write_text("0.0,0.5,0.0\n0.5,0.5\n")
    with pytest.raises(ConfigError):
        InitialProfile("table", table=str(bad)).build(grid, P)

    nonmono = tmp_path / "nonmono.csv"
    nonmono.write_text("0.0,0.5,0.0\n0.6,0.5,0.0\n0.4,0.5,0.0\n1.0,0.5,0.0\n")
    with pytest.raises(ConfigError, match="increase"):
        InitialProfile("table", table=str(nonmono)).build(grid, P)

    shortspan = tmp_path / "short.csv"
    shortspan.write_text("0.1,0.5,0.0\n1.0,0.5,0.0\n")
    with pytest.raises(ConfigError, match="cover"):
        InitialProfile("table", table=str(shortspan)).build(grid, P)


# ----------------------------------------------------------------------
# trace serialization and validation


@pytest.fixture(scope="module")
def small_record(tmp_path_factory):
    cfg = _small_config(tmp_path_factory.mktemp("run"))
    return run_closed_loop(run_setups(cfg)[0])


def test_trace_round_trip(tmp_path, small_record):
    path = str(tmp_path / "trace.csv")
    write_trace(small_record, path)
    cols = read_trace(path)
    for name in TRACE_COLUMNS:
        # %.17g round trips doubles exactly, including the inf at t = 0
        assert np.array_equal(cols[name], small_record.column(name))
    validate_trace(path)


def _corrupt(src, dst, fix):
    lines = open(src, "r", encoding="utf-8").read().splitlines()
    fix(lines)
    with open(dst, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def test_trace_validation_rejects_corruption(tmp_path, small_record):
    good = str(tmp_path / "good.csv")
    write_trace(small_record, good)
    bad = str(tmp_path / "bad.csv")

    def set_cell(row, col, value):
        def fix(lines):
            parts = lines[row].split(",")
            parts[col] = value
            lines[row] = ",".join(parts)

        return fix

    cases = [
        (lambda lines: lines.__setitem__(0, "time,stuff"), "header"),
        (set_cell(3, 0, "0"), "increase strictly"),
        (set_cell(4, 8, "0.5"), "dips below 1"),
        (set_cell(10, 5, "999"), "funnel inequality"),
        (set_cell(5, 6, "inf"), "non-finite"),
        (set_cell(5, 1, "nan"), "non-finite"),
        (set_cell(2, 3, "abc"), "could not convert"),
        (lambda lines: lines.__setitem__(2, lines[2].rsplit(",", 1)[0]), "expected"),
    ]
    for fix, match in cases:
        _corrupt(good, bad, fix)
        with pytest.raises(TraceValidationError, match=match):
            validate_trace(bad)


def test_read_trace_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(TRACE_HEADER + "\n")
    with pytest.raises(TraceValidationError, match="no data"):
        read_trace(str(path))


# ----------------------------------------------------------------------
# plots and the one-call experiment driver


def test_emit_plots_writes_svg(tmp_path, small_record):
    files = emit_plots(small_record, str(tmp_path), stem="demo")
    assert sorted(os.path.basename(f) for f in files) == [
        "demo_funnel.svg",
        "demo_kinematics.svg",
    ]
    for f in files:
        assert os.path.getsize(f) > 1000
        with open(f, "r", encoding="utf-8") as fh:
            assert "<svg" in fh.read(400)


def test_emit_plots_rejects_empty_trace(small_record):
    empty = dataclasses.replace(
        small_record, **{name: small_record.column(name)[:0] for name in TRACE_COLUMNS}
    )
    with pytest.raises(ValueError, match="empty"):
        emit_plots(empty, "unused")


def test_simulate_config_single_leg(tmp_path):
    cfg = _small_config(tmp_path / "out")
    summary = simulate_config(cfg)
    assert summary["model"] == "linear"
    assert summary["grid"]["n"] == 200
    assert set(summary["runs"]) == {"linear"}
    for name in ("trace_linear.csv", "linear_kinematics.svg", "linear_funnel.svg",
                 "summary.json"):
        assert os.path.isfile(os.path.join(cfg.out_dir, name))
    with open(os.path.join(cfg.out_dir, "summary.json"), encoding="utf-8") as fh:
        assert json.load(fh)["model"] == "linear"


def test_simulate_config_dual_leg_overlay(tmp_path):
    cfg = _small_config(
        tmp_path / "out",
        model="both",
        params=dataclasses.replace(P, c_d=2.0 * P.mu),
    )
    summary = simulate_config(cfg)
    assert set(summary["runs"]) == {"linear", "nonlinear"}
    comp = summary["comparison"]
    assert comp["max_output_gap"] < comp["funnel_radius_at_horizon"]
    assert comp["gap_over_radius"] == pytest.approx(
        comp["max_output_gap"] / comp["funnel_radius_at_horizon"], rel=1e-12
    )
    for name in ("trace_nonlinear.csv", "overlay_kinematics.svg", "overlay_funnel.svg"):
        assert os.path.isfile(os.path.join(cfg.out_dir, name))


# ----------------------------------------------------------------------
# command line


def test_cli_simulate_is_deterministic(tmp_path):
    cfg_path = str(tmp_path / "scenario.cfg")
    write_config(_small_config(tmp_path / "ignored"), cfg_path)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["simulate", "--config", cfg_path, "--out", out1]) == 0
    assert main(["simulate", "--config", cfg_path, "--out", out2, "--seed", "7"]) == 0
    with open(os.path.join(out1, "trace_linear.csv"), "rb") as f1:
        with open(os.path.join(out2, "trace_linear.csv"), "rb") as f2:
            assert f1.read() == f2.read()


def test_cli_rejects_bad_usage(tmp_path, capsys):
    assert main([]) == 2  # argparse: missing subcommand
    assert main(["--help"]) == 0
    cfg_path = str(tmp_path / "s.cfg")
    write_config(_small_config(tmp_path), cfg_path)
    rc = main(["simulate", "--config", cfg_path, "--preset", "experiment1"])
    assert rc == 2
    assert "not both" in capsys.readouterr().err


def test_cli_exit_code_two_on_config_error(tmp_path, capsys):
    path = _write_text(tmp_path, "bad.cfg", "model = linear\nphysical.zeta = 1\n")
    assert main(["simulate", "--config", path]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "gone.cfg")]) == 2
    capsys.readouterr()


def test_cli_exit_code_three_on_run_failure(tmp_path, capsys):
    cfg = _small_config(
        tmp_path / "out",
        funnel0=FunnelSpec(1e6, kind="constant"),
        funnel1=FunnelSpec(1e6, kind="constant"),
    )
    cfg_path = str(tmp_path / "razor.cfg")
    write_config(cfg, cfg_path)
    assert main(["simulate", "--config", cfg_path]) == 3
    assert "run failed" in capsys.readouterr().err


def test_cli_analyze_transfer(tmp_path, capsys):
    out = str(tmp_path / "ana")
    assert main(["analyze", "transfer", "--terms", "200", "--out", out]) == 0
    capsys.readouterr()
    path = os.path.join(out, "transfer_sweep.csv")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = fh.read().splitlines()
    assert header == ["lam_re", "lam_im", "closed_re", "closed_im",
                      "series_rel", "oracle_rel"]
    assert len(rows) == 20


def test_cli_analyze_impulse(tmp_path, capsys):
    out = str(tmp_path / "imp")
    assert main(["analyze", "impulse", "--atoms", "50", "--out", out]) == 0
    capsys.readouterr()
    assert os.path.isfile(os.path.join(out, "impulse_comb.csv"))


def test_cli_check_config(capsys):
    assert main(["check", "config", "--preset", "experiment1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["valid"] is True
    assert report["grid"]["n"] == 1000


def test_transfer_sweep_rows():
    rows = transfer_sweep(P, lams=(1.0 + 0.0j, 2.0 + 1.0j), n_terms=500,
                          oracle_points=2000)
    assert len(rows) == 2
    for row in rows:
        assert row["series_rel"] < 1e-2
        assert row["oracle_rel"] < 1e-5
