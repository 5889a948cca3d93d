import math

import pytest

from cellcap import cli, experiments
from cellcap.experiments import FixedParams, SweepSpec, read_csv, run_sweep, rows_to_csv, sweep_values


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# sweeps and CSV
# ---------------------------------------------------------------------------


def test_sweep_values_are_drift_free():
    assert sweep_values(5, 100, 5) == tuple(float(v) for v in range(5, 101, 5))
    assert sweep_values(0.1, 0.3, 0.1) == (0.1, 0.2, 0.3)
    assert sweep_values(1, 1, 1) == (1.0,)


def test_analytic_and_closed_form_agree_on_lambda_b_sweep():
    spec = SweepSpec("lambda_b", sweep_values(5, 100, 5), FixedParams(lambda_u=30.0), ("analytic", "closed_form"))
    for r in run_sweep(spec):
        for m in ("p_success", "p_service", "c_service"):
            assert r.columns[f"analytic_{m}"] == pytest.approx(r.columns[f"closed_form_{m}"], rel=1e-6)


def test_single_point_sweep():
    spec = SweepSpec("lambda_u", (12.0,))
    rows = run_sweep(spec)
    assert len(rows) == 1 and not rows[0].failed


def test_alpha_two_row_fails_alone():
    spec = SweepSpec("alpha", (2.0, 3.0, 4.0), paths=("analytic",))
    rows = run_sweep(spec)
    assert rows[0].failed and "diverg" in rows[0].error
    assert all(math.isnan(v) for v in rows[0].columns.values())
    assert not rows[1].failed and not rows[2].failed
    header, body = read_csv(rows_to_csv(spec, rows))
    assert header[-1] == "error"
    assert body[0][-1].startswith("analytic:")
    assert body[1][-1] == ""


def test_closed_form_failure_leaves_other_paths():
    spec = SweepSpec("alpha", (3.0, 4.0), paths=("analytic", "closed_form"))
    rows = run_sweep(spec)
    assert rows[0].failed and "closed_form" in rows[0].error
    assert math.isnan(rows[0].columns["closed_form_p_service"])
    assert 0 < rows[0].columns["analytic_p_service"] < 1


def test_shadowed_path_prefix_is_kept_apart():
    spec = SweepSpec("lambda_b", (30.0,), paths=("monte_carlo", "monte_carlo_shadowed"), metrics=("p_service",),
                     n_trials=2)
    cols = spec.columns()
    assert cols == ["lambda_b", "monte_carlo_p_service", "monte_carlo_p_service_se",
                    "monte_carlo_shadowed_p_service", "monte_carlo_shadowed_p_service_se"]
    row = run_sweep(spec)[0]
    assert row.columns["monte_carlo_p_service"] != row.columns["monte_carlo_shadowed_p_service"]


def test_csv_round_trip_is_lossless():
    spec = SweepSpec("gamma_db", (-10.0, 0.0, 10.0), paths=("analytic", "monte_carlo"), n_trials=2)
    rows = run_sweep(spec)
    header, body = read_csv(rows_to_csv(spec, rows))
    assert header == spec.columns()
    for r, line in zip(rows, body):
        assert float(line[0]) == r.value
        for name, text in zip(header[1:], line[1:]):
            assert float(text) == r.columns[name]


@pytest.mark.parametrize(
    "kw",
    [
        {"parameter": "beta", "values": (1.0,)},
        {"parameter": "alpha", "values": ()},
        {"parameter": "alpha", "values": (3.0, 3.0)},
        {"parameter": "alpha", "values": (3.0,), "paths": ("exact",)},
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        SweepSpec(**kw)


def test_figure_tables_have_expected_shape(tmp_path):
    paths = experiments.figure_preset("fig4", 1, tmp_path)
    assert [p.name for p in paths] == ["fig4.csv", "fig4.gp"]
    header, body = read_csv(paths[0].read_text())
    assert header == ["lambda_b", "c_service_alpha_2.5", "c_service_alpha_3", "c_service_alpha_3.5",
                      "c_service_alpha_4"]
    assert len(body) == 20
    assert "fig4.csv" in paths[1].read_text()


def test_fig2a_table(tmp_path):
    text, script = experiments.figure_table("fig2a", 3, user_samples=10_000)
    header, body = read_csv(text)
    assert header[:3] == ["area", "f_x", "f_y"]
    assert len(body) == 100
    width = float(body[1][0]) - float(body[0][0])
    assert sum(float(r[3]) for r in body) * width == pytest.approx(1.0)
    assert "plot" in script


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_analytic_command(capsys):
    code, out, _ = run(capsys, "analytic", "--lambda-b", "30", "--lambda-u", "30")
    assert code == 0
    header, body = read_csv(out)
    assert header[0] == "path"
    rows = {r[0]: dict(zip(header[1:], map(float, r[1:]))) for r in body}
    assert rows["closed_form"]["p_service"] == pytest.approx(0.40086, abs=1e-5)
    assert rows["analytic"]["p_service"] == pytest.approx(rows["closed_form"]["p_service"], rel=1e-6)


def test_analytic_command_skips_closed_form_off_domain(capsys):
    code, out, _ = run(capsys, "analytic", "--alpha", "3")
    assert code == 0
    assert "closed_form" not in out


def test_sweep_command_writes_file(capsys, tmp_path):
    out_file = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--param", "lambda_b", "--from", "5", "--to", "15", "--step", "5",
                     "--paths", "analytic,closed_form", "--out", str(out_file))
    assert code == 0
    header, body = read_csv(out_file.read_text())
    assert len(body) == 3 and header[0] == "lambda_b"


def test_sweep_with_failed_row_exits_zero(capsys):
    code, out, err = run(capsys, "sweep", "--param", "alpha", "--from", "2", "--to", "4", "--step", "1")
    assert code == 0
    assert "failed" in err
    assert out.splitlines()[0].endswith(",error")


@pytest.mark.parametrize(
    "argv",
    [
        ["analytic", "--alpha", "2"],
        ["analytic", "--lambda-b", "-1"],
        ["sweep", "--param", "nope", "--from", "1", "--to", "2", "--step", "1"],
        ["sweep", "--param", "alpha", "--from", "3", "--to", "4", "--step", "0"],
        ["figure", "fig9", "--out", "x"],
        ["analytic", "--lambda-b", "abc"],
        [],
    ],
)
def test_validation_errors_exit_1(capsys, argv):
    # argparse errors surface as SystemExit, the rest as a return code
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_unwritable_output_exits_2(capsys, tmp_path):
    target = tmp_path / "missing" / "dir" / "x.csv"
    code, _, err = run(capsys, "analytic", "--out", str(target))
    assert code == 2
    assert str(target) in err


def test_missing_config_exits_1(capsys, tmp_path):
    code, _, err = run(capsys, "analytic", "--config", str(tmp_path / "none.conf"))
    assert code == 1


def _closed_form_row(out):
    header, body = read_csv(out)
    row = next(r for r in body if r[0] == "closed_form")
    return dict(zip(header[1:], map(float, row[1:])))


def test_config_precedence(capsys, tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("# test config\nlambda-b = 60\nlambda_u = 90  # trailing comment\ngamma_db = 10\n")
    from_cfg = _closed_form_row(run(capsys, "analytic", "--config", str(conf))[1])
    flag_wins = _closed_form_row(run(capsys, "analytic", "--config", str(conf), "--gamma-db", "0")[1])
    ref = experiments.analytic.metrics(
        experiments.Densities(60.0, 90.0), experiments.Channel(gamma_hat=10.0)
    )
    assert from_cfg["c_service"] == pytest.approx(ref.c_service, rel=1e-12)
    ref0 = experiments.analytic.metrics(experiments.Densities(60.0, 90.0), experiments.Channel())
    assert flag_wins["c_service"] == pytest.approx(ref0.c_service, rel=1e-12)
    assert _closed_form_row(run(capsys, "analytic")[1])["p_service"] == pytest.approx(0.40086, abs=1e-5)


def test_config_unknown_key(capsys, tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("colour = blue\n")
    code, _, err = run(capsys, "analytic", "--config", str(conf))
    assert code == 1 and "unknown key" in err


def test_seed_resolution_order(monkeypatch, tmp_path):
    parser = cli.build_parser()
    monkeypatch.setenv("CELLCAP_SEED", "99")
    args = parser.parse_args(["compare"])
    args._config = {}
    assert cli.resolve(args, "seed") == 99
    args._config = {"seed": "5"}
    assert cli.resolve(args, "seed") == 5
    args = parser.parse_args(["compare", "--seed", "3"])
    args._config = {"seed": "5"}
    assert cli.resolve(args, "seed") == 3
    monkeypatch.delenv("CELLCAP_SEED")
    args = parser.parse_args(["compare"])
    args._config = {}
    assert cli.resolve(args, "seed") == 42


def test_env_seed_changes_monte_carlo(capsys, monkeypatch):
    argv = ["sweep", "--param", "lambda_b", "--from", "30", "--to", "30", "--step", "1", "--paths", "monte_carlo",
            "--trials", "2"]
    monkeypatch.setenv("CELLCAP_SEED", "1")
    _, a, _ = run(capsys, *argv)
    _, a2, _ = run(capsys, *argv)
    monkeypatch.setenv("CELLCAP_SEED", "2")
    _, b, _ = run(capsys, *argv)
    assert a == a2 and a != b


def test_compare_command(capsys):
    code, out, _ = run(capsys, "compare", "--trials", "3")
    assert code == 0
    header, body = read_csv(out)
    assert [r[0] for r in body] == ["dependent", "independent", "dependent_minus_independent"]


def test_figure_command(capsys, tmp_path):
    code, out, _ = run(capsys, "figure", "fig4", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "fig4.csv").exists() and (tmp_path / "fig4.gp").exists()
