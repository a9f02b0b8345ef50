import csv
import json

import pytest

from blowupspec import cli, jost
from blowupspec.errors import ConfigError


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_rel_tol_zero_names_field(tmp_path, capsys):
    cfg = _write(tmp_path, "dimension = 1\nb_list = [0.35]\n[integrator]\nrel_tol = 0\n")
    code = cli.main(["run", "--config", str(cfg), "--output-dir", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    assert "integrator.rel_tol" in capsys.readouterr().err


@pytest.mark.parametrize("raw,field", [
    ({"b_list": [0.3, 0.35]}, "b_list"),
    ({"b_list": [0.1]}, "b_list[0]"),
    ({"newton": {"tol": -1.0}}, "newton.tol"),
    ({"scan": {"bogus": 1}}, "scan.bogus"),
    ({"matching": {"r_infinity_factor": 3.0}}, "matching.r_infinity_factor"),
    ({"scan": {"im_max_over_b": 12.0}}, "scan.im_max_over_b"),
    ({"l_max": 1.5}, "l_max"),
    ({"colour": 1}, "colour"),
])
def test_validation_paths(raw, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        cli.config_from_dict(raw)


def test_unreadable_config(tmp_path):
    bad = _write(tmp_path, "dimension = [", "bad.toml")
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG


def test_defaults_valid():
    cfg = cli.config_from_dict({})
    assert cfg.dimension == 1 and cfg.b_list == [0.35] and cfg.matching.x_star_rule == "default"


def test_empty_b_list(tmp_path):
    out = tmp_path / "o"
    cfg = _write(tmp_path, f"dimension = 1\nb_list = []\noutput_dir = '{out}'\n")
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_OK
    files = sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
    assert files == ["errors.json", "ground_state_d1.csv", "reports/ground_state_d1.json", "verdicts.json"]


def test_specfun_selftest(capsys):
    assert cli.main(["specfun-selftest"]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["pass"] is True


def test_wkb_stage(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["wkb-check", "--b", "0.35", "--output-dir", str(out)]) == cli.EXIT_OK
    rows = list(csv.DictReader(open(out / "wkb_check.csv")))
    assert len(rows) == 10 and {r["nu"] for r in rows} == {"low", "1", "3", "10", "30"}


def test_cache_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOWUPSPEC_CACHE", str(tmp_path / "c"))
    assert cli.cache_dir(cli.RunConfig(output_dir=str(tmp_path / "o"))) == tmp_path / "c"


def _spectrum_report(tmp_path, b):
    rep = {"d": 1, "b": b, "classes": [
        {"l": 0, "zeros": [{"re": 0.0, "im": 0.1, "multiplicity": 1, "winding": 1, "residual": 0.0}]},
        {"l": 1, "zeros": []}]}
    path = tmp_path / "reports" / f"spectrum_d1_b{b:g}.json"
    cli.write_json(path, rep)


def test_emit_plot_data(tmp_path):
    _spectrum_report(tmp_path, 0.35)
    missing = cli.emit_plot_data(tmp_path, 1)
    assert missing == ["bifurcation_d1.json"]
    rows = list(csv.reader(open(tmp_path / "plots" / "zeros_d1_b0.35.csv")))
    assert rows[0] == ["l", "re", "im", "mult"] and len(rows) == 2


def test_emit_plot_data_trend(tmp_path):
    _spectrum_report(tmp_path, 0.35)
    blocks = [{"b": b, "lambda3_pred": [0, p], "lambda3_found": [0, f], "ratio3": f / p}
              for b, p, f in ((0.3, 0.05, 0.03), (0.4, 0.3, 0.13))]
    cli.write_json(tmp_path / "reports" / "bifurcation_d1.json", {"blocks": blocks})
    assert cli.emit_plot_data(tmp_path, 1) == []
    rows = list(csv.DictReader(open(tmp_path / "plots" / "lambda3_trend.csv")))
    assert [float(r["b"]) for r in rows] == [0.4, 0.3]


def test_missing_reports_listed(tmp_path):
    assert cli.emit_plot_data(tmp_path, 2) == ["spectrum_d2_b*.json", "bifurcation_d2.json"]


def test_write_json_is_stable(tmp_path):
    obj = {"z": 0.1 + 0.2, "a": [1 / 3]}
    cli.write_json(tmp_path / "x.json", obj)
    assert (tmp_path / "x.json").read_text() == jost.dumps(obj)
