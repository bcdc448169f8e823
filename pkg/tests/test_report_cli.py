import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from confdim import report as rpt
from confdim.cli import main
from confdim.pipeline import CONFIG_ENV, ConfigError, load_config
from confdim.spaces import SpaceSpec, generate, load
from confdim.svg import SVGUnsupported, render


def test_report_round_trip():
    r = rpt.new_report("bound", 3, {"kind": "carpet", "level": 4}, "0.1.0")
    r.update(beta=0.1 + 0.2, sigma=1 / 3, bound=4 / 3, L_annular="fail", x=np.float64(2.5),
             note="β≈½")
    text = rpt.dumps(r)
    back = rpt.loads(text)
    assert rpt.dumps(back) == text
    assert float(back["beta"]) == 0.1 + 0.2
    assert rpt.parse_exact(back["sigma"]) == 1 / 3
    assert back["note"] == "β≈½"
    assert list(back) == sorted(back)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_exact_strings_are_bit_exact(x):
    assert float(rpt.exact(x)) == x


def test_report_validation():
    with pytest.raises(rpt.ReportError):
        rpt.loads("{")
    with pytest.raises(rpt.ReportError):
        rpt.loads(json.dumps({"schema": "other"}))
    good = rpt.new_report("all", 0, {}, "0.1.0")
    good["schema_version"] = 99
    with pytest.raises(rpt.ReportError):
        rpt.validate(good)


def test_svg_only_for_planar_coordinates():
    X = generate(SpaceSpec("carpet", 1))
    text = render(X, {"0": [0, 1], "1": [2, 3]})
    assert text.startswith("<svg") and text.count("<circle") == 8
    with pytest.raises(SVGUnsupported):
        render(X.to_matrix())


def test_generate_writes_space(tmp_path):
    out = tmp_path / "c3.txt"
    assert main(["generate", "--space", "carpet", "--level", "3", "--out", str(out)]) == 0
    assert load(out).n == 512


def test_bound_on_interval_fails_annular(tmp_path):
    out = tmp_path / "r.json"
    code = main(["bound", "--space", "interval", "--grid", "65", "--samples", "16",
                 "--out", str(out)])
    assert code == 1
    r = rpt.read(out)
    assert "annular connectivity fail" in r["messages"]
    assert r["bound"] == "uncertified"


def test_unzip_on_interval_reports_cut_point(tmp_path):
    out = tmp_path / "u.json"
    assert main(["unzip", "--space", "interval", "--grid", "65", "--out", str(out)]) == 1
    assert rpt.read(out)["unzip"]["error"] == "cut point encountered"


def test_all_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["all", "--space", "carpet", "--level", "4", "--seed", "0",
                     "--out", str(p)]) == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    r = rpt.loads(a.decode("utf-8"))
    assert r["certification"]["bound"] == "certified" and float(r["bound"]) > 1
    assert "timings" not in r


def test_svg_and_timings(tmp_path):
    svg = tmp_path / "s.svg"
    out = tmp_path / "s.json"
    assert main(["family", "--space", "carpet", "--level", "4", "--svg", str(svg),
                 "--out", str(out), "--timings"]) == 0
    assert svg.read_text().count("<polyline") == 4
    assert "family" in rpt.read(out)["timings"]


def test_usage_errors(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    assert main(["all", "--level", "notanint"]) == 2
    assert main(["all", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["analyze", "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"colour": "blue"}))
    assert main(["analyze", "--config", str(unknown)]) == 2
    assert main(["generate", "--space", "carpet", "--level", "1"]) == 2
    assert main(["analyze", "--space", "file", "--input", str(tmp_path / "nope.txt")]) == 2


def test_config_file_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space": "square", "grid": 9, "seed": 5}))
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    c = load_config(overrides={"seed": 7})
    assert (c.space, c.grid, c.seed) == ("square", 9, 7)
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config().space == "carpet"
    with pytest.raises(ConfigError):
        load_config(overrides={"beta_policy": "guess"})


def test_analyze_prints_report(capsys):
    assert main(["analyze", "--space", "carpet", "--level", "3", "--samples", "8"]) == 0
    r = rpt.loads(capsys.readouterr().out)
    assert r["command"] == "analyze" and r["n"] == 512
    assert r["certification"]["tau"] == "box-counting estimate"
