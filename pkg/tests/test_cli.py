import argparse
import json

import pytest

from excessmort.artifacts import canonical_json, read_artifact
from excessmort.cli import (
    DEFAULT_SEED,
    EXIT_DATA,
    EXIT_OK,
    EXIT_STRICT,
    EXIT_USAGE,
    main,
    parse_month,
    parse_month_set,
    parse_window,
    parse_years,
)
from excessmort.dataset import reconstructed_series, write_csv

from conftest import make_series

FAST = ["--chains", "2", "--iterations", "300", "--warmup", "150", "--threads", "1"]


@pytest.fixture(autouse=True)
def _fixed_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1500000000")
    monkeypatch.delenv("EXCESSMORT_SEED", raising=False)


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path), *FAST])


def test_parsers():
    assert parse_years("2010:2012") == [2010, 2011, 2012]
    assert parse_years("2012,2010") == [2010, 2012]
    assert parse_month("2014-10") == (2014, 10)
    assert parse_window("2017-11:2018-01") == [(2017, 11), (2017, 12), (2018, 1)]
    assert parse_month_set("09:12") == [9, 10, 11, 12]
    for fn, bad in [(parse_years, "2012:2010"), (parse_month, "2014-13"), (parse_window, "2017-10:2017-09"), (parse_month_set, "0:3")]:
        with pytest.raises(argparse.ArgumentTypeError):
            fn(bad)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["fit", "--model", "5"]) == EXIT_USAGE
    assert main(["excess", "--window", "2017-09:2017-08"]) == EXIT_USAGE
    assert run(tmp_path, "plot", "--figure", "3a") == EXIT_USAGE
    assert "needs --draws" in capsys.readouterr().err


def test_bad_seed_env_is_usage_error(tmp_path, monkeypatch):
    monkeypatch.setenv("EXCESSMORT_SEED", "abc")
    assert run(tmp_path, "fit", "--model", "1", "--years", "2010:2012") == EXIT_USAGE


def test_data_errors_exit_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("year,month,deaths\n2010,1,5\n2010,3,6\n")
    assert run(tmp_path, "fit", "--model", "1", "--data", str(bad)) == EXIT_DATA
    # a window inside the fitting years is leakage
    assert run(tmp_path, "excess", "--window", "2016-09:2016-10", "--years", "2010:2016") == EXIT_DATA
    assert run(tmp_path, "placebo", "--scheme", "loyo", "--years", "2015:2016", "--target", "2017") == EXIT_DATA


def test_strict_mode_exits_4_on_sampler_warning(tmp_path):
    csv = tmp_path / "flat.csv"
    write_csv(make_series([2000] * 36), csv)
    assert run(tmp_path, "fit", "--model", "1", "--data", str(csv)) == EXIT_OK
    assert run(tmp_path, "fit", "--model", "1", "--data", str(csv), "--strict") == EXIT_STRICT


def test_data_commands(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["data", "reconstruct", "--output", str(out)]) == EXIT_OK
    assert out.read_text().startswith("year,month,deaths\n")
    assert run(tmp_path, "data", "summary", "--data", str(out)) == EXIT_OK
    base = read_artifact(tmp_path / "baseline.json")
    assert base["years"] == list(range(2010, 2017)) and len(base["mu"]) == 12
    assert main(["data", "standardize", "--data", str(out), "--years", "2010:2016"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1].startswith("2017,12,")


def test_fit_excess_report_pipeline_is_byte_identical(tmp_path):
    # same directory twice: the manifest records the command line, out-dir included
    outputs = []
    d = tmp_path
    for _ in range(2):
        for old in d.iterdir():
            old.unlink()
        assert run(d, "fit", "--model", "3", "--years", "2010:2016", "--seed", "5") == EXIT_OK
        draws = d / "draws-model3.json"
        assert run(d, "excess", "--window", "2017-09:2017-10", "--draws", str(draws)) == EXIT_OK
        ex = d / "excess-2017-09_2017-10.json"
        assert run(d, "report", "--excess", str(ex)) == EXIT_OK
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outputs[0] == outputs[1]
    report = json.loads(outputs[0]["report.json"])
    assert report["placebo"] == "not run" and report["model_comparison"] == "not run"
    assert report["manifest"]["timestamp"] == "2017-07-14T02:40:00Z"


def test_env_seed_is_used(tmp_path, monkeypatch):
    monkeypatch.setenv("EXCESSMORT_SEED", "77")
    assert run(tmp_path, "fit", "--model", "1", "--years", "2010:2012") == EXIT_OK
    assert read_artifact(tmp_path / "draws-model1.json")["config"]["seed"] == 77
    monkeypatch.delenv("EXCESSMORT_SEED")
    assert run(tmp_path, "fit", "--model", "1", "--years", "2010:2012") == EXIT_OK
    assert read_artifact(tmp_path / "draws-model1.json")["config"]["seed"] == DEFAULT_SEED


def test_placebo_and_plots(tmp_path):
    assert run(tmp_path, "placebo", "--scheme", "within-ui", "--model", "2") == EXIT_OK
    rep = read_artifact(tmp_path / "placebo-within-ui.json")
    assert len(rep["months"]) == 8
    assert run(tmp_path, "placebo", "--scheme", "loyo", "--model", "2", "--window", "09:10") == EXIT_OK
    assert run(tmp_path, "plot", "--figure", "2", "--figure", "4a", "--placebo", str(tmp_path / "placebo-loyo.json")) == EXIT_OK
    svg = (tmp_path / "figure-2.svg").read_text()
    head = svg[: svg.index("<svg")]
    # the data block lists the plotted rows, including the shaded months
    assert "2017,9" in head and "2017,12" in head
    first = (tmp_path / "figure-2.svg").read_bytes()
    assert run(tmp_path, "plot", "--figure", "2", "--figure", "4a", "--placebo", str(tmp_path / "placebo-loyo.json")) == EXIT_OK
    assert (tmp_path / "figure-2.svg").read_bytes() == first


def test_canonical_json_is_sorted_with_newline():
    text = canonical_json({"b": 1, "a": [1, 2]})
    assert text.endswith("\n") and text.index('"a"') < text.index('"b"')


def test_builtin_seed_selection(tmp_path):
    csv = tmp_path / "s2.csv"
    write_csv(reconstructed_series(2), csv)
    assert run(tmp_path, "data", "summary", "--data", "builtin:2") == EXIT_OK
    a = (tmp_path / "baseline.json").read_text()
    assert run(tmp_path, "data", "summary", "--data", str(csv)) == EXIT_OK
    b = read_artifact(tmp_path / "baseline.json")
    assert json.loads(a)["mu"] == b["mu"]
    assert run(tmp_path, "data", "summary", "--data", "builtin:x") == EXIT_USAGE


def test_fit_and_compare_default_to_pre_event_years(tmp_path):
    assert run(tmp_path, "fit", "--model", "1") == EXIT_OK
    assert read_artifact(tmp_path / "draws-model1.json")["fit_years"] == list(range(2010, 2017))
    assert run(tmp_path, "compare", "--models", "1,4") == EXIT_OK
    assert [s["n"] for s in read_artifact(tmp_path / "compare.json")["summaries"]] == [84, 83]
