import csv
import json
import math

import pytest

from doubledescent import cli


def _write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


SMALL = {"sweep": {"m": 96, "alpha_f": [0.5, 2.0]}, "teacher": {"f": "tanh", "snr": 10},
         "student": {"arch": "linear", "lambda": 1e-6}, "replicates": 20, "seed": 7}


def test_theory_command_writes_table_and_metadata(tmp_path):
    cfg = _write(tmp_path, {"sweep": {"m": 100, "alpha_f": [0.5, 1.0, 2.0]}, "options": {"ridgeless": True}})
    out = tmp_path / "out"
    assert cli.main(["theory", "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "results.csv")
    assert [float(r["alpha_f"]) for r in rows] == [0.5, 1.0, 2.0]
    assert rows[1]["variance"] == "inf" and rows[1]["divergent"] == "1"
    s = 0.1
    assert float(rows[0]["test"]) == pytest.approx(2 * s, rel=1e-14)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["status"] == "ok" and meta["divergent_points"] == [[1.0, 1.0]]
    assert (out / "run.log").exists()


def test_simulate_is_byte_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(b), "--threads", "4"]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_seed_override_changes_results(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["simulate", "--config", cfg, "--out", str(a)])
    cli.main(["simulate", "--config", cfg, "--out", str(b), "--seed", "8"])
    assert (a / "results.csv").read_bytes() != (b / "results.csv").read_bytes()
    assert json.loads((b / "metadata.json").read_text())["seed"] == 8


def test_compare_row_has_theory_mc_and_zscores(tmp_path):
    doc = dict(SMALL, sweep={"m": 96, "alpha_f": 0.5})
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    (row,) = _rows(out / "results.csv")
    for q in ("train", "test", "bias2", "variance"):
        th, est, se, z = (float(row[f"{q}_{k}"]) for k in ("theory", "mc", "stderr", "z"))
        assert z == pytest.approx((est - th) / se, rel=1e-12)
    assert int(row["n_f"]) == 48 and int(row["replicates"]) == 20


def test_spectrum_command(tmp_path):
    doc = {"sweep": {"m": 128, "alpha_f": 0.25, "alpha_p": 2.0}, "student": {"arch": "rnlfm"},
           "options": {"points": 50, "n_matrices": 2, "bins": 20}}
    out = tmp_path / "out"
    assert cli.main(["spectrum", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    info = json.loads((out / "spectrum.json").read_text())[0]
    assert info["f_zero"] == pytest.approx(0.5)
    assert info["zero_fraction"] == pytest.approx(0.5)
    assert len(_rows(out / "histogram.csv")) == 20
    assert len(_rows(out / "results.csv")) == 50 * len(info["support"])


def test_mincomp_command(tmp_path):
    doc = {"sweep": {"m": 100, "alpha_f": [0.125, 8]}, "options": {"sims": 5}}
    out = tmp_path / "out"
    assert cli.main(["mincomp", "--config", _write(tmp_path, doc), "--out", str(out)]) == 0
    rows = _rows(out / "results.csv")
    assert len(rows) == 2
    assert all(math.isfinite(float(r["ratio_mean"])) for r in rows)
    assert (out / "scatter.csv").exists()


def test_empty_axis_is_a_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"sweep": {"m": 100, "alpha_f": []}})
    assert cli.main(["theory", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "grid: empty axis" in err and err.count("\n") == 1


def test_missing_config_is_an_io_error(tmp_path):
    code = cli.main(["theory", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_IO


def test_numerical_failure_exit_code(tmp_path):
    # a linear activation leaves the random-features kernel rank limited, which theory rejects
    doc = {"sweep": {"m": 100, "alpha_f": 0.25, "alpha_p": 0.5},
           "student": {"arch": "rnlfm", "phi": "linear"}, "options": {"ridgeless": True}}
    out = tmp_path / "o"
    assert cli.main(["theory", "--config", _write(tmp_path, doc), "--out", str(out)]) == cli.EXIT_NUMERIC
    assert json.loads((out / "metadata.json").read_text())["status"].startswith("numeric")


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(cli.ConfigError):
        cli.resolve_threads(None)


def test_fmt():
    assert cli.fmt(math.inf) == "inf"
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(True) == "1" and cli.fmt(3) == "3"
