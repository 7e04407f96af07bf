from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from dipscat.cli import (
    EXIT_BRACKET,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    config_hash,
    parse_values,
    run,
    UsageError,
)


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_units_to_stdout():
    code, text = call("units", "--species", "Sr88")
    assert code == EXIT_OK
    (row,) = rows_of(text)
    assert row["key"] == "Sr88_2"
    assert float(row["sigma"]) == pytest.approx(151.053, rel=2e-3)


def test_units_table_filter():
    code, text = call("units", "--table", "II")
    assert code == EXIT_OK
    assert len(rows_of(text)) == 12


def test_print_config_layers(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"subcommand": "volume-scan", "intensity": 3.0, "x00": 0.147}))
    code, text = call("volume-scan", "--config", str(cfg), "--x00", "0.146", "--print-config")
    assert code == EXIT_OK
    eff = json.loads(text)
    assert eff["intensity"] == 3.0  # from the file
    assert eff["x00"] == 0.146  # flag wins over the file
    assert eff["ppw"] == 240.0  # built-in default


def test_config_errors(tmp_path):
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"subcommand": "busch"}))
    assert call("volume-scan", "--config", str(wrong))[0] == EXIT_USAGE
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"colour": "red"}))
    assert call("busch", "--config", str(unknown))[0] == EXIT_USAGE
    assert call("busch", "--config", str(tmp_path / "missing.json"))[0] == EXIT_USAGE


def test_usage_errors():
    assert call()[0] == EXIT_USAGE
    assert call("volume-scan", "--no-such-flag")[0] == EXIT_USAGE
    assert call("volume-scan", "--range", "0.14:0.15:0")[0] == EXIT_USAGE
    assert call("units", "--species", "Unobtainium")[0] == EXIT_USAGE
    assert call("volume-scan", "--m", "1", "--alpha", "0.3")[0] == EXIT_USAGE


def test_parse_values():
    assert list(parse_values("1:2:3")) == [1.0, 1.5, 2.0]
    assert list(parse_values("0.5,0.25")) == [0.5, 0.25]
    with pytest.raises(UsageError):
        parse_values("")


def test_bracket_failure_exit_code():
    code, _ = call("pole", "--m", "1", "--channels", "1", "--axis", "x00",
                   "--intensity", "6", "--bracket", "0.143:0.144")
    assert code == EXIT_BRACKET


def test_numerical_failure_exit_code():
    code, _ = call("orient-multi", "--probe", "300")
    assert code == EXIT_NUMERICAL


def test_busch_rows():
    code, text = call("busch", "--window", "0:7")
    assert code == EXIT_OK
    es = [float(r["e_omega"]) for r in rows_of(text)]
    assert es == pytest.approx([2.5, 4.5, 6.5], abs=1e-9)


def _scan(tmp_path, name, jobs):
    out = tmp_path / name
    code, _ = call("volume-scan", "--m", "1", "--channels", "1,3", "--range",
                   "0.146:0.150:4", "--jobs", str(jobs), "--output", str(out))
    assert code == EXIT_OK
    return out.read_bytes(), json.loads((tmp_path / f"{name}.json").read_text())


def test_jobs_do_not_change_output(tmp_path):
    csv1, side1 = _scan(tmp_path, "serial.csv", 1)
    csv2, side2 = _scan(tmp_path, "parallel.csv", 2)
    assert csv1 == csv2
    assert side1["config_hash"] == side2["config_hash"]
    assert side1["rows"] == side2["rows"]


def test_sidecar_contents(tmp_path):
    _, side = _scan(tmp_path, "scan.csv", 1)
    assert side["subcommand"] == "volume-scan"
    assert side["columns"][0] == "x00"
    assert len(side["rows"]) == 4
    assert side["config_hash"] == config_hash(side["config"])


def test_config_hash_ignores_runtime_keys():
    base = {"a": 1.0, "output": None, "jobs": 1}
    assert config_hash(base) == config_hash({**base, "output": "x.csv", "jobs": 4})
    assert config_hash(base) != config_hash({**base, "a": 2.0})


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dipscat.cli", "units", "--species", "Cr52"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "Cr52_2" in out.stdout
