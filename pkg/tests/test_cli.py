import json

import pytest

from heegner_moments.artifacts import read_csv
from heegner_moments.cli import (EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO, EXIT_OK, EXIT_USAGE,
                                 build_parser, main, resolve_config)

FILES = ("run.json", "summary.csv", "per_d.csv", "plotdata_residual.csv")


def run(tmp_path, name, *argv):
    out = tmp_path / name
    return main([*argv, "--out", str(out)]), out


def snapshot(out):
    return {f: (out / f).read_bytes() for f in FILES if (out / f).exists()}


def test_lprime_ok(tmp_path, capsys):
    code, out = run(tmp_path, "lp", "lprime", "--d", "-7")
    assert code == EXIT_OK
    doc = json.loads((out / "run.json").read_text())
    assert doc["constants"]["l_prime"]["value"] == pytest.approx(0.3111001759, abs=1e-9)
    assert "PASS" in capsys.readouterr().out


def test_lprime_minus_three(tmp_path):
    code, out = run(tmp_path, "lp3", "lprime", "--curve", "19a1", "--d", "-3")
    assert code == EXIT_OK
    assert json.loads((out / "run.json").read_text())["constants"]["l_prime"]["value"] == pytest.approx(0.488089, abs=1e-6)


def test_density_records_failed_invariant(tmp_path, capsys):
    code, out = run(tmp_path, "den", "density", "--ymax", "20000")
    # the counted density is c_N / 2, a quarter of the 2 c_N target
    assert code == EXIT_INVARIANT
    doc = json.loads((out / "run.json").read_text())
    assert "density_ratio_2cN" in doc["failures"]
    assert "failed invariants" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["moment", "--ylist", "400,800"],
    ["error", "--ymax", "400", "--twist-x", "20000", "--twist-count", "8"],
    ["heights", "--ymax", "400"],
    ["constants"],
])
def test_byte_identical_reruns(tmp_path, argv):
    c1, o1 = run(tmp_path, "a", *argv, "--threads", "1")
    c2, o2 = run(tmp_path, "b", *argv, "--threads", "3")
    assert c1 == c2 and c1 in (EXIT_OK, EXIT_INVARIANT)
    assert snapshot(o1) == snapshot(o2)
    assert (o1 / "metadata.json").exists()


def test_csv_header_and_columns(tmp_path):
    code, out = run(tmp_path, "m", "moment", "--ylist", "400,800")
    first = (out / "summary.csv").read_text().splitlines()[0]
    assert first.startswith("# heegner-moments moment/summary csv-v1 columns=")
    columns, rows = read_csv(out / "summary.csv")
    assert len(rows) == 2 and "Y" in columns


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"curve": "14a1", "ylist": [300, 600], "t1": 2.5}))
    args = build_parser().parse_args(["moment", "--config", str(cfg), "--curve", "11a1", "--ymax", "700"])
    rc = resolve_config(args)
    assert rc.curve == "11a1" and rc.ylist == [700] and rc.t1 == 2.5


def test_config_conflicts(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ymax": 10, "ylist": [5, 10]}))
    assert main(["moment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["moment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["moment", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["lprime", "--curve", "11a1", "--conductor", "14"],
    ["lprime", "--d", "-8"],
    ["moment", "--ylist", "800,400"],
    ["moment", "--t0", "2", "--t1", "1"],
    ["lprime", "--curve", "no-such-curve"],
    ["lprime", "--contour-c", "0.1"],
    ["moment", "--threads", "0"],
])
def test_config_errors(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == EXIT_USAGE


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["lprime", "--out", str(blocker / "sub")]) == EXIT_IO
