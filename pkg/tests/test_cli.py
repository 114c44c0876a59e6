import csv
import json
import math

import pytest

from orbitcount.cli import CONSTANT_KEYS, RunConfig, UsageError, geometric_schedule, main
from orbitcount.norms import NormSpec
from orbitcount.orbits import count_forms_box


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.reader(text.splitlines()))


def test_count_box_schedule(capsys):
    code, out, _ = run(capsys, "--command", "count-box", "--disc", "1", "--schedule", "100,1000,10000")
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["T", "N", "predicted"]
    assert len(rows) == 4
    expected = count_forms_box(1, [100, 1000, 10000], NormSpec.sup())
    assert [int(r[1]) for r in rows[1:]] == list(expected)


def test_predict_hyperboloid_integral(capsys):
    code, out, _ = run(capsys, "--command", "predict", "--m", "1", "--d", "1", "--norm", "euclidean")
    assert code == 0
    body = json.loads(out)
    assert body["schema_version"] == 1
    assert set(CONSTANT_KEYS) <= set(body)
    assert abs(body["boundary_integral"] - math.sqrt(2)) < 1e-10


def test_equidist_has_residual_column(capsys):
    code, out, _ = run(capsys, "--command", "equidist", "--schedule", "5,10,15,20", "--samples", "100000")
    assert code == 0
    rows = rows_of(out)
    assert "residual" in rows[0]
    assert [float(r[0]) for r in rows[1:]] == [5.0, 10.0, 15.0, 20.0]


def test_fit_consumes_count_csv(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    assert main(["--command", "count-box", "--disc", "1", "--tmin", "1000", "--tmax", "100000", "--tsteps", "9", "--out", str(counts)]) == 0
    code, out, _ = run(capsys, "--command", "fit", "--disc", "1", "--input", str(counts))
    assert code == 0
    body = json.loads(out)
    assert body["relative_error"] < 0.05
    assert body["fit_c"] == pytest.approx(body["predicted_c"], rel=0.05)


def test_count_orbit_and_fit_for_quartics(tmp_path, capsys):
    counts = tmp_path / "orbit.csv"
    dump = tmp_path / "points.csv"
    args = ["--command", "count-orbit", "--m", "2", "--tmin", "1e3", "--tmax", "1e6", "--tsteps", "7"]
    assert main([*args, "--out", str(counts), "--dump", str(dump)]) == 0
    assert dump.read_text().startswith("c0,c1,c2,c3,c4,norm")
    code, out, _ = run(capsys, "--command", "fit", "--m", "2", "--input", str(counts))
    assert code == 0
    assert json.loads(out)["relative_error"] < 0.2


def test_outputs_are_byte_identical(tmp_path):
    for command in (["--command", "count-box", "--disc", "4", "--schedule", "10,50"],
                    ["--command", "equidist", "--schedule", "6", "--samples", "50000", "--seed", "3"],
                    ["--command", "predict", "--m", "2"]):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*command, "--out", str(a)]) == 0
        assert main([*command, "--out", str(b), "--workers", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()


def test_manifest_written_next_to_output(tmp_path):
    out = tmp_path / "vol.json"
    assert main(["--command", "volumes", "--norm", "euclidean", "--schedule", "10,100", "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "vol.json.manifest.json").read_text())
    assert meta["config"]["command"] == "volumes"
    assert {"orbitcount", "numpy", "scipy", "numba", "python"} <= set(meta["versions"])
    assert meta["wall_time_s"] >= 0
    body = json.loads(out.read_text())
    assert body["vol_ball"][1]["vol_ball"] == pytest.approx(math.sqrt(2) * math.sqrt(100**2 - 1))


def test_probe_decay(capsys):
    code, out, _ = run(capsys, "--command", "probe-decay", "--schedule", "0,2", "--samples", "100000")
    assert code == 0
    assert rows_of(out)[0] == ["T", "correlation", "std_error"]


@pytest.mark.parametrize(
    "args",
    [
        ["--command", "count-box"],
        ["--command", "count-box", "--disc", "1", "--tmin", "10"],
        ["--command", "fit"],
        ["--command", "predict", "--disc", "5"],
        ["--command", "count-orbit", "--disc", "3", "--schedule", "10"],
        ["--command", "count-box", "--disc", "1", "--schedule", "10", "--slack", "0.5"],
    ],
)
def test_invalid_configs_exit_with_usage_error(args, capsys):
    assert main(args) == 2
    assert "error" in capsys.readouterr().err


def test_module_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("T,N\n10,1\n")
    assert main(["--command", "fit", "--input", str(bad)]) == 1
    assert "fit failed" in capsys.readouterr().err


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit):
        main(["--command", "explode"])


def test_schedule_and_config_helpers():
    assert geometric_schedule(10, 1000, 3) == pytest.approx((10.0, 100.0, 1000.0))
    with pytest.raises(UsageError):
        geometric_schedule(0, 10, 3)
    cfg = RunConfig(command="predict", schedule=(1.0, 2.0))
    assert json.loads(json.dumps(cfg.to_dict()))["schedule"] == [1.0, 2.0]
    with pytest.raises(UsageError):
        RunConfig(command="predict", norm="taxicab")
