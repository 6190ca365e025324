import json

import numpy as np
import pytest

from gtf.cli import main

DATA = __import__("pathlib").Path(__file__).resolve().parents[1] / "data"


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def summary(tmp_path):
    return json.loads((tmp_path / "summary.json").read_text())


def test_kernel_command(tmp_path):
    assert run(tmp_path, "kernel", "--dim", "2", "--order", "1", "--seed", "7") == 0
    s = summary(tmp_path)
    assert s["seed"] == 7 and s["passed"] is True
    csvs = list(tmp_path.glob("*.csv"))
    assert csvs and csvs[0].read_bytes().count(b"\r\n") > 1


def test_embed_delta(tmp_path):
    assert run(tmp_path, "embed", "--manifold", str(DATA / "flat1d.mf"), "--dist", str(DATA / "delta.df")) == 0
    assert summary(tmp_path)["experiments"]["weak_convergence"]["slope"] > 0.8


def test_transport_holonomy(tmp_path):
    th = float(np.arccos(1 / np.sqrt(3)))
    tri = "; ".join(f"{th!r},{phi!r}" for phi in (0.0, 2 * np.pi / 3, 4 * np.pi / 3, 2 * np.pi))
    assert run(tmp_path, "transport", "--manifold", str(DATA / "sphere.mf"), "--triangle", tri,
               "--expect-angle", "pi/2") == 0


def test_geodesic(tmp_path):
    assert run(tmp_path, "geodesic", "--manifold", str(DATA / "halfplane.mf")) == 0


def test_failed_threshold_exits_one(tmp_path, capsys):
    th = float(np.arccos(1 / np.sqrt(3)))
    tri = "; ".join(f"{th!r},{phi!r}" for phi in (0.0, 2 * np.pi / 3, 4 * np.pi / 3, 2 * np.pi))
    code = run(tmp_path, "transport", "--manifold", str(DATA / "sphere.mf"), "--triangle", tri,
               "--expect-angle", "1.0")
    assert code == 1
    assert "FAIL" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["kernel", "--manifold", "missing.mf"],
    ["embed", "--dim", "1"],
    ["kernel", "--eps-start", "0.01", "--eps-stop", "0.1"],
])
def test_config_errors_exit_two(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_bad_flag_value_exits_two(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "kernel", "--format", "xml")
    assert info.value.code == 2


def test_config_file_is_overridden_by_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dim = 1\norder = 0\nseed = 3\n")
    out = tmp_path / "o"
    assert main(["kernel", "--config", str(cfg), "--order", "1", "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["seed"] == 3
