import json
import subprocess
import sys

import pytest

from almost_fano import __version__
from almost_fano.catalog import CASE_ORDER, _builtin_path
from almost_fano.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_list_cases(capsys):
    code, out, _ = run(capsys, "--list-cases")
    assert code == 0 and out.split() == list(CASE_ORDER)


def test_no_command_is_usage(capsys):
    code, _, err = run(capsys)
    assert code == 2 and "usage" in err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["game", "--d", "7", "--kw3", "1", "--kwb", "1", "--g", "1"])
    assert e.value.code == 2


def test_verify_all_text(capsys):
    code, out, _ = run(capsys, "verify", "--all")
    assert code == 0
    assert "10 cases: 8 pass, 2 flagged, 0 fail" in out


def test_verify_single_json(capsys):
    code, out, _ = run(capsys, "verify", "--case", "B-ii", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["summary"]["flagged"] == 1
    assert doc["reports"][0]["values"]["z"] == "1/2"


def test_verify_corrupted_file_exits_1(tmp_path, capsys):
    data = json.loads(_builtin_path("A-1").read_text())
    data["expected"]["h12"] = 99
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", "--case", str(p))
    assert code == 1
    assert "FAIL A-1 expected.h12" in out


def test_verify_schema_error_exits_2(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text(json.dumps({"id": "x", "construction": "k3_lattice"}))
    code, _, err = run(capsys, "verify", "--case", str(p))
    assert code == 2 and "error" in err


def test_verify_out_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "verify", "--case", "B-iii-4", "--format", "json", "--out", str(out), "--timing")
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["reports"][0]["timing"] >= 0


def _lattice_file(tmp_path, basis, gram, **extra):
    p = tmp_path / "lat.json"
    p.write_text(json.dumps(dict(basis=basis, gram=gram, **extra)))
    return str(p)


def test_enumerate_negative_rank_one(tmp_path, capsys):
    f = _lattice_file(tmp_path, ["g"], [[-2]])
    code, out, _ = run(capsys, "enumerate", "--lattice", f, "--square", "-2", "--format", "json")
    assert code == 0
    assert [c["class"] for c in json.loads(out)["classes"]] == ["-g", "g"]


def test_enumerate_with_degree_window(tmp_path, capsys):
    code, out, _ = run(
        capsys, "enumerate", "--lattice", str(_builtin_path("B-ii")), "--square", "-2",
        "--deg-min", "1", "--deg-max", "9", "--format", "json",
    )
    assert code == 0
    assert {c["class"] for c in json.loads(out)["classes"]} == {"H-F", "H+F-B"}


def test_enumerate_constraint(tmp_path, capsys):
    f = _lattice_file(tmp_path, ["e", "f"], [[0, 1], [1, 0]], polarization="e+f")
    code, out, _ = run(capsys, "enumerate", "--lattice", f, "--square", "0", "--constraint", "e+f=1")
    assert code == 0 and out.strip().endswith("2 classes")


def test_enumerate_unbounded_exit_2(tmp_path, capsys):
    f = _lattice_file(tmp_path, ["e", "f"], [[0, 1], [1, 0]])
    code, _, err = run(capsys, "enumerate", "--lattice", f, "--square", "0")
    assert code == 2 and "unbounded" in err


def test_enumerate_bad_inputs(tmp_path, capsys):
    f = _lattice_file(tmp_path, ["g"], [[-2]])
    assert run(capsys, "enumerate", "--lattice", f, "--square", "-2", "--constraint", "g")[0] == 2
    assert run(capsys, "enumerate", "--lattice", f, "--square", "-2", "--constraint", "q=1")[0] == 2
    assert run(capsys, "enumerate", "--lattice", str(tmp_path / "none.json"), "--square", "0")[0] == 2
    f2 = _lattice_file(tmp_path, ["a", "b"], [[0, 1], [2, 0]])
    assert run(capsys, "enumerate", "--lattice", f2, "--square", "0")[0] == 2


def test_game_json(capsys):
    code, out, _ = run(capsys, "game", "--d", "6", "--kw3", "40", "--kwb", "25", "--g", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"] == {"kx3": 2, "kx_dot_c": 1, "z": "5/2"}
    assert doc["linear_system_agrees"] is True


def test_game_text_and_invalid(capsys):
    code, out, _ = run(capsys, "game", "--d", "5", "--kw3", "54", "--kwb", "28", "--g", "6")
    assert code == 0 and "z = 2/3" in out
    code, _, err = run(capsys, "game", "--d", "5", "--kw3", "40", "--kwb", "28", "--g", "6")
    assert code == 2 and "54" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "almost_fano", "--list-cases"], capture_output=True, text=True)
    assert proc.returncode == 0 and "B-iii-4" in proc.stdout
