import json
import subprocess
import sys

import pytest

from zkt import fixtures as F
from zkt.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """SRS, a compiled 16-row relu model, its inputs and one proof."""
    d = tmp_path_factory.mktemp("cli")
    srs = str(d / "t.srs")
    assert main(["setup", "--seed", "cli", "--degree", "1024", "-o", srs]) == 0
    model = write(d / "relu.json", F.single_op_json("Relu", 1, [16, 8]))
    compiled = str(d / "relu.zkc")
    assert main(["compile", model, "-o", compiled, "--scale-bits", "4"]) == 0
    inputs = write(d / "in.json", {"x0": [[(i * 8 + j) / 64 - 1 for j in range(8)] for i in range(16)]})
    proof = str(d / "relu.proof")
    assert main(["prove", compiled, inputs, "--srs", srs, "-o", proof, "--seed", "p"]) == 0
    return {"dir": d, "srs": srs, "model": model, "compiled": compiled, "inputs": inputs, "proof": proof}


def test_verify_accepts(work, capsys):
    assert main(["verify", work["compiled"], work["proof"], work["proof"] + ".io.json", "--srs", work["srs"]]) == 0
    assert capsys.readouterr().out.startswith("accept")


def test_verify_without_io_file(work):
    assert main(["verify", work["compiled"], work["proof"], "--srs", work["srs"]]) == 0


def test_srs_from_environment(work, monkeypatch):
    monkeypatch.setenv("ZKT_SRS", work["srs"])
    assert main(["verify", work["compiled"], work["proof"]]) == 0


def test_missing_srs_is_usage_error(work, monkeypatch, capsys):
    monkeypatch.delenv("ZKT_SRS", raising=False)
    assert main(["verify", work["compiled"], work["proof"]]) == 2
    assert "usage" in capsys.readouterr().err


def test_flipped_byte_rejected(work, capsys):
    data = bytearray(open(work["proof"], "rb").read())
    data[len(data) // 2] ^= 0x10
    bad = work["dir"] / "flipped.proof"
    bad.write_bytes(bytes(data))
    assert main(["verify", work["compiled"], str(bad), "--srs", work["srs"]]) == 4
    assert capsys.readouterr().out.startswith("reject: component")


def test_other_model_is_mismatch(work):
    other = write(work["dir"] / "relu2.json", F.single_op_json("Relu", 1, [16, 8], lo=-2.0, hi=2.0))
    compiled = str(work["dir"] / "relu2.zkc")
    assert main(["compile", other, "-o", compiled, "--scale-bits", "4"]) == 0
    assert main(["verify", compiled, work["proof"], "--srs", work["srs"]]) == 5


def test_other_srs_is_mismatch(work):
    srs2 = str(work["dir"] / "other.srs")
    assert main(["setup", "--seed", "other", "--degree", "1024", "-o", srs2]) == 0
    assert main(["verify", work["compiled"], work["proof"], "--srs", srs2]) == 5


def test_inspect(work, capsys):
    assert main(["inspect", work["proof"]]) == 0
    assert "CQ2: depth 4, leaves 16" in capsys.readouterr().out


def test_compile_gelu_reports_rewrite(tmp_path, capsys):
    model = write(tmp_path / "gelu.json", F.gelu_json())
    assert main(["compile", model, "-o", str(tmp_path / "g.zkc")]) == 0
    out = capsys.readouterr().out
    assert "nodes: 8 → 1" in out and "CQ2 1" in out


def test_compile_no_rewrite(tmp_path, capsys):
    model = write(tmp_path / "gelu.json", F.gelu_json())
    assert main(["compile", model, "-o", str(tmp_path / "g.zkc"), "--no-rewrite"]) == 0
    assert "(unchanged)" in capsys.readouterr().out


def test_compile_lstm_unsupported(tmp_path, capsys):
    model = write(tmp_path / "lstm.json", F.lstm_json())
    assert main(["compile", model, "-o", str(tmp_path / "l.zkc")]) == 3
    assert "lstm0" in capsys.readouterr().err


def test_setup_degree_zero(tmp_path):
    assert main(["setup", "--degree", "0", "-o", str(tmp_path / "s.srs")]) == 2


def test_setup_same_seed_identical(tmp_path):
    a, b = tmp_path / "a.srs", tmp_path / "b.srs"
    assert main(["setup", "--seed", "same", "--degree", "16", "-o", str(a)]) == 0
    assert main(["setup", "--seed", "same", "--degree", "16", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["compile"], ["compile", "m.json", "-o", "x", "--scale-bits",
                                                                      "40"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_missing_file_is_io_error(tmp_path):
    assert main(["compile", str(tmp_path / "nope.json"), "-o", str(tmp_path / "x")]) == 1


def test_bad_inputs_is_io_error(work, tmp_path):
    inputs = write(tmp_path / "bad.json", {"other": [1, 2]})
    assert main(["prove", work["compiled"], inputs, "--srs", work["srs"], "-o", str(tmp_path / "p")]) == 1


def test_same_seed_same_proof(work, tmp_path):
    out = str(tmp_path / "again.proof")
    assert main(["prove", work["compiled"], work["inputs"], "--srs", work["srs"], "-o", out, "--seed", "p"]) == 0
    assert open(out, "rb").read() == open(work["proof"], "rb").read()


def test_module_entry_point(work):
    r = subprocess.run([sys.executable, "-m", "zkt.cli", "inspect", work["proof"]], capture_output=True, text=True)
    assert r.returncode == 0 and "leaves 16" in r.stdout
