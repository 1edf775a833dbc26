import io
import subprocess
import sys

import pytest

from hardyworlds import cli

SCRIPT_FILE = """\
# line 1 and 2 of the builtin script
(L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+)) ; LOC1c
(L2 & R1 & L2+) => (L2 & R1 & R1-) ; QM(3.2)
"""


def run(argv):
    buf = io.StringIO()
    code = cli.run(argv, buf)
    return code, buf.getvalue()


def verdicts(text):
    rows = {}
    for line in text.splitlines():
        if line.startswith("VERDICT "):
            _, check, status, *_ = line.split(" ", 3) + [""]
            rows[check] = status
    return rows


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_worlds_preset():
    code, out = run(["worlds"])
    assert code == 0
    assert "16 / 13 (logical / physical)" in out
    assert "(L2,-,R2,+)  p=0.000000  excluded" in out


def test_uniform_model_fails(tmp_path):
    cfg = write(tmp_path, "[model]\nmode = uniform\n")
    code, out = run(["worlds", "--config", cfg])
    assert "16 / 16 (logical / physical)" in out
    code, out = run(["proof", "--config", cfg, "--machine"])
    v = verdicts(out)
    assert code == 1
    assert v["proof.line2"] == v["proof.line3"] == v["proof.line8"] == "FAIL"
    assert v["proof.status"] == "FAIL"


def test_quantum_preset():
    code, out = run(["quantum", "--machine"])
    v = verdicts(out)
    assert code == 0
    assert all(v[f"quantum.{k}"] == "PASS" for k in ("3.1", "3.2", "3.3", "3.4"))
    assert "FAIL" not in v.values()


def test_product_state_fails_3_4(tmp_path):
    cfg = write(tmp_path, "[model]\nmode = explicit\namplitudes = 1, 0, 0, 0\n"
                          "angle.L1 = 0\nangle.L2 = 0\nangle.R1 = 0\nangle.R2 = 0\n")
    code, out = run(["quantum", "--config", cfg, "--machine"])
    assert code == 1
    assert verdicts(out)["quantum.3.4"] == "FAIL"


def test_proof_builtin():
    code, out = run(["proof", "--machine"])
    v = verdicts(out)
    assert code == 0
    assert v["proof.line6"] == "FLAG" and v["proof.line12"] == "FLAG"
    assert "plain-semantics=FAIL" in out
    assert v["search.C-11+C-14"] == "UNSAT"
    assert "VERDICT proof.status PASS THEOREM-REPLAYED" in out


@pytest.mark.parametrize("text,needle", [
    ("[model]\nmode = preset-optimal\nbogus\n", ":3:1"),
    ("[model]\nmode = nonsense\n", ":2:8"),
    ("[model]\nmode = preset-optimal\ncolour = red\n", ":3:10"),
    ("[tolerances]\nnull_tolerance = 0x10\n", ":2:18"),
    ("[extra]\na = 1\n", ":1:1"),
])
def test_bad_config_exit_2(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    code, _ = run(["worlds", "--config", cfg])
    assert code == 2
    err = capsys.readouterr().err
    assert "config error" in err and needle in err


def test_missing_config_exit_2(tmp_path):
    assert run(["worlds", "--config", str(tmp_path / "nope.ini")])[0] == 2


def test_capacity_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, "[limits]\nmax_candidates = 10\n")
    assert run(["proof", "--config", cfg])[0] == 3
    assert "capacity exceeded" in capsys.readouterr().err
    cfg = write(tmp_path, "[limits]\nmax_worlds = 8\n", "w.ini")
    assert run(["worlds", "--config", cfg])[0] == 3


def test_all_is_deterministic():
    first = run(["all", "--seed", "0"])
    second = run(["all", "--seed", "0"])
    assert first == second
    assert first[0] == 0


def test_histories_leaf_table():
    code, out = run(["histories"])
    assert code == 0
    assert "L1-/R1/R1+" in out
    v = verdicts(out)
    assert v["histories.5.4"] == "PASS"
    assert v["histories.functional"] == "FLAG"


def test_script_file(tmp_path):
    path = write(tmp_path, SCRIPT_FILE, "script.txt")
    code, out = run(["proof", "--script", path, "--machine"])
    v = verdicts(out)
    assert v["proof.line1"] == "PASS" and v["proof.line2"] == "PASS"
    assert "proof.line3" not in v
    bad = write(tmp_path, SCRIPT_FILE.replace("QM(3.2)", "QM(3.3)"), "bad.txt")
    code, out = run(["proof", "--script", bad, "--machine"])
    assert code == 1 and verdicts(out)["proof.line2"] == "FAIL"


def test_script_section(tmp_path):
    cfg = write(tmp_path, "[script]\n1 = (L2 & R2 & L2+) => (R1 []-> (L2 & R1 & L2+)) ; LOC1c\n")
    code, out = run(["proof", "--config", cfg, "--machine"])
    assert verdicts(out)["proof.line1"] == "PASS"
    broken = write(tmp_path, "[script]\n1 = (L2 & => R1 ; LOC1c\n", "broken.ini")
    assert run(["proof", "--config", broken])[0] == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hardyworlds.cli", "worlds", "--machine"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "VERDICT worlds.physical PASS 13" in proc.stdout
