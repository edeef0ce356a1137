import subprocess
import sys
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def script(name, *args):
    res = subprocess.run([sys.executable, str(SCRIPTS / name), *args], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res.stdout


def test_fairness_script():
    assert "within 0.5" in script("guard_fairness.py", "--seeds", "3", "--flips", "2000",
                                  "--tolerance", "0.05")


def test_pingpong_script():
    lines = script("pingpong_demo.py", "--seeds", "1", "1").splitlines()
    assert lines[0] == lines[1] and "output=[110]" in lines[0]


def test_opcode_doc_is_current(tmp_path):
    out = tmp_path / "ops.md"
    script("gen_opcode_doc.py", "-o", str(out))
    assert out.read_text() == (SCRIPTS.parent / "docs" / "opcodes.md").read_text()
