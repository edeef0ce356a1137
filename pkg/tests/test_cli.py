import json
import subprocess
import sys

import pytest

from gustl.bytecode import decode_image
from gustl.cli import main
from gustl.codegen import compile_source
from helpers import CORPUS

RUN = CORPUS / "run"


def gustl(*args, stdin=b""):
    return subprocess.run([sys.executable, "-m", "gustl", *map(str, args)], input=stdin,
                          capture_output=True)


@pytest.fixture(scope="module")
def store_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("store")
    for src in RUN.glob("*.gs"):
        assert main(["compile", str(src), "-o", str(d / f"{src.stem}.gsx")]) == 0
    return d


def test_compile_stdin_to_stdout():
    src = b"process p(c) start c ! 1 stop"
    res = gustl("compile", stdin=src)
    assert res.returncode == 0
    assert decode_image(res.stdout) == compile_source(src)


def test_concatenation_equals_joined_source(tmp_path):
    prelude = tmp_path / "prelude.gs"
    body = tmp_path / "main.gs"
    prelude.write_text("const k = 4\nfunction sq(x) do return x * x\n")
    body.write_text("process p(c)\nstart c ! sq(k) stop\n")
    out = tmp_path / "main.gsx"
    assert main(["compile", str(prelude), str(body), "-o", str(out)]) == 0
    joined = prelude.read_bytes() + body.read_bytes()
    assert decode_image(out.read_bytes()) == compile_source(joined)


def test_diagnostics_point_into_the_right_file(tmp_path, capsys):
    a = tmp_path / "a.gs"
    b = tmp_path / "b.gs"
    a.write_text("const k = 1\n\n")
    b.write_text("process p(c)\nstart c ! ghost stop\n")
    assert main(["check", str(a), str(b)]) == 1
    err = capsys.readouterr().err
    assert f"{b}:2:" in err and "E-UNDECLARED" in err


def test_json_lines(tmp_path, capsys):
    src = tmp_path / "bad.gs"
    src.write_text("process p(c) start c ! x c ! y stop")
    assert main(["check", "--diag", "json-lines", str(src)]) == 1
    records = [json.loads(line) for line in capsys.readouterr().err.splitlines()]
    assert [r["code"] for r in records] == ["E-UNDECLARED"] * 2
    assert {"code", "message", "line", "column"} <= set(records[0])


def test_empty_input_is_a_parse_error():
    res = gustl("compile")
    assert res.returncode == 1 and b"E-SYNTAX" in res.stderr


def test_missing_file_is_io_error(tmp_path):
    assert main(["compile", str(tmp_path / "absent.gs")]) == 2


def test_dump_ast_still_compiles(tmp_path, capsys):
    out = tmp_path / "x.gsx"
    assert main(["compile", "--dump-ast", str(RUN / "timer.gs"), "-o", str(out)]) == 0
    assert "Program" in capsys.readouterr().err
    assert out.stat().st_size > 24


def test_check_clean():
    assert main(["check", str(RUN / "ping.gs")]) == 0


@pytest.mark.parametrize("root,code,text", [
    ("ping", 0, "output: 110"),
    ("waitboth", 3, "outcome: deadlock"),
    ("divzero", 4, "division by zero"),
    ("nosuch", 2, ""),
])
def test_run_exit_codes(store_dir, capsys, root, code, text):
    assert main(["run", root, "--store", str(store_dir), "--seed", "42"]) == code
    assert text in capsys.readouterr().out


def test_run_step_limit(store_dir):
    assert main(["run", "coin", "--store", str(store_dir), "--max-steps", "100"]) == 5


def test_run_gsx_path_and_trace(store_dir, capsys):
    assert main(["run", str(store_dir / "timer.gsx"), "--trace"]) == 0
    out = capsys.readouterr().out
    assert " guard state=0 arm=0 after" in out and "output: 1 13" in out


def test_run_config_file_with_flag_override(store_dir, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("max_steps = 10\nseed = 1\n")
    assert main(["run", "ping", "--store", str(store_dir), "--config", str(cfg)]) == 5
    assert main(["run", "ping", "--store", str(store_dir), "--config", str(cfg),
                 "--max-steps", "100000"]) == 0


def test_run_inputs(tmp_path, capsys):
    src = tmp_path / "echo.gs"
    src.write_text("process echo(c) state s, f word v start next s "
                   "on s \\ c ? v: c ! v + 1 next s on s \\ c ? end: next f stop")
    assert main(["compile", str(src), "-o", str(tmp_path / "echo.gsx")]) == 0
    assert main(["run", "echo", "--store", str(tmp_path), "--input", "4", "--input", "0x10"]) == 3
    assert "output: 5 17" in capsys.readouterr().out


def test_disasm(store_dir, capsys):
    assert main(["disasm", str(store_dir / "timer.gsx")]) == 0
    out = capsys.readouterr().out
    assert "; magic  0x85cf80cf" in out and "0000: ports 1" in out


def test_disasm_rejects_bad_files(tmp_path, store_dir):
    blob = (store_dir / "timer.gsx").read_bytes()
    (tmp_path / "short.gsx").write_bytes(blob[:-2])
    (tmp_path / "magic.gsx").write_bytes(b"\0" * 4 + blob[4:])
    assert main(["disasm", str(tmp_path / "short.gsx")]) == 1
    assert main(["disasm", str(tmp_path / "magic.gsx")]) == 1
    assert main(["disasm", str(tmp_path / "absent.gsx")]) == 2


def test_opcodes(capsys):
    assert main(["opcodes", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0] == {"name": "push", "number": 1, "immediates": 1,
                       "stack": "-- k", "description": "push immediate k"}
    assert main(["opcodes"]) == 0
    assert "| number | mnemonic |" in capsys.readouterr().out


def test_help_lists_subcommands():
    res = gustl("--help")
    for cmd in (b"compile", b"check", b"run", b"disasm"):
        assert cmd in res.stdout
