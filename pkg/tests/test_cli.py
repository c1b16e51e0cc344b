import subprocess
import sys
from dataclasses import replace
from math import log2

import pytest

from regprog.cli import main
from regprog.rpir import parse, serialize


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_space_report_example(capsys):
    code, out, _ = run(["space-report", "--t", "16", "--s", "8", "--n", "4", "--field", "7"],
                       capsys)
    assert code == 0
    assert "8.81 units" in out and "22.46 units" in out


def test_space_report_needs_arguments(capsys):
    assert run(["space-report", "--t", "3"], capsys)[0] == 2


def test_build_then_verify_via_pipe():
    build = subprocess.run([sys.executable, "-m", "regprog.cli", "build-univariate", "--p", "7",
                            "--poly", "x1^2+1"], capture_output=True, text=True, check=True)
    assert "calls_per_input" in build.stderr
    verify = subprocess.run([sys.executable, "-m", "regprog.cli", "verify"],
                            input=build.stdout, capture_output=True, text=True)
    assert verify.returncode == 0
    assert verify.stdout.startswith("PASS")


def test_verify_misdeclared_output(tmp_path, capsys):
    path = tmp_path / "p.rp"
    assert run(["build-univariate", "--p", "7", "--poly", "x1^2+1", "-o", str(path)],
               capsys)[0] == 0
    P = parse(path.read_text())
    # point the output at a different register of the same bank
    bank, reg = P.outputs[0]
    wrong = (bank, (reg + 1) % P.banks[bank].size)
    path.write_text(serialize(replace(P, outputs=(wrong,))))
    code, out, _ = run(["verify", "--program", str(path)], capsys)
    assert code == 1
    assert "FAIL" in out and "init" in out and "x " in out


def test_usage_errors(capsys):
    assert run(["no-such-command"], capsys)[0] == 2
    assert run(["build-univariate", "--p", "7"], capsys)[0] == 2
    assert run(["build-univariate", "--p", "8", "--poly", "x1"], capsys)[0] == 2
    assert run(["eval", "--program", "/nonexistent", "--input", "1"], capsys)[0] == 2


@pytest.mark.parametrize("argv", [
    ["build-univariate-set", "--p", "11", "--poly", "x1^2", "--poly", "x1^3"],
    ["build-waring", "--p", "7", "--poly", "x1*x2 + x3*x4"],
    ["build-general", "--p", "5", "--poly", "x1^6 + x2", "--lift"],
    ["build-symmetric", "--p", "5", "--truth", "0,0,1,1"],
    ["build-bool-rep", "--poly", "x1 + x2*x3"],
    ["build-interp", "--p", "7", "--poly", "x1*x2"],
    ["build-matpow", "--n", "2", "--p", "5", "--d", "3"],
    ["build-matpow", "--n", "2", "--p", "3", "--d", "4"],
    ["build-matpow", "--n", "2", "--p", "5", "--d", "5", "--delta", "2"],
])
def test_every_builder_verifies(argv, tmp_path, capsys):
    path = tmp_path / "prog.rp"
    code, _, err = run(argv + ["-o", str(path)], capsys)
    assert code == 0, err
    assert "FAIL" not in err
    code, out, _ = run(["verify", "--program", str(path), "--trials", "100"], capsys)
    assert code == 0, out


def test_build_circuit_and_eval(tmp_path, capsys):
    net = tmp_path / "c.net"
    net.write_text("g1 = AND x1 x2\ng2 = OR g1 x3\nout g2\n")
    prog = tmp_path / "c.rp"
    assert run(["build-circuit", "--netlist", str(net), "--block-depth", "2", "-o", str(prog)],
               capsys)[0] == 0
    assert run(["verify", "--program", str(prog), "--exhaustive"], capsys)[0] == 0
    code, out, _ = run(["eval", "--program", str(prog), "--input", "1,1,0", "--init", "random"],
                       capsys)
    assert code == 0
    assert "deltas: 1" in out and "restored: yes" in out


def test_eval_explicit_init(tmp_path, capsys):
    prog = tmp_path / "u.rp"
    run(["build-univariate", "--p", "7", "--poly", "x1^2+1", "-o", str(prog)], capsys)
    P = parse(prog.read_text())
    init = ",".join("2" for b in P.banks for _ in range(b.size))
    code, out, _ = run(["eval", "--program", str(prog), "--input", "3", "--init", init], capsys)
    assert code == 0 and "deltas: 3" in out
    assert run(["eval", "--program", str(prog), "--input", "3", "--init", "1,2"], capsys)[0] == 2


def test_profile_tables_are_reproducible(capsys):
    argv = ["build-waring", "--p", "11", "--poly", "x1^2*x2 + 3*x2*x3^2"]
    first = run(argv, capsys)
    second = run(argv, capsys)
    assert first == second


def test_space_report_for_program(tmp_path, capsys):
    prog = tmp_path / "u.rp"
    run(["build-univariate", "--p", "7", "--poly", "x1^3+x1", "-o", str(prog)], capsys)
    code, out, _ = run(["space-report", "--program", str(prog)], capsys)
    P = parse(prog.read_text())
    prof = P.resources()
    expected = prof.total_registers * log2(7)
    assert code == 0 and f"{expected:.2f} units" in out
