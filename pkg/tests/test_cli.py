import json
from pathlib import Path

import numpy as np
import pytest

from pocp import cli
from pocp.cli import ParseError, emit_pocp, export_cbf, export_sdpa, main, parse_pocp
from pocp.instance import ConeBlock, MultiConeInstance, PocpInstance
from pocp.reformulate import ConicProgram, arrow_lift, compile_soc, witness

GOLDEN = Path(__file__).parent / "golden"
SLACK = "POCP 1\np 2/1\ndims 2 1\n0 0 0 1\n"


def test_parse_examples():
    inst = parse_pocp(SLACK)
    assert (inst.F, inst.G, inst.H, inst.p.r, inst.p.s) == (((0, 0),), (0,), (1,), 2, 1)
    inst = parse_pocp("# comment\nPOCP 1\np 3/2\ndims 2 2\n1 2 3 4\n# inside\n-1 0 0 -5\n")
    assert inst.p.value == 1.5 and inst.H == (4, -5)
    with pytest.raises(ParseError) as e:
        parse_pocp("POCP 1\np 3/2\ndims 2 1\n1 2 3\n")
    assert e.value.line == 4
    with pytest.raises(ParseError) as e:
        parse_pocp("POCP 1\np 3/2\ndims 2 2\n1 2 3 4\n")
    assert "end of file" in str(e.value)
    for bad in ["", "POCP 2\n", "POCP 1\np 3/0\ndims 2 1\n0 0 0 1\n", "POCP 1\np 2\ndims 2 1\n0 0 0 x\n",
                "POCP 1\np 2\ndims 2 1\n0 0 0 1\n0 0 0 1\n"]:
        with pytest.raises(ParseError):
            parse_pocp(bad)


def test_emit_parse_round_trip():
    rng = np.random.default_rng(1)
    for p in ("2", "3/2", "7/3"):
        inst = PocpInstance(rng.integers(-99, 100, (4, 3)).tolist(), rng.integers(-9, 10, 4).tolist(),
                            rng.integers(-9, 10, 4).tolist(), p)
        assert parse_pocp(emit_pocp(inst)) == inst
    multi = MultiConeInstance((ConeBlock(2, "3/2"), ConeBlock(3, 2)),
                              ([[1, 2], [3, 4]], [[0, 1, 0], [1, 0, 1]]), ([5, 6], [7, 8]), [9, 10])
    text = emit_pocp(multi)
    assert parse_pocp(text) == multi
    assert text.splitlines()[5] == "1 2 5 0 1 0 7 9"


def _read_cbf(text):
    """Minimal CBF reader: (nvars, cone list, A dense, b dense)."""
    sec = {}
    lines = [ln for ln in text.splitlines() if ln.strip()]
    k = 0
    while k < len(lines):
        head = lines[k]
        if head in ("VER", "OBJSENSE"):
            sec[head] = lines[k + 1]
            k += 2
        elif head == "VAR":
            sec["nv"] = int(lines[k + 1].split()[0])
            k += 3
        elif head == "CON":
            nrow, ncone = map(int, lines[k + 1].split())
            sec["nrow"], sec["cones"] = nrow, [tuple(lines[k + 2 + i].split()) for i in range(ncone)]
            k += 2 + ncone
        elif head in ("ACOORD", "BCOORD"):
            cnt = int(lines[k + 1])
            sec[head] = [lines[k + 2 + i].split() for i in range(cnt)]
            k += 2 + cnt
        else:
            raise AssertionError(f"unexpected section {head}")
    A = np.zeros((sec["nrow"], sec["nv"]))
    b = np.zeros(sec["nrow"])
    for i, j, v in sec.get("ACOORD", []):
        A[int(i), int(j)] += float(v)
    for i, v in sec.get("BCOORD", []):
        b[int(i)] += float(v)
    return sec, A, b


def _cbf_holds(sec, A, b, y, tol=1e-9):
    val = A @ y + b
    at = 0
    for kind, size in sec["cones"]:
        size = int(size)
        part = val[at:at + size]
        if kind == "L-" and np.any(part > tol):
            return False
        if kind == "L=" and np.any(np.abs(part) > tol):
            return False
        if kind == "Q" and part[0] < np.linalg.norm(part[1:]) - tol:
            return False
        at += size
    return True


def test_cbf_slack_instance():
    prog = compile_soc(parse_pocp(SLACK))
    text = export_cbf(prog)
    assert text == (GOLDEN / "slack_p2.cbf").read_text()
    sec, A, b = _read_cbf(text)
    assert sec["VER"] == "3" and sec["OBJSENSE"] == "MIN"
    assert [c for c in sec["cones"] if c[0] == "Q"] == [("Q", "3")] * 2
    assert _cbf_holds(sec, A, b, witness(prog, [0.6, -0.8], 1.0))
    assert not _cbf_holds(sec, A, b, witness(prog, [3.0, 4.0], 4.0))


def test_cbf_general_exponent_points():
    inst = PocpInstance([[1, -2, 0]], [1], [7], "5/3")
    prog = compile_soc(inst)
    sec, A, b = _read_cbf(export_cbf(prog))
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.uniform(-1, 1, 3)
        nx = np.sum(np.abs(x) ** (5 / 3)) ** (3 / 5)
        z = nx * rng.uniform(1.01, 2.0)
        ok = x[0] - 2 * x[1] + z <= 7
        assert _cbf_holds(sec, A, b, witness(prog, x, z), tol=1e-7) == ok


def test_sdpa_slack_instance():
    sdp = arrow_lift(parse_pocp(SLACK))
    text = export_sdpa(sdp)
    assert text == (GOLDEN / "slack_p2.sdpa").read_text()
    lines = text.splitlines()
    assert lines[1] == str(1 + 3) and lines[2] == "2" and lines[3] == "3 -1"


def test_empty_programs_rejected():
    with pytest.raises(ValueError):
        export_cbf(ConicProgram())
    with pytest.raises(ValueError):
        export_sdpa(type(arrow_lift(parse_pocp(SLACK)))([], [], [], 3))


def _run(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def test_exit_codes(tmp_path, capsys):
    feas = tmp_path / "f.pocp"
    feas.write_text(SLACK)
    infeas = tmp_path / "i.pocp"
    infeas.write_text("POCP 1\np 2/1\ndims 2 2\n0 0 -1 -2\n0 0 1 1\n")   # z >= 2 and z <= 1
    broken = tmp_path / "b.pocp"
    broken.write_text("POCP 1\np 2/1\ndims 2 1\n0 0 1\n")
    code, rep = _run(capsys, "check", str(feas), "--radius", "10")
    assert code == 0 and rep["status"] == "feasible"
    code, rep = _run(capsys, "check", str(infeas), "--radius", "10")
    assert code == 1 and rep["status"] == "infeasible"
    code, rep = _run(capsys, "check", str(infeas), "--radius", "10", "--budget", "1")
    assert code == 2
    code, rep = _run(capsys, "check", str(broken))
    assert code == 65 and "line 4" in rep["message"]
    code, rep = _run(capsys, "check", str(feas), "--radius", "-1")
    assert code == 64
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 64


def test_reformulate_and_formula_commands(tmp_path, capsys):
    src = tmp_path / "s.pocp"
    src.write_text(SLACK)
    out = tmp_path / "s.cbf"
    code, rep = _run(capsys, "reformulate", str(src), "--target", "soc", "--out", str(out))
    assert code == 0 and out.read_text() == (GOLDEN / "slack_p2.cbf").read_text()
    out = tmp_path / "s.sdpa"
    code, rep = _run(capsys, "reformulate", str(src), "--target", "sdp", "--out", str(out))
    assert code == 0 and out.read_text() == (GOLDEN / "slack_p2.sdpa").read_text()
    out = tmp_path / "m.txt"
    code, rep = _run(capsys, "formula", str(src), "--kind", "membership", "--out", str(out))
    assert code == 0 and out.read_text().startswith("PRENEX 1")


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("POCP_SEED", "17")
    assert cli._seed() == 17
    monkeypatch.setenv("POCP_SEED", "x")
    with pytest.raises(cli.UsageError):
        cli._seed()
    monkeypatch.delenv("POCP_SEED")
    assert cli._seed() == 0


def test_app_command(tmp_path, capsys):
    data = tmp_path / "pts.csv"
    data.write_text("x,y,weight\n0,0,1\n3,4,1\n")
    code, rep = _run(capsys, "app", "weber", str(data), "--eps", "1e-4")
    assert code == 0 and rep["model"] == "Weber" and abs(rep["value"] - 5) <= 1e-3
    code, rep = _run(capsys, "app", "comp", str(data))
    assert code == 64
