import json
from pathlib import Path

import pytest

from tsocbmc import parse_dlcs, parse_program_with_target
from tsocbmc.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
MP = str(CORPUS / "mp.tso")
SB = str(CORPUS / "sb.tso")

DFA_ENDS_A = """dfa
alphabet a b
states p0 p1
init p0
finals p1
p0 a -> p1
p0 b -> p0
p1 a -> p1
p1 b -> p0
"""

DFA_EVEN = """dfa
alphabet a b
states e0 e1
init e0
finals e0
e0 a -> e1
e0 b -> e1
e1 a -> e0
e1 b -> e0
"""

DLCS = """dlcs
states q0 q1 q2 qF
vars v w
alphabet a
init q0
target qF
q0 -> q1 : v := *
q1 -> q2 : send a v
q2 -> qF : recv a w
"""


def test_check_exit_codes_follow_the_flip(capsys):
    assert main(["check", MP, "--k", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("unreachable:")
    assert main(["check", MP, "--k", "2"]) == 1
    out = capsys.readouterr().out
    assert out.startswith("reachable:")


def test_check_witness_flag_prints_steps(capsys):
    assert main(["check", MP, "--k", "2", "--witness"]) == 1
    out = capsys.readouterr().out
    assert "w: w0 -> w1 : w_one := *" in out
    assert "switch to context" in out


def test_check_json_report(tmp_path, capsys):
    rpt = tmp_path / "report.json"
    assert main(["check", MP, "--k", "2", "--out", str(rpt)]) == 1
    capsys.readouterr()
    data = json.loads(rpt.read_text())
    assert data["reachable"] is True
    assert data["k"] == 2
    assert data["target"] == {"thread": "r", "state": "done"}
    assert data["stats"]["states_explored"] > 0
    assert isinstance(data["stats"]["wall_ms"], int)
    assert data["witness"], "a reachable report carries witness steps"
    step = data["witness"][0]
    assert set(step) == {"thread", "label", "effects", "values"}
    assert isinstance(step["values"], dict)
    # report is deterministic apart from timing
    rpt2 = tmp_path / "report2.json"
    assert main(["check", MP, "--k", "2", "--out", str(rpt2)]) == 1
    capsys.readouterr()
    d1 = json.loads(rpt.read_text())
    d2 = json.loads(rpt2.read_text())
    d1["stats"].pop("wall_ms")
    d2["stats"].pop("wall_ms")
    assert d1 == d2


def test_check_bound_exhausted_exit(capsys):
    assert main(["check", SB, "--k", "3", "--max-states", "50"]) == 3
    out = capsys.readouterr().out
    assert out.startswith("bound_exhausted:")


def test_check_target_override(capsys):
    assert main(["check", MP, "--k", "1", "--target", "w:w4"]) == 1
    capsys.readouterr()
    assert main(["check", MP, "--k", "1", "--target", "w:nots"]) == 2
    err = capsys.readouterr().err
    assert "nots" in err


def test_check_max_mb_env(monkeypatch, capsys):
    monkeypatch.setenv("TSOCBMC_MAX_MB", "not-a-number")
    assert main(["check", MP, "--k", "1"]) == 2
    err = capsys.readouterr().err
    assert "TSOCBMC_MAX_MB" in err
    monkeypatch.setenv("TSOCBMC_MAX_MB", "100000")
    assert main(["check", MP, "--k", "1"]) == 0
    capsys.readouterr()


def test_threads_flag_notes_single_thread(capsys):
    assert main(["check", MP, "--k", "1", "--threads", "4"]) == 0
    err = capsys.readouterr().err
    assert "single thread" in err


def test_simulate_modes(capsys):
    assert main(["simulate", MP, "--tso"]) == 1
    capsys.readouterr()
    assert main(["simulate", MP, "--cb", "1", "--depth", "60"]) == 0
    capsys.readouterr()
    assert main(["simulate", MP, "--cb", "2", "--depth", "60"]) == 1
    capsys.readouterr()
    # --tso and --cb are mutually exclusive
    assert main(["simulate", MP, "--tso", "--cb", "2"]) == 2
    capsys.readouterr()
    assert main(["simulate", MP, "--cb", "0"]) == 2
    capsys.readouterr()
    assert main(["simulate", MP, "--tso", "--domain-bound", "999"]) == 2
    capsys.readouterr()


def test_parse_canonicalizes_program(tmp_path, capsys):
    messy = tmp_path / "messy.tso"
    messy.write_text("# c\ndomain nat\nvars data flag\nthread w {\n"
                     "regs r\ninit q0\nq0 -> q1 : write data r\n}\n")
    assert main(["parse", str(messy)]) == 0
    out = capsys.readouterr().out
    p, tgt = parse_program_with_target(out)
    assert tgt is None and p.shared_vars == ("data", "flag")
    # canonical output is a fixed point
    again = tmp_path / "again.tso"
    again.write_text(out)
    assert main(["parse", str(again)]) == 0
    assert capsys.readouterr().out == out


def test_parse_sniffs_dfa_and_dlcs(tmp_path, capsys):
    f = tmp_path / "m.dfa"
    f.write_text(DFA_ENDS_A)
    assert main(["parse", str(f)]) == 0
    assert capsys.readouterr().out == DFA_ENDS_A
    f2 = tmp_path / "m.dlcs"
    f2.write_text(DLCS)
    assert main(["parse", str(f2)]) == 0
    assert capsys.readouterr().out == DLCS


def test_parse_error_exit_and_message(tmp_path, capsys):
    bad = tmp_path / "bad.tso"
    bad.write_text("domain nat\nthread t {\n  init\n}\n")
    assert main(["parse", str(bad)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("parse error: line ")
    assert main(["parse", str(tmp_path / "missing.tso")]) == 2
    capsys.readouterr()


def test_gen_bakery_round_trips_through_check(tmp_path, capsys):
    out = tmp_path / "bakery.tso"
    assert main(["gen", "bakery", "--n", "2", "--out", str(out)]) == 0
    capsys.readouterr()
    text = out.read_text()
    assert text.startswith("# suggested contexts: k=4\n")
    p, tgt = parse_program_with_target(text)
    assert tgt is not None and tgt.thread == "mon"
    assert main(["gen", "bakery", "--n", "0"]) == 2
    capsys.readouterr()


def test_gen_intersection(tmp_path, capsys):
    fa = tmp_path / "a.dfa"
    fb = tmp_path / "b.dfa"
    fa.write_text(DFA_ENDS_A)
    fb.write_text(DFA_EVEN)
    out = tmp_path / "prod.tso"
    assert main(["gen", "intersection", str(fa), str(fb),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    text = out.read_text()
    assert text.startswith("# suggested contexts: k=1\n")
    prog = tmp_path / "prod_only.tso"
    prog.write_text(text)
    assert main(["check", str(prog), "--k", "1"]) == 1
    capsys.readouterr()


def test_gen_dlcs(tmp_path, capsys):
    f = tmp_path / "chan.dlcs"
    f.write_text(DLCS)
    out = tmp_path / "chan.tso"
    assert main(["gen", "dlcs", str(f), "--out", str(out)]) == 0
    capsys.readouterr()
    text = out.read_text()
    m = parse_dlcs(DLCS)
    sends_recvs = 2
    assert text.startswith(f"# suggested contexts: k={2 + 2 * sends_recvs}\n")
    p, tgt = parse_program_with_target(text)
    assert {t.id for t in p.threads} == {"t", "t_ch"}
    assert tgt.state == m.target


def test_selftest_tiny(capsys):
    rc = main(["selftest", "--scale", "0.02", "--seed", "1",
               "--suite", "step-soundness"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("PASS step-soundness:")
    assert main(["selftest", "--suite", "no-such-suite"]) == 2
    capsys.readouterr()


def test_console_script_entry_point():
    import shutil
    import subprocess
    exe = shutil.which("tsocbmc")
    if exe is None:
        pytest.skip("console script not on PATH")
    r = subprocess.run([exe, "check", MP, "--k", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 1
    assert r.stdout.startswith("reachable:")


def test_usage_errors(capsys):
    assert main(["check", MP]) == 2            # --k is required
    capsys.readouterr()
    assert main([]) == 2                       # a subcommand is required
    capsys.readouterr()
    assert main(["check", MP, "--k", "1", "--target", "broken"]) == 2
    err = capsys.readouterr().err
    assert "THREAD:STATE" in err
    assert main(["check", MP, "--k", "0"]) == 2
    err = capsys.readouterr().err
    assert "positive context count" in err
