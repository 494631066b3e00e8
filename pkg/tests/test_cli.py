import json
import shutil
import subprocess
import sys

import pytest

from conftest import CORPUS
from wmrecon.cli import EXIT_GOLDEN, EXIT_INPUT, EXIT_OK, EXIT_SCRIPT, EXIT_TIMEOUT, main


def report_of(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_run_spray_annotate(tmp_path, capsys):
    out = tmp_path / "out.wms"
    assert main(["run", str(CORPUS / "spray.wms"), "--annotate", str(out)]) == EXIT_OK
    assert "  //Shellcode0::memalloc" in out.read_text(encoding="utf-8").split("\n")
    summary = capsys.readouterr().out
    assert "outcome: Terminated" in summary and "candidates: 1001" in summary


def test_timeout_exit_and_partial_report(tmp_path):
    loop = tmp_path / "loop.wms"
    loop.write_text("setMarker('spin');\nvar a = unescape('%u4141');\nwhile (1) { }\n")
    rep = tmp_path / "r.json"
    assert main(["run", str(loop), "--timeout-events", "1000", "--report", str(rep), "-q"]) == EXIT_TIMEOUT
    r = report_of(rep)
    assert r["outcome"] == "TimedOut" and r["event_count"] == 1000
    assert r["entries"][0]["label"] == "memalloc"


def test_uaf_aware_mode_gains_memfree(tmp_path):
    default, aware = tmp_path / "d.json", tmp_path / "a.json"
    assert main(["run", str(CORPUS / "uaf.wms"), "--report", str(default), "-q"]) == EXIT_OK
    assert main(["run", str(CORPUS / "uaf.wms"), "--aware-custom-alloc", "--report", str(aware), "-q"]) == EXIT_OK
    d = {e["name"]: e["label"] for e in report_of(default)["entries"]}
    a = {e["name"]: e["label"] for e in report_of(aware)["entries"]}
    assert "memfree" not in d["FRemove"].split("+")
    assert "memfree" in a["FRemove"].split("+")


@pytest.mark.parametrize("case", ["spray", "uaf"])
def test_analyze_matches_run(tmp_path, case):
    trace, live, replayed = tmp_path / "t.wmt", tmp_path / "live.json", tmp_path / "replay.json"
    src = str(CORPUS / f"{case}.wms")
    assert main(["run", src, "--trace", str(trace), "--report", str(live), "-q"]) == EXIT_OK
    assert main(["analyze", str(trace), "--source", src, "--report", str(replayed), "-q"]) == EXIT_OK
    assert live.read_bytes() == replayed.read_bytes()


def test_analyze_annotate_needs_source(tmp_path, capsys):
    trace = tmp_path / "t.wmt"
    shutil.copy(CORPUS / "golden" / "uaf.wmt", trace)
    assert main(["analyze", str(trace), "--annotate", str(tmp_path / "x.wms"), "-q"]) == EXIT_INPUT
    assert "--source" in capsys.readouterr().err


def test_truncated_trace(tmp_path, capsys):
    text = (CORPUS / "golden" / "uaf.wmt").read_text(encoding="utf-8")
    lines = text.split("\n")
    trace = tmp_path / "t.wmt"
    trace.write_text("\n".join(lines[:40]) + "\n" + lines[40][: len(lines[40]) // 2] + "\n")
    assert main(["analyze", str(trace), "-q"]) == EXIT_INPUT
    assert "line 41" in capsys.readouterr().err


def test_empty_trace(tmp_path, capsys):
    trace = tmp_path / "empty.wmt"
    trace.write_text("")
    rep = tmp_path / "r.json"
    assert main(["analyze", str(trace), "--report", str(rep)]) == EXIT_OK
    assert report_of(rep)["entries"] == []
    assert "candidates: 0" in capsys.readouterr().out


def test_corpus_passes(capsys):
    assert main(["corpus"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_corrupted_golden(tmp_path, capsys):
    golden = tmp_path / "golden"
    shutil.copytree(CORPUS / "golden", golden)
    path = golden / "default" / "uaf.report.json"
    path.write_text(path.read_text(encoding="utf-8").replace('"FRemove"', '"FRemoved"'), encoding="utf-8")
    assert main(["corpus", "--golden-dir", str(golden), "--case", "uaf"]) == EXIT_GOLDEN
    out = capsys.readouterr().out
    assert "FAIL uaf" in out and '-      "name": "FRemoved"' in out


def test_missing_golden(tmp_path):
    assert main(["corpus", "--golden-dir", str(tmp_path), "--case", "spray"]) == EXIT_GOLDEN


def test_unreadable_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.wms")]) == EXIT_INPUT
    assert "cannot read" in capsys.readouterr().err
    assert main(["analyze", str(tmp_path / "nope.wmt")]) == EXIT_INPUT


def test_syntax_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.wms"
    bad.write_text("for (i=0; i<500 {")
    assert main(["run", str(bad)]) == EXIT_SCRIPT
    assert "bad.wms:1:17" in capsys.readouterr().err


def test_script_error_exit(tmp_path, capsys):
    s = tmp_path / "s.wms"
    s.write_text("setMarker('x');\nvar a = unescape('%u4141');\nunescape();\n")
    rep = tmp_path / "r.json"
    assert main(["run", str(s), "--report", str(rep)]) == EXIT_SCRIPT
    r = report_of(rep)
    assert r["outcome"] == "ScriptError" and "unescape" in r["error"]
    assert r["entries"][0]["label"] == "memalloc"


def test_config_file_and_layout_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"aware_custom_alloc": True, "layout": {"heap_base": "0x00700000"}}))
    rep = tmp_path / "r.json"
    assert main(["run", str(CORPUS / "uaf.wms"), "--config", str(cfg), "--layout", "heap_size=0x20000000",
                 "--report", str(rep), "-q"]) == EXIT_OK
    r = report_of(rep)
    assert r["config"]["aware_custom_alloc"] is True
    assert r["config"]["layout"]["heap_base"] == "0x00700000"
    assert r["config"]["layout"]["heap_size"] == "0x20000000"
    assert "memfree" in r["entries"][1]["label"]


@pytest.mark.parametrize("args", [["--layout", "heap_base"], ["--layout", "bogus=1"],
                                  ["--layout", "heap_base=0x00401000"], ["--timeout-events", "0"]])
def test_bad_configuration(args, capsys):
    assert main(["run", str(CORPUS / "uaf.wms"), *args]) == EXIT_INPUT
    assert "configuration error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["run", str(CORPUS / "uaf.wms"), "--config", str(cfg)]) == EXIT_INPUT
    cfg.write_text('{"colour": 1}')
    assert main(["run", str(CORPUS / "uaf.wms"), "--config", str(cfg)]) == EXIT_INPUT


def test_compress_labels(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert main(["run", str(CORPUS / "spray.wms"), "--compress-labels", "--report", str(rep), "-q"]) == EXIT_OK
    big = report_of(rep)["entries"][0]
    assert big["name"] == "BigBlock" and "×" in big["compressed"]


def test_auto_candidates_flag(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["run", str(CORPUS / "uaf.wms"), "--auto-candidates", "--report", str(rep), "-q"]) == EXIT_OK
    entries = report_of(rep)["entries"]
    assert entries and all(e["synthetic"] for e in entries)


# one script per outcome class; the exit code is a function of the outcome alone
OUTCOMES = [
    ("var a = 1;", [], EXIT_OK),
    ("setMarker('a');\nresetMarker();\nresetMarker();", [], EXIT_OK),
    ("while (1) { }", ["--timeout-events", "5000"], EXIT_TIMEOUT),
    ("for (;;) { var s = unescape('%u4141'); }", ["--timeout-events", "5000"], EXIT_TIMEOUT),
    ("nosuch();", [], EXIT_SCRIPT),
    ("var a = unescape('%u4141'); while (1) a += a;", ["--layout", "heap_size=0x10000"], EXIT_SCRIPT),
    ("var = ;", [], EXIT_SCRIPT),
]


@pytest.mark.parametrize("src,args,code", OUTCOMES)
def test_exit_code_contract(tmp_path, src, args, code):
    s = tmp_path / "s.wms"
    s.write_text(src)
    assert main(["run", str(s), "-q", *args]) == code


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wmrecon", "corpus", "--case", "uaf"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS uaf" in proc.stdout


def test_pivot_free_btns_aware(tmp_path):
    out = {}
    for flag in ([], ["--aware-custom-alloc"]):
        rep = tmp_path / f"r{len(flag)}.json"
        assert main(["run", str(CORPUS / "pivot.wms"), "--report", str(rep), "-q", *flag]) == EXIT_OK
        out[bool(flag)] = {e["name"]: e["label"] for e in report_of(rep)["entries"]}
    assert out[False]["free_btns"] == ""
    assert "memfree" in out[True]["free_btns"].split("+")
