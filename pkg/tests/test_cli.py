import json
import math

import numpy as np
import pytest

from fusionflow import fusion, optics, patterns, zx
from fusionflow.cli import _angle, main
from fusionflow.flow import OpenGraph


@pytest.fixture
def files(tmp_path):
    g = OpenGraph(["i1", "i2", "o1", "o2"], {("i1", "o1"), ("i2", "o2"), ("o1", "o2")},
                  {"i1", "i2"}, {"o1", "o2"}, {"i1": "X", "i2": "X"}, {})
    out = {"graph": tmp_path / "g.json", "report": tmp_path / "report.json", "dir": tmp_path}
    out["graph"].write_text(json.dumps(g.to_json()))
    return out


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return rc, cap.out, cap.err


@pytest.mark.parametrize("text,value", [("pi", math.pi), ("-pi/2", -math.pi / 2), ("3pi/4", 0.75 * math.pi),
                                        ("3*pi/4", 0.75 * math.pi), ("0.25", 0.25)])
def test_angle_parsing(text, value):
    assert math.isclose(_angle(text), value)


def test_compile_then_verify(capsys, files):
    rc, out, _ = run(capsys, "compile", "--graph", files["graph"], "--epsilon", 0.05, "--out", files["report"])
    assert rc == 0 and "PASS protocol.unitary" in out
    rep = json.loads(files["report"].read_text())
    assert rep["ok"] and rep["schedule"]["k"] == 1
    rc, out, _ = run(capsys, "verify", "--report", files["report"], "--steps", 20)
    lines = out.strip().splitlines()
    assert rc == 0 and all(line.startswith("PASS") for line in lines)
    assert lines[0].split()[1] == "report.artifacts" and len(lines) == 11


def test_verify_short_horizon_fails(capsys, files):
    run(capsys, "compile", "--graph", files["graph"], "--out", files["report"])
    rc, out, _ = run(capsys, "verify", "--report", files["report"], "--steps", 3)
    assert rc == 1 and "FAIL protocol.horizon" in out


def test_verify_detects_tampered_report(capsys, files):
    run(capsys, "compile", "--graph", files["graph"], "--out", files["report"])
    rep = json.loads(files["report"].read_text())
    rep["schedule"]["sigma"] = rep["schedule"]["sigma"][::-1]
    files["report"].write_text(json.dumps(rep))
    rc, out, _ = run(capsys, "verify", "--report", files["report"])
    assert rc == 1 and "FAIL report.artifacts" in out


def test_compile_is_byte_identical(capsys, files):
    a, b = files["dir"] / "a.json", files["dir"] / "b.json"
    for path in (a, b):
        assert run(capsys, "--seed", 5, "compile", "--random", 4, "--out", path)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_random_graph(capsys, files):
    outs = [run(capsys, "--seed", s, "compile", "--random", 4)[1] for s in (1, 2)]
    assert json.loads(outs[0])["graph"] != json.loads(outs[1])["graph"]


@pytest.mark.parametrize("family", ["X", "Y"])
def test_protocol_rus_table(capsys, family):
    rc, out, _ = run(capsys, "protocol", "rus", "--family", family, "--rounds", 3)
    rows = [line.split("\t") for line in out.strip().splitlines()]
    assert rc == 0 and rows[0][3] == "1-2^-(n+1)"
    for n, row in enumerate(rows[1:]):
        assert float(row[2]) == pytest.approx(1 - 2.0 ** -(n + 1), abs=1e-10) and row[-1] == "PASS"


@pytest.mark.parametrize("emit", ["json", "dot"])
def test_protocol_unroll(capsys, tmp_path, emit):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"components": [{"type": "emitter", "u": "H"}]}))
    rc, out, _ = run(capsys, "protocol", "unroll", "--protocol", path, "--steps", 2, "--emit", emit)
    assert rc == 0
    if emit == "dot":
        assert out.startswith("graph zx {")
    else:
        data = json.loads(out)
        assert len(data["out_ports"]) == 4 and zx.ZxDiagram.from_json(data["diagram"])


def test_lo_simulate_hong_ou_mandel(capsys, tmp_path):
    c = optics.LoCircuit(2, [optics.BeamSplitter(0, 1), optics.Detector(0, "a"), optics.Detector(1, "b")])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c.to_json()))
    rc, out, _ = run(capsys, "lo", "simulate", "--circuit", path, "--input", "1,1")
    rows = dict((tuple(r.split("\t")[:2]), float(r.split("\t")[2])) for r in out.strip().splitlines()[1:])
    assert rc == 0 and ("1", "1") not in rows
    assert rows[("2", "0")] == pytest.approx(0.5) and rows[("0", "2")] == pytest.approx(0.5)


def test_fusion_classify(capsys, tmp_path):
    rc, out, _ = run(capsys, "fusion", "classify", "--u1", "0,0,0", "--u2", "0,0,0", "--u3", "0,0,0")
    assert rc == 0 and json.loads(out)["class"]["green_failure"] is False
    path = tmp_path / "x.json"
    path.write_text(json.dumps(fusion.x_fusion().to_json()))
    rc, out, _ = run(capsys, "fusion", "classify", "--spec", path)
    cls = json.loads(out)["class"]
    assert rc == 0 and cls["green_failure"] and cls["family"] == "X"


def test_flow_find_and_verify(capsys, files):
    rc, out, _ = run(capsys, "flow", "find", "--graph", files["graph"])
    assert rc == 0
    cert = files["dir"] / "cert.json"
    cert.write_text(out)
    rc, out, _ = run(capsys, "flow", "verify", "--graph", files["graph"], "--cert", cert)
    assert rc == 0 and json.loads(out)["ok"]
    data = json.loads(cert.read_text())
    data["certificate"]["p"]["i1"] = ["o2"]
    cert.write_text(json.dumps(data))
    assert run(capsys, "flow", "verify", "--graph", files["graph"], "--cert", cert)[0] == 1


def test_flow_find_reports_absence(capsys, tmp_path):
    g = OpenGraph([0, 1, 2], {(0, 2), (1, 2)}, {0, 1}, {2}, {0: "XY", 1: "XY"}, {0: 0.0, 1: 0.0})
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_json()))
    rc, out, _ = run(capsys, "flow", "find", "--graph", path)
    assert rc == 1 and json.loads(out)["found"] is False


def test_pattern_check_and_from_flow(capsys, tmp_path):
    p = patterns.xy_pattern_example(0.7)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_json()))
    rc, out, _ = run(capsys, "pattern", "check", "--pattern", path, "--mode", "stepwise")
    assert rc == 0 and out.splitlines() == ["PASS pattern.runnable", "PASS pattern.determinism.stepwise"]
    net = tmp_path / "n.json"
    net.write_text(json.dumps(patterns.underlying_network(p).to_json()))
    rc, out, _ = run(capsys, "pattern", "from-flow", "--network", net)
    assert rc == 0 and patterns.is_runnable(patterns.Pattern.from_text(out.strip(), outputs=p.outputs))


def test_pattern_check_text_with_symbolic_angle(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text(patterns.xy_pattern_example().to_text())
    rc, out, _ = run(capsys, "pattern", "check", "--pattern", path, "--outputs", "2,4", "--bind", "a=pi/4")
    assert rc == 0


def test_pattern_check_flags_missing_correction(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("M{X,b} 2 M{X,a} 1 E 2 3 E 1 2 N 3 N 2")
    rc, out, _ = run(capsys, "pattern", "check", "--pattern", path, "--inputs", "1", "--mode", "plain")
    assert rc == 1 and "FAIL pattern.determinism" in out


def test_zx_eval_and_rewrite(capsys, tmp_path):
    d = zx.compose(zx.rotation("Z", 0.3), zx.rotation("Z", 0.4))
    path = tmp_path / "d.json"
    path.write_text(json.dumps(d.to_json()))
    rc, out, _ = run(capsys, "zx", "eval", "--diagram", path)
    m = json.loads(out)
    assert rc == 0 and np.allclose(np.array(m["re"]) + 1j * np.array(m["im"]), np.diag([1, np.exp(0.7j)]))
    zs = [v for v, s in d.spiders.items() if s.color == "Z"]
    rc, out, err = run(capsys, "zx", "rewrite", "--diagram", path, "--rule", "spider_fusion",
                       "--site", ",".join(map(str, zs)))
    assert rc == 0 and err.startswith("PASS")
    assert sum(s["color"] == "Z" for s in json.loads(out)["spiders"]) == 1


@pytest.mark.parametrize("argv", [
    ["compile", "--graph", "{missing}"],
    ["bogus"],
    ["protocol", "rus", "--family", "Q", "--rounds", "1"],
    ["compile"],
    ["fusion", "classify", "--u1", "1,2"],
    ["flow", "find", "--graph", "{bad}"],
    ["protocol", "unroll", "--protocol", "{badproto}", "--steps", "1"],
])
def test_malformed_input_exits_2(capsys, tmp_path, argv):
    (tmp_path / "bad.json").write_text('{"vertices": 3}')
    (tmp_path / "badproto.json").write_text('{"components": [{"type": "laser"}]}')
    argv = [a.format(missing=tmp_path / "none.json", bad=tmp_path / "bad.json", badproto=tmp_path / "badproto.json")
            for a in argv]
    rc, _, err = run(capsys, *argv)
    assert rc == 2
    diag = json.loads(err.strip().splitlines()[-1])
    assert set(diag) == {"error", "message"}
