import csv
import io as stdio
import json

import jsonschema
import pytest

from hypertile import cli
from hypertile.constructions import build_space_B
from hypertile.io import serialize_graph, write_graph


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def payload(out, name):
    data = json.loads(out)
    assert data["schema"] == f"hypertile/{name}/v1"
    jsonschema.validate(data, cli.load_schema(name))
    return data


@pytest.fixture
def b44(tmp_path):
    path = tmp_path / "b44.h3"
    write_graph(build_space_B(4, 4)[0], path)
    return str(path)


def test_gen_writes_text_and_sidecar(capsys, tmp_path):
    code, out, _ = run(capsys, "gen", "spaceB", "4", "4")
    assert code == 0 and out.splitlines()[0] == "p h3 8 28"
    target = tmp_path / "g.h3"
    code, out, _ = run(capsys, "--json", "gen", "spaceB", "4", "4", "--out", str(target))
    data = payload(out, "gen")
    assert code == 0 and data["m"] == 28 and data["min_codegree"] == 2
    assert (tmp_path / "g.h3.part").read_text() == "A 0 1 2 3\nB 4 5 6 7\n"
    code, out, _ = run(capsys, "gen", "random", "12", "--seed", "3", "--json")
    assert payload(out, "gen")["min_codegree"] >= 5
    assert run(capsys, "gen", "spaceB", "4")[0] == 2
    assert run(capsys, "gen", "vdeg", "10")[0] == 2


def test_seed_before_and_after_subcommand_agree(capsys):
    _, first, _ = run(capsys, "--seed", "9", "gen", "random", "12")
    _, second, _ = run(capsys, "gen", "random", "12", "--seed", "9")
    assert first == second


def test_analyze(capsys, b44):
    code, out, _ = run(capsys, "analyze", b44)
    data = payload(out, "analyze")
    assert code == 0
    assert data["census"] == [4, 0, 24, 0]
    assert data["extremal"]["verdict"] is True and data["extremal"]["missing"] == 0
    assert data["le_slack"] == 1


def test_solve_modes(capsys, b44, tmp_path):
    code, out, _ = run(capsys, "solve", b44)
    assert code == 0 and payload(out, "solve")["verdict"] == "NoFactor"
    code, out, _ = run(capsys, "solve", b44, "--mode", "max")
    assert code == 0 and len(payload(out, "solve")["blocks"]) == 1
    code, out, _ = run(capsys, "solve", b44, "--mode", "greedy")
    assert code == 0
    dense = tmp_path / "dense16.h3"
    code, out, _ = run(capsys, "gen", "random", "16", "--p", "0.6", "--out", str(dense))
    code, out, _ = run(capsys, "--budget", "1", "solve", str(dense))
    assert code == 3 and payload(out, "solve")["verdict"] == "Unknown"


def test_factor(capsys, tmp_path):
    path = tmp_path / "b66.h3"
    write_graph(build_space_B(6, 6)[0], path)
    code, out, _ = run(capsys, "factor", str(path))
    data = payload(out, "factor")
    assert code == 0 and data["verdict"] == "Factor" and data["stage"] == "allgood"
    write_graph(build_space_B(13, 11)[0], path)
    code, out, _ = run(capsys, "factor", str(path), "--fallback", "off")
    assert code == 3 and payload(out, "factor")["stage"] == "failed"


def test_absorb(capsys, b44):
    code, out, _ = run(capsys, "absorb", "--demo", "--trials", "5")
    data = payload(out, "absorb")
    assert code == 0 and data["trials"] == data["successes"] == 5
    code, out, _ = run(capsys, "absorb", b44)
    data = payload(out, "absorb")
    assert code == 0 and data["builder"]["ok"] is False and "NotClosed" in data["builder"]["error"]
    assert run(capsys, "absorb")[0] == 2


def test_scan(capsys):
    code, out, _ = run(capsys, "scan", "12", "--trials", "0")
    assert code == 0 and out == "n,seed,delta2,verdict,stage,wall_ms\n"
    assert run(capsys, "scan", "10")[0] == 2
    code, out, err = run(capsys, "scan", "8", "--trials", "100")
    rows = list(csv.DictReader(stdio.StringIO(out)))
    assert code == 0 and len(rows) == 100
    assert rows[0]["stage"] == "certificate" and rows[0]["verdict"] == "NoFactor"
    assert all(r["verdict"] == "Factor" for r in rows[1:])
    assert "factor_rate=1.0000" in err


def test_scan_workers_keep_order(capsys):
    _, serial, _ = run(capsys, "scan", "8", "--trials", "6")
    _, parallel, _ = run(capsys, "--workers", "2", "scan", "8", "--trials", "6")
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]  # noqa: E731
    assert strip(serial) == strip(parallel)


def test_roundtrip(capsys, tmp_path):
    path = tmp_path / "messy.h3"
    path.write_text("# note\np h3 4 1\ne 2 1 0\n")
    code, out, err = run(capsys, "roundtrip", str(path))
    assert code == 0 and out == "true\n" and "sorted" in err
    code, out, _ = run(capsys, "--json", "roundtrip", str(path))
    assert payload(out, "roundtrip")["normalized"] is True
    path.write_text(serialize_graph(build_space_B(4, 4)[0]))
    assert payload(run(capsys, "--json", "roundtrip", str(path))[1], "roundtrip")["normalized"] is False


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "solve", str(tmp_path / "missing.h3"))[0] == 2
    bad = tmp_path / "bad.h3"
    bad.write_text("p h3 4 1\ne 0 1 7\n")
    code, _, err = run(capsys, "solve", str(bad))
    assert code == 2 and "line 2" in err
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--budget", "-1", "solve", str(bad))[0] == 2
