import json
import subprocess
import sys

import pytest

from conftest import DATA, FIXTURES
from provforge.cli import run

SEED = str(DATA / "docrev.provn")
WIKI = str(DATA / "wiki.constraints")


def _generate(out, *extra):
    return run(["generate", "--seed", SEED, "--constraints", WIKI, "--out", str(out), *extra])


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))}


def test_generate_writes_collection(tmp_path, capsys):
    assert _generate(tmp_path / "o", "--graphs", "50", "--max-nodes", "20",
                     "--max-edges", "30") == 0
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert len(names) == 51 and names[0] == "graph_0000.provn" and "report.json" in names
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["totals"]["graphs"] == 50
    assert "wrote 50 graph(s)" in capsys.readouterr().out


def test_reruns_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert _generate(tmp_path / name, "--graphs", "3", "--rng-seed", "7") == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    assert _generate(tmp_path / "c", "--graphs", "3", "--rng-seed", "8") == 0
    assert _tree(tmp_path / "a") != _tree(tmp_path / "c")


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PROVFORGE_SEED", "7")
    assert _generate(tmp_path / "env", "--graphs", "2") == 0
    monkeypatch.delenv("PROVFORGE_SEED")
    assert _generate(tmp_path / "flag", "--graphs", "2", "--rng-seed", "7") == 0
    assert _tree(tmp_path / "env") == _tree(tmp_path / "flag")


def test_nonterminating_exit_code(tmp_path, capsys):
    # every Entity needs an outgoing derivation, but a finite DAG has a sink
    seed = tmp_path / "chain.provn"
    seed.write_text("entity(e1)\nentity(e2)\nwasDerivedFrom(e2, e1)\n")
    cons = tmp_path / "c.constraints"
    cons.write_text("an Entity has out degree at least 1;\n")
    code = run(["generate", "--seed", str(seed), "--constraints", str(cons), "--out",
                str(tmp_path / "o"), "--max-nodes", "5"])
    assert code == 2
    assert "safety cap" in capsys.readouterr().err
    assert (tmp_path / "o" / "graph_0000.provn").exists()


def test_validate(tmp_path, capsys):
    assert _generate(tmp_path / "o", "--graphs", "2") == 0
    assert run(["validate", str(tmp_path / "o"), WIKI]) == 0
    bad = tmp_path / "bad.provn"
    bad.write_text("entity(e)\nactivity(a1)\nactivity(a2)\n"
                   "wasGeneratedBy(e, a1)\nwasGeneratedBy(e, a2)\n")
    capsys.readouterr()
    assert run(["validate", "--json", str(bad)]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["valid"] is False
    assert payload["files"][0]["violations"][0]["code"] == "unique-generation"


def test_input_errors(tmp_path, capsys):
    broken = tmp_path / "broken.constraints"
    broken.write_text("an Entity has in degree between 5, 2 times;")
    assert run(["validate", str(broken)]) == 1
    assert "broken.constraints:1:" in capsys.readouterr().err
    assert run(["generate", "--seed", str(tmp_path / "missing.provn")]) == 1
    assert run(["generate", "--seed", SEED, "--max-nodes", "0", "--out", str(tmp_path)]) == 1


def test_compile(capsys):
    assert run(["compile", "--seed", SEED]) == 0
    out = capsys.readouterr().out
    assert "// Used.GrowTarget\nMATCH (a:Activity {}) CREATE (a)-[:USED" in out
    assert run(["compile", "--seed", SEED, "--constraints", WIKI, "--dialect", "strict",
                "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dialect"] == "strict" and len(payload["queries"]) == 12


def test_compile_graph_script(capsys):
    assert run(["compile", "--graph", SEED]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 8


def test_stats_then_compare(tmp_path, capsys):
    for name, seed in (("ctl", "1"), ("tst", "2")):
        assert _generate(tmp_path / name, "--graphs", "5", "--rng-seed", seed) == 0
        assert run(["stats", "--collection", str(tmp_path / name), "--json",
                    "--out", str(tmp_path / f"{name}.json")]) == 0
    stats = json.loads((tmp_path / "ctl.json").read_text())
    assert stats["collection"]["graphs"] == 5
    assert stats["metrics"]["contributions_per_agent"] is None
    capsys.readouterr()
    assert run(["compare", str(tmp_path / "ctl.json"), str(tmp_path / "tst.json")]) == 0
    assert "associations_per_agent" in capsys.readouterr().out


def test_compare_fixture_report(capsys):
    assert run(["compare", "--json", str(FIXTURES / "control_metrics.json"),
                str(FIXTURES / "test_metrics.json")]) == 0
    rows = json.loads(capsys.readouterr().out)["comparisons"]
    by = {(r["metric"], r["statistic"]): r for r in rows}
    assert by[("associations_per_agent", "mean")]["absolute_delta"] == 0.5
    assert by[("contributions_per_agent", "mean")]["absolute_delta"] == 0.7


def test_compare_rejects_non_report(tmp_path):
    junk = tmp_path / "junk.json"
    junk.write_text("[1, 2]")
    assert run(["compare", str(junk), str(junk)]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "provforge", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("provforge ")


@pytest.mark.parametrize("fmt, ext", [("json", "jsonl"), ("cypher", "cypher")])
def test_other_output_formats(tmp_path, fmt, ext):
    assert _generate(tmp_path / fmt, "--format", fmt) == 0
    assert (tmp_path / fmt / f"graph_0000.{ext}").exists()
    if fmt == "json":
        assert run(["validate", str(tmp_path / fmt)]) == 0
