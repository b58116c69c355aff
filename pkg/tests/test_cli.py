import json
import subprocess
import sys

import pytest

from kgmotif import cli
from kgmotif.kg import save_kg
from kgmotif.wl import ultra_link_colors

from conftest import TWIN, fuzz_graphs


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip().startswith("{") else out.out), out.err


def test_lift_twin(capsys):
    code, rep, _ = run(capsys, "lift", "--kg", TWIN, "--motifs", "f3path")
    assert code == 0
    assert ["tfh", ["r2", "r3", "r1"]] in rep["lift"]["hyperedges"]
    assert rep["command"] == "lift" and rep["config"]["motifs"] == "f3path"


def test_lift_empty(capsys):
    code, rep, _ = run(capsys, "lift", "--kg", TWIN, "--motifs", "empty")
    assert code == 0 and rep["lift"]["hyperedges"] == []


def test_fast_matches_default(capsys, tmp_path):
    for i, g in enumerate(fuzz_graphs(61, 5)):
        path = tmp_path / f"g{i}.tsv"
        save_kg(g, path)
        for name in ("ultra4", "f2path", "f3path"):
            _, slow, _ = run(capsys, "lift", "--kg", path, "--motifs", name)
            _, fast, _ = run(capsys, "lift", "--kg", path, "--motifs", name, "--fast")
            assert slow["lift"] == fast["lift"]


def test_fast_unavailable(capsys):
    code, _, err = run(capsys, "lift", "--kg", TWIN, "--motifs", "f3star", "--fast")
    assert code == 2 and "error" in err


@pytest.mark.parametrize("motifs,separated", [("ultra4", False), ("f3path", True), ("ultra", False)])
def test_separate_sweep(capsys, motifs, separated):
    code, rep, _ = run(capsys, "separate", "--kg", TWIN, "--motifs", motifs, "--link1", "r3,u,v1",
                       "--link2", "r3,u,v2", "--sweep", "--t-max", 10, "--l-max", 10)
    assert code == 0
    assert rep["separation"]["separated"] is separated
    assert (rep["separation"]["first_at"] is not None) is separated


def test_separate_identical_links(capsys):
    _, rep, _ = run(capsys, "separate", "--kg", TWIN, "--motifs", "f3path", "--link1", "r3,u,v1",
                    "--link2", "r3,u,v1")
    assert rep["separation"]["separated"] is False


def test_refine(capsys):
    _, rep, _ = run(capsys, "refine", "--from", "f2path", "--to", "f3path")
    assert sorted(u["motif"] for u in rep["refinement"]["uncovered"]) == ["hfh", "hft", "tfh", "tft"]
    _, rep, _ = run(capsys, "refine", "--from", "h2t", "--to", "ultra4")
    assert [u["motif"] for u in rep["refinement"]["uncovered"]] == ["h2h", "t2t"]
    _, rep, _ = run(capsys, "refine", "--from", "f3star", "--to", "f4star")
    assert [u["motif"] for u in rep["refinement"]["uncovered"]] == ["star4"]


def test_refine_isomorphic_copy(capsys, tmp_path):
    path = tmp_path / "t2h.json"
    path.write_text(json.dumps({"name": "t2h", "order": ["a", "b"], "facts": [["a", "y", "x"], ["b", "z", "y"]]}))
    _, rep, _ = run(capsys, "refine", "--from", "h2t", "--to", f"h2t,{path}")
    assert rep["refinement"]["uncovered"] == []


def test_core(capsys):
    _, rep, _ = run(capsys, "core", "--motifs", "para,h2t")
    assert {e["name"]: e["trivial"] for e in rep["cores"]} == {"h2t": False, "para": False}
    code, _, _ = run(capsys, "core")
    assert code == 2


def test_wl_dump(capsys):
    _, rep, _ = run(capsys, "wl-dump", "--kg", TWIN, "--motifs", "ultra4", "--q", "r3", "--u", "u")
    cols = dict(rep["coloring"]["colors"])
    assert cols["v1"] == cols["v2"]
    _, rep, _ = run(capsys, "wl-dump", "--kg", TWIN, "--motifs", "f3path", "--q", "r3", "--t", 1)
    cols = dict(rep["coloring"]["colors"])
    assert cols["r1"] != cols["r2"]


def test_connecthub_k2(capsys):
    code, rep, _ = run(capsys, "connecthub", "--k", 2, "--eval", "ultra4,f2star,f3star")
    assert code == 0
    assert rep["table"] == {"ultra4": 0.5, "f2star": 0.5, "f3star": 1.0}
    assert rep["inverse_augmentation"] is True


def test_connecthub_repeatable(capsys):
    a = run(capsys, "connecthub", "--k", 2, "--n-graphs", 2, "--seed", 3)[1]
    b = run(capsys, "connecthub", "--k", 2, "--n-graphs", 2, "--seed", 3)[1]
    assert a == b


def test_connecthub_pretty(capsys):
    code, text, _ = run(capsys, "connecthub", "--k", 2, "--pretty")
    assert code == 0 and "f3star  1.00" in text


def test_connecthub_bad_k(capsys):
    assert run(capsys, "connecthub", "--k", 1)[0] == 2


def test_ultra_equiv_small(capsys):
    code, rep, _ = run(capsys, "ultra-equiv", "--trials", 5, "--t", 2, "--l", 2)
    assert code == 0 and rep["passed"] and rep["n_pass"] == 5


def test_ultra_equiv_zero_trials(capsys, caplog):
    code, rep, _ = run(capsys, "ultra-equiv", "--trials", 0)
    assert code == 0 and rep["passed"] and rep["vacuous"]
    assert any("vacuous" in r.getMessage() for r in caplog.records)


def test_ultra_equiv_catches_injected_bug(capsys, monkeypatch):
    def broken(g, t, l, conds, interner=None):
        # forgets the first-stage rounds: relations only know whether they are the query
        return ultra_link_colors(g, 0, l, conds, interner)

    monkeypatch.setattr(cli, "ULTRA_IMPL", broken)
    code, rep, _ = run(capsys, "ultra-equiv", "--trials", 20, "--t", 2, "--l", 2)
    assert code == 1 and not rep["passed"]
    ce = rep["counterexample"]
    assert ce["triples"] and ce["mismatch_at"]


def test_numenc_probe(capsys, tmp_path):
    wpath = tmp_path / "w.json"
    _, rep, _ = run(capsys, "numenc-probe", "--kg", TWIN, "--motifs", "ultra4", "--link", "r3,u,v1",
                    "--link2", "r3,u,v2", "--save-weights", wpath)
    assert rep["identical_embeddings"] is True
    assert 0 < rep["links"][0]["score"] < 1
    assert wpath.exists()


def test_gen_random(capsys, tmp_path):
    _, rep, _ = run(capsys, "gen-random", "--n-graphs", 3, "--out-dir", tmp_path)
    assert len(rep["graphs"]) == 3
    assert all((tmp_path / f"random_{i}.tsv").exists() for i in range(3))


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("MOTIF_SEED", "17")
    _, rep, _ = run(capsys, "gen-random")
    assert rep["config"]["seed"] == 17
    monkeypatch.setenv("MOTIF_SEED", "x")
    assert run(capsys, "gen-random")[0] == 2


def test_threads_do_not_change_bytes(capsys):
    a = run(capsys, "lift", "--kg", TWIN, "--motifs", "f4path")[1]
    b = run(capsys, "lift", "--kg", TWIN, "--motifs", "f4path", "--threads", 4)[1]
    assert a["lift"] == b["lift"]


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert run(capsys, "lift", "--kg", TWIN, "--motifs", "h2t", "--out", out)[0] == 0
    assert json.loads(out.read_text())["command"] == "lift"


@pytest.mark.parametrize("argv", [
    ["lift", "--kg", "/nonexistent.tsv", "--motifs", "h2t"],
    ["lift", "--kg", str(TWIN), "--motifs", "nope"],
    ["separate", "--kg", str(TWIN), "--motifs", "h2t", "--link1", "r3,u", "--link2", "r3,u,v2"],
    ["separate", "--kg", str(TWIN), "--motifs", "h2t", "--link1", "r9,u,v1", "--link2", "r3,u,v2"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kgmotif", "lift", "--kg", str(TWIN), "--motifs", "h2t"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "lift"
