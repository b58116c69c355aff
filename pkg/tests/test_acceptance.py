"""End-to-end acceptance checks, one test per criterion."""
import json
import time

import numpy as np
import pytest

from kgmotif import cli
from kgmotif.homs import core_onto_exists, refinement_report, rp_core, rp_core_with_witnesses
from kgmotif.kg import is_isomorphic, load_kg, random_isomorphic_copy, validate_homomorphism
from kgmotif.lift import lift, lift_fast_2path, lift_fast_3path
from kgmotif.motifs import H2H, H2T, T2H, catalog, catalog_names
from kgmotif.numenc import EncoderWeights, entity_forward, relation_forward
from kgmotif.wl import Interner, all_conditions, motif_link_colors, same_partition, ultra_link_colors

from conftest import TWIN, fuzz_graphs

pytestmark = pytest.mark.acceptance


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, json.loads(capsys.readouterr().out)


def test_c1_connecthub_table(capsys):
    start = time.perf_counter()
    for k in range(2, 7):
        names = ["ultra4"] + [f"f{m}star" for m in range(2, k + 2)]
        code, rep = run_cli(capsys, "connecthub", "--k", k, "--eval", ",".join(names))
        assert code == 0
        expected = {name: 0.5 for name in names}
        expected[f"f{k + 1}star"] = 1.0
        assert rep["table"] == expected, f"k={k}"
    assert time.perf_counter() - start < 300


def test_c2_twin_counterexample(capsys):
    common = ["separate", "--kg", TWIN, "--link1", "r3,u,v1", "--link2", "r3,u,v2",
              "--sweep", "--t-max", 10, "--l-max", 10]
    code, rep = run_cli(capsys, *common, "--motifs", "ultra4")
    assert code == 0 and rep["separation"]["separated"] is False
    code, rep = run_cli(capsys, *common, "--motifs", "f3path")
    assert code == 0 and rep["separation"]["separated"] is True
    assert rep["separation"]["first_at"] is not None


def test_c3_ultra_equals_f2path(capsys):
    start = time.perf_counter()
    code, rep = run_cli(capsys, "ultra-equiv", "--trials", 200, "--max-nodes", 12, "--max-rels", 5,
                        "--p", 0.15, "--t", 4, "--l", 4, "--seed", 0)
    assert code == 0 and rep["passed"] and rep["n_pass"] == 200
    assert rep["counterexample"] is None
    assert time.perf_counter() - start < 120


def test_c4_sparse_products_match_lift():
    start = time.perf_counter()
    ultra4, f3path = catalog("ultra4"), catalog("f3path")
    for g in fuzz_graphs(400, 100):
        assert lift_fast_2path(g).hyperedge_set() == lift(ultra4, g).hyperedge_set()
        assert lift_fast_3path(g).hyperedge_set() == lift(f3path, g).hyperedge_set()
    assert time.perf_counter() - start < 60


def test_c5_core_machinery():
    start = time.perf_counter()
    for g in fuzz_graphs(500, 100):
        res = rp_core_with_witnesses(g)
        assert validate_homomorphism(res.to_core, g, res.core)
        assert validate_homomorphism(res.from_core, res.core, g)
        assert is_isomorphic(rp_core(res.core), res.core)
    for name in catalog_names():
        for p in catalog(name):
            assert core_onto_exists(p, p), f"{name}/{p.name}"
    assert time.perf_counter() - start < 120


def test_c6_refinement_hierarchy():
    for n in range(2, 5):
        for m in range(n + 1, 5):
            assert refinement_report(catalog(f"f{n}path"), catalog(f"f{m}path")).uncovered, (n, m)
    for n in range(2, 9):
        for m in range(n + 1, 9):
            assert refinement_report(catalog(f"f{n}star"), catalog(f"f{m}star")).uncovered, (n, m)
    assert refinement_report([H2T], [H2T, H2H]).uncovered_names == ["h2h"]
    assert refinement_report([H2T], [H2T, T2H]).uncovered == []
    assert refinement_report(catalog("f3path"), catalog("f3path") + [H2T.renamed("h2t_copy")]).uncovered == []


def _embeddings(g, h, w, conds):
    """Final entity embedding of every link, keyed like LinkColoring rows."""
    by_q = {}
    for q, u in conds:
        by_q.setdefault(q, []).append(u)
    out = {}
    for q, us in by_q.items():
        rel = relation_forward(h, q, w, 3)[-1]
        ent = entity_forward(g, rel, us, q, w, 3)[-1]
        for i, u in enumerate(us):
            out[q, u] = ent[i]
    return out


def test_c7_wl_bounds_numeric_encoder():
    start = time.perf_counter()
    motifs = catalog("f2path")
    weights = [EncoderWeights.init(seed, motifs, T=3, L=3) for seed in range(3)]
    violations = 0
    for g in fuzz_graphs(700, 50):
        h = lift(motifs, g)
        conds = all_conditions(g)
        colors = motif_link_colors(g, h, 3, 3, conds, interner=Interner())
        groups = {}
        for q, u in conds:
            for v, c in enumerate(colors.colors(q, u)):
                groups.setdefault(int(c), []).append((q, u, v))
        for w in weights:
            emb = _embeddings(g, h, w, conds)
            for links in groups.values():
                q0, u0, v0 = links[0]
                ref = emb[q0, u0][v0].tobytes()
                violations += sum(emb[q, u][v].tobytes() != ref for q, u, v in links[1:])
    assert violations == 0
    assert time.perf_counter() - start < 180

    g = load_kg(TWIN)
    q, u = g.relation_id("r3"), g.node_id("u")
    v1, v2 = g.node_id("v1"), g.node_id("v2")
    h = lift(catalog("f3path"), g)
    differing = 0
    for seed in range(5):
        w = EncoderWeights.init(seed, catalog("f3path"), T=3, L=3)
        ent = entity_forward(g, relation_forward(h, q, w)[-1], u, q, w)[-1]
        differing += ent[v1].tobytes() != ent[v2].tobytes()
    assert differing >= 4


def test_c8_isomorphism_invariance():
    start = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(800))
    for i, g in enumerate(fuzz_graphs(801, 100)):
        g2, iso = random_isomorphic_copy(g, rng)
        it = Interner()
        if i % 2:
            a = motif_link_colors(g, catalog("f3path"), 2, 2, interner=it)
            b = motif_link_colors(g2, catalog("f3path"), 2, 2, interner=it)
        else:
            a = ultra_link_colors(g, 2, 2, interner=it)
            b = ultra_link_colors(g2, 2, 2, interner=it)
        mine = np.concatenate([a.colors(q, u) for q, u in all_conditions(g)])
        mapped = np.concatenate([b.colors(iso.rel_map[q], iso.node_map[u])[list(iso.node_map)]
                                 for q, u in all_conditions(g)])
        assert same_partition(mine, mapped)
        assert np.array_equal(mine, mapped)
    assert time.perf_counter() - start < 60
