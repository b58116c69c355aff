import itertools
import json

import pytest

from kgmotif.kg import is_isomorphic
from kgmotif.motifs import (CatalogError, Motif, MotifError, H2T, LOOP, PARA, catalog, catalog_names,
                            load_motifs, path_motif, resolve_motifs, star_motif)


def test_ultra4():
    ms = catalog("ultra4")
    assert [p.name for p in ms] == ["h2h", "h2t", "t2h", "t2t"]
    assert all(p.arity == 2 for p in ms)


def test_f3path_extends_f2path():
    f2 = {p.name for p in catalog("f2path")}
    f3 = {p.name for p in catalog("f3path")}
    assert f2 == {"h2t", "h2h", "t2t"}
    assert f3 == f2 | {"tfh", "tft", "hfh", "hft"}


def test_empty():
    assert catalog("empty") == []


@pytest.mark.parametrize("m", range(2, 9))
def test_star_sizes(m):
    stars = catalog(f"f{m}star")
    assert sorted(p.arity for p in stars) == list(range(2, m + 1))


def test_para_and_loop():
    assert PARA.pattern.num_nodes == 2 and PARA.arity == 2
    assert LOOP.pattern.num_nodes == 1 and LOOP.arity == 1


def test_unknown_name_lists_valid_names():
    with pytest.raises(CatalogError) as exc:
        catalog("f9path")
    for name in ("ultra4", "f3path", "f8star"):
        assert name in str(exc.value)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_path_family_is_orientations_up_to_isomorphism(n):
    # oracle: every orientation of every length is isomorphic to exactly one member
    family = catalog(f"f{n}path")
    for a, b in itertools.combinations(family, 2):
        assert not is_isomorphic(a.pattern, b.pattern)
    for k in range(2, n + 1):
        for d in itertools.product((True, False), repeat=k):
            p = path_motif(d)
            assert sum(is_isomorphic(p.pattern, q.pattern) for q in family) == 1


def test_family_sizes():
    assert [len(catalog(f"f{n}path")) for n in (2, 3, 4)] == [3, 7, 17]


def test_star_shape():
    s = star_motif(3)
    g = s.pattern
    centre = g.node_id("u")
    assert all(f.tail == centre for f in g.facts)
    assert len({f.head for f in g.facts}) == 3


class TestValidation:
    def test_disconnected(self):
        with pytest.raises(MotifError):
            Motif.from_facts("bad", [("a", "x", "y"), ("b", "z", "w")])

    def test_relation_variable_reused(self):
        with pytest.raises(MotifError):
            Motif.from_facts("bad", [("a", "x", "y"), ("a", "y", "z")])

    def test_order_mismatch(self):
        with pytest.raises(MotifError):
            Motif.from_facts("bad", [("a", "x", "y"), ("b", "y", "z")], order=["a", "c"])

    def test_two_motifs_one_name(self):
        with pytest.raises(MotifError):
            resolve_motifs_from([H2T, PARA.renamed("h2t")])


def resolve_motifs_from(ms):
    from kgmotif.motifs import canonical_motifs
    return canonical_motifs(ms)


def test_json_round_trip(tmp_path):
    ms = catalog("f3path") + [PARA, LOOP]
    path = tmp_path / "m.json"
    path.write_text(json.dumps([p.to_dict() for p in ms]))
    back = load_motifs(path)
    assert [p.to_dict() for p in back] == [p.to_dict() for p in sorted(ms, key=lambda p: p.name)]


def test_resolve_comma_list(tmp_path):
    path = tmp_path / "extra.json"
    path.write_text(json.dumps(Motif.from_facts("mine", [("a", "x", "y"), ("b", "x", "x")]).to_dict()))
    names = [p.name for p in resolve_motifs(f"h2t,para,{path}")]
    assert names == ["h2t", "mine", "para"]


def test_catalog_names_all_resolve():
    for name in catalog_names():
        catalog(name)
