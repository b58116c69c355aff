import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgmotif.kg import (Fact, KGError, KnowledgeGraph, NodeRelHomomorphism, ParseError, SizeLimitError,
                        augment_inverses, find_isomorphism, inverse_name, is_isomorphic, parse_kg,
                        random_isomorphic_copy, serialize_kg, validate_homomorphism)
from kgmotif.motifs import H2T, T2H

from conftest import fuzz_graphs, kg


class TestParse:
    def test_single_fact(self):
        g = parse_kg("a\tr\tb\n")
        assert (g.num_nodes, g.num_relations, len(g.facts)) == (2, 1, 1)

    def test_twin_file(self, twin):
        assert set(twin.node_names) == {"u", "x", "y", "v1", "v2"}
        assert twin.num_relations == 3
        assert len(twin.facts) == 7

    def test_duplicates_collapse(self):
        assert len(parse_kg("a\tr\tb\na\tr\tb\n").facts) == 1

    def test_first_appearance_ids(self):
        g = parse_kg("b\ts\ta\na\tr\tc\n")
        assert g.node_names == ("b", "a", "c")
        assert g.relation_names == ("s", "r")

    def test_comments_and_blank_lines(self):
        g = parse_kg("# header\n\na\tr\tb\n   \n# trailing\n")
        assert len(g.facts) == 1

    @pytest.mark.parametrize("bad", ["a\tr\n", "a\tr\tb\tc\n", "a r b\n"])
    def test_wrong_field_count_reports_line(self, bad):
        with pytest.raises(ParseError) as exc:
            parse_kg("x\ty\tz\n# ok\n" + bad)
        assert exc.value.lineno == 3

    def test_unknown_names_raise(self, twin):
        with pytest.raises(KGError):
            twin.node_id("nope")
        with pytest.raises(KGError):
            twin.relation_id("nope")


class TestAugment:
    def test_single_fact(self):
        g = augment_inverses(kg(("u", "r", "v")))
        assert g.num_relations == 2
        assert set(g.named_triples()) == {("u", "r", "v"), ("v", inverse_name("r"), "u")}

    def test_self_loop_gets_no_inverse_fact(self):
        g = augment_inverses(kg(("u", "r", "u")))
        assert g.relation_names == ("r", inverse_name("r"))
        assert g.named_triples() == [("u", "r", "u")]

    def test_empty(self):
        g = augment_inverses(KnowledgeGraph([], [], []))
        assert (g.num_nodes, g.num_relations, len(g.facts)) == (0, 0, 0)

    def test_original_ids_kept(self, twin):
        g = augment_inverses(twin)
        assert g.relation_names[:3] == twin.relation_names
        assert g.node_names == twin.node_names
        assert twin.facts <= g.facts

    def test_twice_never_duplicates(self):
        for g in fuzz_graphs(11, 30):
            once = augment_inverses(g)
            twice = augment_inverses(once)
            keep = set(range(once.num_relations))
            assert {f for f in twice.facts if f.relation in keep} == set(once.facts)


def _bijective(h, g1, g2):
    return (sorted(h.node_map) == list(range(g2.num_nodes))
            and sorted(h.rel_map) == list(range(g2.num_relations)))


class TestIsomorphism:
    def test_self_identity_witness(self, twin):
        h = find_isomorphism(twin, twin)
        assert h.node_map == tuple(range(twin.num_nodes))
        assert h.rel_map == tuple(range(twin.num_relations))

    def test_h2t_vs_t2h(self):
        assert is_isomorphic(H2T.pattern, T2H.pattern)

    def test_path_lengths_differ(self):
        two = kg(("a", "r", "b"), ("b", "s", "c"))
        three = kg(("a", "r", "b"), ("b", "s", "c"), ("c", "t", "d"))
        assert not is_isomorphic(two, three)

    def test_size_guard(self):
        big = kg(*[(f"n{i}", "r", f"n{i + 1}") for i in range(40)])
        with pytest.raises(SizeLimitError):
            is_isomorphic(big, big)

    def test_direction_matters(self):
        assert not is_isomorphic(kg(("a", "r", "b"), ("b", "s", "c")), kg(("a", "r", "b"), ("c", "s", "b")))

    def test_random_copy_witness_is_isomorphism(self):
        rng = np.random.default_rng(3)
        for g in fuzz_graphs(5, 25, max_nodes=8, max_relations=3):
            g2, _ = random_isomorphic_copy(g, rng)
            h = find_isomorphism(g, g2)
            assert h is not None and _bijective(h, g, g2)
            assert validate_homomorphism(h, g, g2)
            assert len(h.image_facts(g)) == len(g2.facts)

    def test_equivalence_relation_on_pool(self):
        rng = np.random.default_rng(8)
        base = fuzz_graphs(9, 6, max_nodes=6, max_relations=2, p=0.3)
        pool = base + [random_isomorphic_copy(g, rng)[0] for g in base for _ in range(2)]
        rel = [[is_isomorphic(a, b) for b in pool] for a in pool]
        n = len(pool)
        for i in range(n):
            assert rel[i][i]
            for j in range(n):
                assert rel[i][j] == rel[j][i]
                for k in range(n):
                    if rel[i][j] and rel[j][k]:
                        assert rel[i][k]


class TestValidateHomomorphism:
    def test_identity(self, twin):
        ident = NodeRelHomomorphism(tuple(range(twin.num_nodes)), tuple(range(twin.num_relations)))
        assert validate_homomorphism(ident, twin, twin)

    def test_motif_into_train_graph(self, bank):
        motif = kg(("u1", "alpha", "u2"), ("u2", "beta", "u3"))
        g = bank
        h = NodeRelHomomorphism(
            (g.node_id("Bloomberg"), g.node_id("Oxford"), g.node_id("Finance")),
            (g.relation_id("provide"), g.relation_id("research")))
        assert validate_homomorphism(h, motif, g)

    def test_missing_triple(self, bank):
        motif = kg(("u1", "alpha", "u2"))
        g = bank
        h = NodeRelHomomorphism((g.node_id("Finance"), g.node_id("Oxford")), (g.relation_id("provide"),))
        assert not validate_homomorphism(h, motif, g)

    def test_partial_map_rejected(self, twin):
        assert not validate_homomorphism(NodeRelHomomorphism((0,), (0,)), twin, twin)


names = st.sampled_from(["a", "b", "c", "d", "e", "f"])
rels = st.sampled_from(["r", "s", "t"])


@given(st.lists(st.tuples(names, rels, names), max_size=12))
def test_serialize_round_trip(triples):
    g = KnowledgeGraph.from_triples(triples)
    back = parse_kg(serialize_kg(g))
    assert back.node_names == g.node_names
    assert back.relation_names == g.relation_names
    assert back.facts == g.facts


@given(st.lists(st.tuples(names, rels, names), min_size=1, max_size=10), st.randoms(use_true_random=False))
def test_permuted_copy_is_isomorphic(triples, rnd):
    g = KnowledgeGraph.from_triples(triples)
    nodes = list(range(g.num_nodes))
    relations = list(range(g.num_relations))
    rnd.shuffle(nodes)
    rnd.shuffle(relations)
    assert is_isomorphic(g, g.permuted(nodes, relations))


def test_fact_array_matches_facts(twin):
    arr = twin.fact_array()
    assert {Fact(*row) for row in arr.tolist()} == set(twin.facts)


def test_in_csr_lists_incoming_edges(twin):
    indptr, rel, head = twin.in_csr()
    for v in range(twin.num_nodes):
        got = set(zip(rel[indptr[v]:indptr[v + 1]].tolist(), head[indptr[v]:indptr[v + 1]].tolist()))
        assert got == {(f.relation, f.head) for f in twin.facts if f.tail == v}


def test_all_pairs_bruteforce_small():
    # isomorphism agrees with exhaustive search over all bijections
    for g1, g2 in itertools.combinations(fuzz_graphs(21, 8, max_nodes=4, max_relations=2, p=0.35), 2):
        brute = False
        if (g1.num_nodes, g1.num_relations) == (g2.num_nodes, g2.num_relations):
            for pi in itertools.permutations(range(g1.num_nodes)):
                for phi in itertools.permutations(range(g1.num_relations)):
                    img = {Fact(phi[f.relation], pi[f.head], pi[f.tail]) for f in g1.facts}
                    if img == set(g2.facts):
                        brute = True
        assert is_isomorphic(g1, g2) == brute


def test_augment_is_idempotent():
    for g in fuzz_graphs(12, 20):
        once = augment_inverses(g)
        twice = augment_inverses(once)
        assert twice.relation_names == once.relation_names
        assert twice.facts == once.facts
