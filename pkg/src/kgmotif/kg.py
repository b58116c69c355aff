"""Knowledge graph data model, triple-file I/O, inverse augmentation and isomorphism."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

DEFAULT_ISO_MAX_NODES = 32
INVERSE_SUFFIX = "^-"


class KGError(ValueError):
    """Base error for malformed graphs and files."""


class ParseError(KGError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class SizeLimitError(KGError):
    """Raised when an exact search would exceed its configured size cap."""


class Fact(NamedTuple):
    relation: int
    head: int
    tail: int


class LinkQuery(NamedTuple):
    """A potential link q(u, v); it need not be a fact."""

    relation: int
    source: int
    target: int


class KnowledgeGraph:
    """Immutable directed, relation-labelled graph over dense integer ids.

    Nodes and relations may exist without incident facts (e.g. a query
    relation that is never observed).
    """

    __slots__ = (
        "node_names", "relation_names", "facts", "_node_index", "_rel_index",
        "_out", "_in", "_by_rel", "_array", "_in_csr", "_out_csr",
    )

    def __init__(
        self,
        node_names: Sequence[str],
        relation_names: Sequence[str],
        facts: Iterable[tuple[int, int, int]],
    ):
        self.node_names: tuple[str, ...] = tuple(node_names)
        self.relation_names: tuple[str, ...] = tuple(relation_names)
        self._node_index = {n: i for i, n in enumerate(self.node_names)}
        self._rel_index = {r: i for i, r in enumerate(self.relation_names)}
        if len(self._node_index) != len(self.node_names):
            raise KGError("duplicate node name")
        if len(self._rel_index) != len(self.relation_names):
            raise KGError("duplicate relation name")
        n, m = len(self.node_names), len(self.relation_names)
        fs = set()
        for r, h, t in facts:
            if not (0 <= r < m and 0 <= h < n and 0 <= t < n):
                raise KGError(f"fact ({r}, {h}, {t}) references unknown id")
            fs.add(Fact(int(r), int(h), int(t)))
        self.facts: frozenset[Fact] = frozenset(fs)

        out: dict[tuple[int, int], list[int]] = defaultdict(list)
        inc: dict[tuple[int, int], list[int]] = defaultdict(list)
        by_rel: dict[int, list[Fact]] = defaultdict(list)
        for f in sorted(self.facts):
            out[f.relation, f.head].append(f.tail)
            inc[f.relation, f.tail].append(f.head)
            by_rel[f.relation].append(f)
        self._out = {k: tuple(v) for k, v in out.items()}
        self._in = {k: tuple(v) for k, v in inc.items()}
        self._by_rel = {k: tuple(v) for k, v in by_rel.items()}
        self._array = None
        self._in_csr = None
        self._out_csr = None

    # construction helpers

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[tuple[str, str, str]],
        relations: Iterable[str] = (),
        nodes: Iterable[str] = (),
    ) -> KnowledgeGraph:
        """Build from (head, relation, tail) name triples.

        Ids follow first appearance; `relations`/`nodes` are registered first,
        which is how fact-free relations and isolated nodes are declared.
        """
        node_ids: dict[str, int] = {}
        rel_ids: dict[str, int] = {}
        for r in relations:
            rel_ids.setdefault(r, len(rel_ids))
        for v in nodes:
            node_ids.setdefault(v, len(node_ids))
        facts = []
        for h, r, t in triples:
            hi = node_ids.setdefault(h, len(node_ids))
            ri = rel_ids.setdefault(r, len(rel_ids))
            ti = node_ids.setdefault(t, len(node_ids))
            facts.append((ri, hi, ti))
        return cls(list(node_ids), list(rel_ids), facts)

    # basic accessors

    @property
    def num_nodes(self) -> int:
        return len(self.node_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def __len__(self) -> int:
        return len(self.facts)

    def __repr__(self) -> str:
        return (f"KnowledgeGraph(nodes={self.num_nodes}, relations={self.num_relations}, "
                f"facts={len(self.facts)})")

    def node_id(self, name: str) -> int:
        try:
            return self._node_index[name]
        except KeyError:
            raise KGError(f"unknown node {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._rel_index[name]
        except KeyError:
            raise KGError(f"unknown relation {name!r}") from None

    def has_node(self, name: str) -> bool:
        return name in self._node_index

    def has_relation(self, name: str) -> bool:
        return name in self._rel_index

    def has_fact(self, relation: int, head: int, tail: int) -> bool:
        return Fact(relation, head, tail) in self.facts

    def tails(self, relation: int, head: int) -> tuple[int, ...]:
        return self._out.get((relation, head), ())

    def heads(self, relation: int, tail: int) -> tuple[int, ...]:
        """N_r(v): the heads w with r(w, v)."""
        return self._in.get((relation, tail), ())

    neighbors = heads

    def facts_of(self, relation: int) -> tuple[Fact, ...]:
        return self._by_rel.get(relation, ())

    def used_relations(self) -> list[int]:
        return sorted(self._by_rel)

    def link(self, relation: str, source: str, target: str) -> LinkQuery:
        return LinkQuery(self.relation_id(relation), self.node_id(source), self.node_id(target))

    def link_name(self, link: LinkQuery) -> str:
        return (f"{self.relation_names[link.relation]}({self.node_names[link.source]},"
                f"{self.node_names[link.target]})")

    # array views used by the vectorised kernels

    def fact_array(self) -> np.ndarray:
        """Facts as a sorted (n_facts, 3) int64 array of (relation, head, tail)."""
        if self._array is None:
            arr = np.array(sorted(self.facts), dtype=np.int64).reshape(-1, 3)
            arr.setflags(write=False)
            self._array = arr
        return self._array

    def in_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Incoming adjacency grouped by tail: (indptr, relation, head)."""
        if self._in_csr is None:
            self._in_csr = _csr(self.fact_array(), key_col=2, n=self.num_nodes, cols=(0, 1))
        return self._in_csr

    def out_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Outgoing adjacency grouped by head: (indptr, relation, tail)."""
        if self._out_csr is None:
            self._out_csr = _csr(self.fact_array(), key_col=1, n=self.num_nodes, cols=(0, 2))
        return self._out_csr

    # derived graphs

    def named_triples(self) -> list[tuple[str, str, str]]:
        return [(self.node_names[f.head], self.relation_names[f.relation], self.node_names[f.tail])
                for f in sorted(self.facts)]

    def permuted(self, node_perm: Sequence[int], rel_perm: Sequence[int]) -> KnowledgeGraph:
        """Copy with node i renamed to id node_perm[i] and relation r to rel_perm[r]."""
        node_names = [""] * self.num_nodes
        for i, j in enumerate(node_perm):
            node_names[j] = self.node_names[i]
        rel_names = [""] * self.num_relations
        for i, j in enumerate(rel_perm):
            rel_names[j] = self.relation_names[i]
        facts = [(rel_perm[f.relation], node_perm[f.head], node_perm[f.tail]) for f in self.facts]
        return KnowledgeGraph(node_names, rel_names, facts)

    def subgraph(self, facts: Iterable[Fact], nodes: Iterable[int] | None = None) -> KnowledgeGraph:
        """Graph over the given facts (and extra nodes), keeping every relation and
        only the touched nodes, in original id order."""
        facts = list(facts)
        keep = set(nodes or ())
        for f in facts:
            keep.update((f.head, f.tail))
        order = sorted(keep)
        remap = {v: i for i, v in enumerate(order)}
        return KnowledgeGraph(
            [self.node_names[v] for v in order],
            self.relation_names,
            [(f.relation, remap[f.head], remap[f.tail]) for f in facts],
        )


def _csr(arr: np.ndarray, key_col: int, n: int, cols: tuple[int, int]):
    order = np.lexsort((arr[:, cols[1]], arr[:, cols[0]], arr[:, key_col])) if len(arr) else np.zeros(0, np.int64)
    keys = arr[order, key_col]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, keys + 1, 1)
    np.cumsum(indptr, out=indptr)
    a = np.ascontiguousarray(arr[order, cols[0]])
    b = np.ascontiguousarray(arr[order, cols[1]])
    return indptr, a, b


@dataclass(frozen=True)
class NodeRelHomomorphism:
    """Node map pi and relation map phi, both total on the source graph."""

    node_map: tuple[int, ...]
    rel_map: tuple[int, ...]

    def image_facts(self, src: KnowledgeGraph) -> set[Fact]:
        return {Fact(self.rel_map[f.relation], self.node_map[f.head], self.node_map[f.tail])
                for f in src.facts}

    def image(self, src: KnowledgeGraph, dst: KnowledgeGraph) -> KnowledgeGraph:
        """h(src) as a graph over dst names: nodes pi(V), relations phi(R), facts h(E)."""
        nodes = sorted(set(self.node_map))
        rels = sorted(set(self.rel_map))
        nidx = {v: i for i, v in enumerate(nodes)}
        ridx = {r: i for i, r in enumerate(rels)}
        facts = [(ridx[f.relation], nidx[f.head], nidx[f.tail]) for f in self.image_facts(src)]
        return KnowledgeGraph([dst.node_names[v] for v in nodes],
                              [dst.relation_names[r] for r in rels], facts)

    def compose(self, after: NodeRelHomomorphism) -> NodeRelHomomorphism:
        """`after` applied to the result of self."""
        return NodeRelHomomorphism(tuple(after.node_map[v] for v in self.node_map),
                                   tuple(after.rel_map[r] for r in self.rel_map))


def validate_homomorphism(h: NodeRelHomomorphism, src: KnowledgeGraph, dst: KnowledgeGraph) -> bool:
    if len(h.node_map) != src.num_nodes or len(h.rel_map) != src.num_relations:
        return False
    if any(not 0 <= v < dst.num_nodes for v in h.node_map):
        return False
    if any(not 0 <= r < dst.num_relations for r in h.rel_map):
        return False
    return all(dst.has_fact(h.rel_map[f.relation], h.node_map[f.head], h.node_map[f.tail])
               for f in src.facts)


# triple files

def parse_kg(text: str, relations: Iterable[str] = ()) -> KnowledgeGraph:
    """Parse tab-separated ``head<TAB>relation<TAB>tail`` lines.

    Blank lines and lines starting with '#' are skipped; duplicates collapse.
    """
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
        if any(p == "" for p in parts):
            raise ParseError(lineno, "empty field")
        triples.append((parts[0], parts[1], parts[2]))
    return KnowledgeGraph.from_triples(triples, relations=relations)


def load_kg(path: str | Path, relations: Iterable[str] = ()) -> KnowledgeGraph:
    return parse_kg(Path(path).read_text(encoding="utf-8"), relations=relations)


def serialize_kg(g: KnowledgeGraph) -> str:
    """Inverse of parse_kg for graphs whose nodes and relations all occur in facts.

    Facts are written in first-appearance order of ids so re-parsing rebuilds
    identical name tables.
    """
    for name in g.node_names + g.relation_names:
        if "\t" in name or "\n" in name:
            raise KGError(f"name {name!r} contains a tab or newline")
    lines = [f"{g.node_names[f.head]}\t{g.relation_names[f.relation]}\t{g.node_names[f.tail]}"
             for f in _first_appearance_order(g)]
    return "\n".join(lines) + ("\n" if lines else "")


def _first_appearance_order(g: KnowledgeGraph) -> list[Fact]:
    # greedy: emit a fact only if every id it introduces is the next expected one
    remaining = sorted(g.facts, key=lambda f: (max(f.head, f.tail), f.relation, f.head, f.tail))
    out: list[Fact] = []
    next_node = next_rel = 0
    while remaining:
        for i, f in enumerate(remaining):
            nn, nr, ok = next_node, next_rel, True
            for v in (f.head, f.tail):
                if v == nn:
                    nn += 1
                elif v > nn:
                    ok = False
            if f.relation == nr:
                nr += 1
            elif f.relation > nr:
                ok = False
            if ok:
                break
        else:
            # ids not in first-appearance order (e.g. isolated nodes); write the rest as is
            out.extend(remaining)
            break
        out.append(remaining.pop(i))
        next_node, next_rel = nn, nr
    return out


def save_kg(g: KnowledgeGraph, path: str | Path) -> None:
    Path(path).write_text(serialize_kg(g), encoding="utf-8")


# inverse augmentation

def inverse_name(name: str) -> str:
    return name + INVERSE_SUFFIX


def augment_inverses(g: KnowledgeGraph) -> KnowledgeGraph:
    """G+ = (V, E u E-, R + R-). Self-loops get no inverse fact.

    Fresh inverse relations get ids m, m+1, ... in the order of their base
    relation. A relation that already has its partner in ``g`` (``r`` next to
    ``r^-``) reuses it, so augmenting an augmented graph changes nothing.
    """
    names = list(g.relation_names)
    partner: dict[int, int] = {}
    for r, name in enumerate(g.relation_names):
        if name.endswith(INVERSE_SUFFIX) and g.has_relation(name[:-len(INVERSE_SUFFIX)]):
            partner[r] = g.relation_id(name[:-len(INVERSE_SUFFIX)])
        elif g.has_relation(inverse_name(name)):
            partner[r] = g.relation_id(inverse_name(name))
        else:
            partner[r] = len(names)
            names.append(inverse_name(name))
    facts = list(g.facts)
    facts += [(partner[f.relation], f.tail, f.head) for f in g.facts if f.head != f.tail]
    return KnowledgeGraph(g.node_names, names, facts)


# isomorphism

def _node_profile(g: KnowledgeGraph) -> list[tuple]:
    rel_size = Counter(f.relation for f in g.facts)
    prof: list[list] = [[0, 0, 0, []] for _ in range(g.num_nodes)]
    for f in g.facts:
        if f.head == f.tail:
            prof[f.head][2] += 1
            prof[f.head][3].append((rel_size[f.relation], 2))
        else:
            prof[f.head][1] += 1
            prof[f.tail][0] += 1
            prof[f.head][3].append((rel_size[f.relation], 1))
            prof[f.tail][3].append((rel_size[f.relation], 0))
    return [(a, b, c, tuple(sorted(d))) for a, b, c, d in prof]


def _rel_profile(g: KnowledgeGraph) -> list[tuple]:
    out = []
    for r in range(g.num_relations):
        fs = g.facts_of(r)
        out.append((len(fs), sum(f.head == f.tail for f in fs),
                    len({f.head for f in fs}), len({f.tail for f in fs})))
    return out


def name_preserving_map(src: KnowledgeGraph, dst: KnowledgeGraph) -> NodeRelHomomorphism | None:
    """The maps sending every node and relation to the same name in ``dst``, if all names exist."""
    if not all(dst.has_node(n) for n in src.node_names):
        return None
    if not all(dst.has_relation(r) for r in src.relation_names):
        return None
    return NodeRelHomomorphism(tuple(dst.node_id(n) for n in src.node_names),
                               tuple(dst.relation_id(r) for r in src.relation_names))


def find_isomorphism(
    g1: KnowledgeGraph, g2: KnowledgeGraph, max_nodes: int = DEFAULT_ISO_MAX_NODES
) -> NodeRelHomomorphism | None:
    """Bijections (pi, phi) with r(u,v) in g1 iff phi(r)(pi u, pi v) in g2, or None."""
    if max(g1.num_nodes, g2.num_nodes) > max_nodes:
        raise SizeLimitError(f"isomorphism search capped at {max_nodes} nodes")
    if (g1.num_nodes, g1.num_relations, len(g1.facts)) != (g2.num_nodes, g2.num_relations, len(g2.facts)):
        return None
    ident = name_preserving_map(g1, g2)
    if ident is not None and validate_homomorphism(ident, g1, g2):
        # facts map injectively onto an equally large set: an isomorphism
        return ident
    np1, np2 = _node_profile(g1), _node_profile(g2)
    rp1, rp2 = _rel_profile(g1), _rel_profile(g2)
    if sorted(np1) != sorted(np2) or sorted(rp1) != sorted(rp2):
        return None

    from .homsearch import HomSearch

    node_ok = {v: {w for w in range(g2.num_nodes) if np2[w] == np1[v]} for v in range(g1.num_nodes)}
    rel_ok = {r: {s for s in range(g2.num_relations) if rp2[s] == rp1[r]} for r in range(g1.num_relations)}
    search = HomSearch(g1, g2, injective_nodes=True, injective_rels=True,
                       node_candidates=node_ok, rel_candidates=rel_ok, total=True)
    for h in search:
        # injective on facts with |E1| = |E2| and bijective maps: an isomorphism
        return h
    return None


def is_isomorphic(g1: KnowledgeGraph, g2: KnowledgeGraph, max_nodes: int = DEFAULT_ISO_MAX_NODES) -> bool:
    return find_isomorphism(g1, g2, max_nodes=max_nodes) is not None


# random graphs for fuzzing

def random_kg(
    rng: np.random.Generator,
    max_nodes: int = 12,
    max_relations: int = 5,
    p: float = 0.15,
    min_nodes: int = 2,
) -> KnowledgeGraph:
    """Erdos-Renyi per relation: every ordered pair (u, v), self-loops included,
    carries relation r independently with probability p."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    m = int(rng.integers(1, max_relations + 1))
    mask = rng.random((m, n, n)) < p
    r, h, t = np.nonzero(mask)
    return KnowledgeGraph([f"e{i}" for i in range(n)], [f"r{i}" for i in range(m)],
                          zip(r.tolist(), h.tolist(), t.tolist()))


def random_isomorphic_copy(g: KnowledgeGraph, rng: np.random.Generator) -> tuple[KnowledgeGraph, NodeRelHomomorphism]:
    node_perm = rng.permutation(g.num_nodes).tolist()
    rel_perm = rng.permutation(g.num_relations).tolist()
    return g.permuted(node_perm, rel_perm), NodeRelHomomorphism(tuple(node_perm), tuple(rel_perm))


def iter_links(g: KnowledgeGraph) -> Iterator[LinkQuery]:
    for q in range(g.num_relations):
        for u in range(g.num_nodes):
            for v in range(g.num_nodes):
                yield LinkQuery(q, u, v)
