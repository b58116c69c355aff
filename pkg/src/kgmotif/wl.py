"""Colour refinement tests on lifted hypergraphs and knowledge graphs.

Hash is realised by an :class:`Interner`: every distinct canonical key
(previous colour plus the sorted multiset of neighbour signatures) receives the
next positive integer. Colours are therefore exact, but ids depend on the order
keys are first seen; compare colourings through their partitions unless they
share one interner.

Every refinement round here has the same shape. Messages are gathered as
integer rows with numpy and collapsed with their multiplicities. Only the
distinct (target, signature) pairs reach Python, where they are decoded to
canonical tuples and interned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .kg import KnowledgeGraph, LinkQuery
from .lift import RelationalHypergraph, lift, lift_fast_2path
from .motifs import Motif

DEFAULT_SWEEP = 8


class Interner:
    """Injective map from hashable keys to colour ids 1, 2, 3, ..."""

    def __init__(self):
        self._ids: dict[Hashable, int] = {}

    def __call__(self, key: Hashable) -> int:
        got = self._ids.get(key)
        if got is None:
            got = self._ids[key] = len(self._ids) + 1
        return got

    def __len__(self) -> int:
        return len(self._ids)


# partitions

def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff two labellings of the same objects induce the same blocks."""
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    pairs = np.unique(np.stack([a, b], axis=1), axis=0) if len(a) else a.reshape(0, 2)
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))


def refines(fine: np.ndarray, coarse: np.ndarray) -> bool:
    """True iff every block of ``fine`` lies inside a block of ``coarse``."""
    fine, coarse = np.asarray(fine).ravel(), np.asarray(coarse).ravel()
    pairs = np.unique(np.stack([fine, coarse], axis=1), axis=0) if len(fine) else fine.reshape(0, 2)
    return len(pairs) == len(np.unique(fine))


def blocks(labels: Sequence[Hashable]) -> list[list[int]]:
    """Partition blocks as sorted index lists, ordered by first member."""
    groups: dict[Hashable, list[int]] = {}
    for i, c in enumerate(labels):
        groups.setdefault(c, []).append(i)
    return sorted(groups.values())


# the shared refinement step

def _unique_counts(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows of a non-negative int matrix with multiplicities."""
    if rows.shape[0] == 0:
        return rows, np.zeros(0, np.int64)
    radix = [int(rows[:, c].max()) + 1 for c in range(rows.shape[1])]
    total = 1
    for r in radix:
        total *= r
    if total < 2 ** 62:
        key = np.zeros(rows.shape[0], np.int64)
        for c, r in enumerate(radix):
            key = key * r + rows[:, c]
        _, first, counts = np.unique(key, return_index=True, return_counts=True)
        return rows[first], counts
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    return uniq, counts


def _intern_round(interner: Interner, tag: Hashable, prev: np.ndarray,
                  target: np.ndarray, elements: Sequence[Hashable], counts: np.ndarray) -> np.ndarray:
    """New colour per target: Hash(prev, multiset of its elements).

    ``target``/``elements``/``counts`` list each distinct (target, element)
    pair once with its multiplicity. Targets with no pair get the empty
    multiset.
    """
    n = len(prev)
    per_target: list[list] = [[] for _ in range(n)]
    for t, e, c in zip(target.tolist(), elements, counts.tolist()):
        per_target[t].append((e, c))
    prev_l = prev.tolist()
    out = np.empty(n, np.int64)
    for x in range(n):
        out[x] = interner((tag, prev_l[x], tuple(sorted(per_target[x]))))
    return out


# stage one: hypergraph colours conditioned on a query relation

@dataclass
class RelColoring:
    """First-stage colours ``history[t][i, r]`` for query ``queries[i]``."""

    relation_names: tuple[str, ...]
    queries: tuple[int, ...]
    history: list[np.ndarray]

    @property
    def t_max(self) -> int:
        return len(self.history) - 1

    def colors(self, q: int, t: int | None = None) -> np.ndarray:
        return self.history[self.t_max if t is None else t][self.queries.index(q)]

    def stable_at(self) -> int | None:
        """First t whose partition (over all queries jointly) equals t+1's."""
        for t in range(self.t_max):
            if same_partition(self.history[t], self.history[t + 1]):
                return t
        return None


def _hcwl_round(h: RelationalHypergraph, prev: np.ndarray, interner: Interner, t: int) -> np.ndarray:
    n_q, m = prev.shape
    uc, dense = np.unique(prev, return_inverse=True)
    dense = dense.reshape(n_q, m)
    flat_prev = prev.ravel()
    targets, elements, counts = [], [], []
    for p in h.edge_types:
        E = h.edges[p.name]
        if len(E) == 0:
            continue
        k = p.arity
        for i in range(k):
            others = [j for j in range(k) if j != i]
            for qi in range(n_q):
                rows = np.empty((len(E), k), np.int64)
                rows[:, 0] = qi * m + E[:, i]
                for c, j in enumerate(others, start=1):
                    rows[:, c] = dense[qi, E[:, j]]
                uniq, cnt = _unique_counts(rows)
                targets.append(uniq[:, 0])
                counts.append(cnt)
                # signature: motif, position, and the other positions' colours
                # in position order (equivalently the set of (colour, j) pairs)
                glob = uc[uniq[:, 1:]].tolist()
                elements.extend((p.name, i + 1, tuple(g)) for g in glob)
    if targets:
        target = np.concatenate(targets)
        count = np.concatenate(counts)
    else:
        target = count = np.zeros(0, np.int64)
    return _intern_round(interner, ("hcwl", t + 1), flat_prev, target, elements, count).reshape(n_q, m)


def hcwl_colors(h: RelationalHypergraph, queries: int | Iterable[int], t_max: int,
                interner: Interner | None = None) -> RelColoring:
    """First-stage colours on a lifted hypergraph.

    Initial colour is 1 for the query relation and 0 elsewhere; each round
    hashes the previous colour with the multiset, over hyperedges e and
    positions i holding r, of (motif of e, i, colours at e's other positions).
    """
    qs = (queries,) if isinstance(queries, (int, np.integer)) else tuple(queries)
    m = h.num_nodes
    for q in qs:
        if not 0 <= q < m:
            raise ValueError(f"query relation {q} is not a node of the hypergraph")
    interner = Interner() if interner is None else interner
    cur = np.zeros((len(qs), m), np.int64)
    for i, q in enumerate(qs):
        cur[i, q] = 1
    history = [cur]
    for t in range(t_max):
        cur = _hcwl_round(h, cur, interner, t)
        history.append(cur)
    return RelColoring(h.node_names, tuple(int(q) for q in qs), history)


# stage two and rawl2: relational refinement over incoming edges

@dataclass
class LinkColoring:
    """Link colours ``history[l][c, v]`` of q(u, v) for condition c = (q, u)."""

    conditions: tuple[tuple[int, int], ...]
    history: list[np.ndarray]
    t: int | None = None
    node_names: tuple[str, ...] = field(default=(), repr=False)

    @property
    def l_max(self) -> int:
        return len(self.history) - 1

    def _row(self, q: int, u: int) -> int:
        try:
            return self.conditions.index((q, u))
        except ValueError:
            raise KeyError(f"condition (q={q}, u={u}) was not computed") from None

    def color(self, link: LinkQuery, l: int | None = None) -> int:
        return int(self.history[self.l_max if l is None else l][self._row(link.relation, link.source), link.target])

    def colors(self, q: int, u: int, l: int | None = None) -> np.ndarray:
        return self.history[self.l_max if l is None else l][self._row(q, u)]

    def all_link_colors(self, l: int | None = None) -> np.ndarray:
        """Flattened colours of every computed link, in condition-major order."""
        return self.history[self.l_max if l is None else l].ravel()

    def stable_at(self) -> int | None:
        for l in range(self.l_max):
            if same_partition(self.history[l], self.history[l + 1]):
                return l
        return None


def _relational_rounds(g: KnowledgeGraph, init: np.ndarray, rel_labels: np.ndarray,
                       l_max: int, interner: Interner, tag: str) -> list[np.ndarray]:
    """Iterate c(v) <- Hash(c(v), {{(c(w), label_c(r)) : r(w, v)}}) per condition row.

    ``init`` is (n_cond, n); ``rel_labels`` is (n_cond, m) of hashable labels
    (ints for colours, strings for relation names).
    """
    n_c, n = init.shape
    arr = g.fact_array()
    rel, head, tail = arr[:, 0], arr[:, 1], arr[:, 2]
    lab_index: dict = {}
    lab_dense = np.empty(rel_labels.shape, np.int64)
    for idx, lab in np.ndenumerate(rel_labels):
        lab_dense[idx] = lab_index.setdefault(lab, len(lab_index))
    lab_list = list(lab_index)
    history = [init]
    cur = init
    for l in range(l_max):
        uc, dense = np.unique(cur, return_inverse=True)
        dense = dense.reshape(n_c, n)
        if len(arr):
            rows = np.empty((n_c * len(arr), 3), np.int64)
            cond = np.repeat(np.arange(n_c, dtype=np.int64), len(arr))
            rows[:, 0] = cond * n + np.tile(tail, n_c)
            rows[:, 1] = dense[cond, np.tile(head, n_c)]
            rows[:, 2] = lab_dense[cond, np.tile(rel, n_c)]
            uniq, cnt = _unique_counts(rows)
            cols = uc[uniq[:, 1]].tolist()
            elements = [(c, lab_list[x]) for c, x in zip(cols, uniq[:, 2].tolist())]
            target = uniq[:, 0]
        else:
            target = cnt = np.zeros(0, np.int64)
            elements = []
        cur = _intern_round(interner, (tag, l + 1), cur.ravel(), target, elements, cnt).reshape(n_c, n)
        history.append(cur)
    return history


def second_stage(g: KnowledgeGraph, rel_colors: RelColoring, conditions: Sequence[tuple[int, int]],
                 l_max: int, t: int | None = None, interner: Interner | None = None) -> LinkColoring:
    """col^(l)(q(u, v)): start at 1{v=u} * rc(q, q), aggregate over facts r(w, v)
    the pairs (col(q(u, w)), rc(q, r)) where rc are the stage-one colours at t."""
    interner = Interner() if interner is None else interner
    t = rel_colors.t_max if t is None else t
    conditions = tuple((int(q), int(u)) for q, u in conditions)
    n = g.num_nodes
    init = np.zeros((len(conditions), n), np.int64)
    labels = np.zeros((len(conditions), g.num_relations), np.int64)
    for c, (q, u) in enumerate(conditions):
        rc = rel_colors.colors(q, t)
        labels[c] = rc
        init[c, u] = rc[q]
    history = _relational_rounds(g, init, labels, l_max, interner, "col")
    return LinkColoring(conditions, history, t, g.node_names)


def all_conditions(g: KnowledgeGraph, queries: Iterable[int] | None = None) -> list[tuple[int, int]]:
    qs = range(g.num_relations) if queries is None else queries
    return [(q, u) for q in qs for u in range(g.num_nodes)]


def motif_link_colors(g: KnowledgeGraph, motifs: Iterable[Motif] | RelationalHypergraph, t: int, l: int,
                      conditions: Sequence[tuple[int, int]] | None = None,
                      interner: Interner | None = None) -> LinkColoring:
    """Two-stage link colours for the motif set (or a prebuilt lift).

    Without ``conditions`` every (q, u) pair is coloured.
    """
    h = motifs if isinstance(motifs, RelationalHypergraph) else lift(motifs, g)
    conditions = all_conditions(g) if conditions is None else list(conditions)
    interner = Interner() if interner is None else interner
    qs = sorted({q for q, _ in conditions})
    rc = hcwl_colors(h, qs, t, interner)
    return second_stage(g, rc, conditions, l, t, interner)


def rawl2_history(g: KnowledgeGraph, sources: Sequence[int], l_max: int,
                  init_colors: Sequence[int] | None = None,
                  interner: Interner | None = None) -> list[np.ndarray]:
    """rawl2 from several sources at once: row i is conditioned on sources[i].

    Initial colour is ``init_colors[i]`` (default 1) at the source, 0 elsewhere;
    messages are (colour of w, relation name) over facts r(w, v).
    """
    interner = Interner() if interner is None else interner
    n = g.num_nodes
    init = np.zeros((len(sources), n), np.int64)
    for i, u in enumerate(sources):
        init[i, u] = 1 if init_colors is None else init_colors[i]
    names = np.array(g.relation_names, dtype=object)
    labels = np.tile(names, (len(sources), 1)) if len(sources) else np.zeros((0, g.num_relations), object)
    return _relational_rounds(g, init, labels, l_max, interner, "rawl2")


def rawl2_colors(g: KnowledgeGraph, source: int, l: int, q: int | None = None,
                 interner: Interner | None = None) -> np.ndarray:
    """rawl2 colours of every node after ``l`` rounds, conditioned on ``source``.

    With a query relation ``q`` the source starts from a colour naming q, so
    runs for different queries are kept apart in a shared interner.
    """
    interner = Interner() if interner is None else interner
    init = None if q is None else [interner(("rawl2-query", g.relation_names[q]))]
    return rawl2_history(g, [source], l, init, interner)[-1][0]


def hypergraph_as_kg(h: RelationalHypergraph) -> KnowledgeGraph:
    """View a lift with only binary motifs as a KG: relations of the original
    graph become nodes and motif names become relation types."""
    facts = []
    names = h.motif_names
    for ri, p in enumerate(h.edge_types):
        if p.arity != 2:
            raise ValueError(f"motif {p.name} is not binary")
        facts.extend((ri, int(a), int(b)) for a, b in h.edges[p.name])
    return KnowledgeGraph(h.node_names, names, facts)


def ultra_relation_colors(g: KnowledgeGraph, queries: Iterable[int], t_max: int,
                          interner: Interner | None = None) -> RelColoring:
    """rcol: rawl2 on the four-motif lift viewed as a KG, sourced at q."""
    qs = tuple(int(q) for q in queries)
    rg = hypergraph_as_kg(lift_fast_2path(g))
    hist = rawl2_history(rg, qs, t_max, interner=Interner() if interner is None else interner)
    return RelColoring(g.relation_names, qs, hist)


def ultra_link_colors(g: KnowledgeGraph, t: int, l: int,
                      conditions: Sequence[tuple[int, int]] | None = None,
                      interner: Interner | None = None) -> LinkColoring:
    """ecol: the second stage driven by rcol instead of hcwl."""
    conditions = all_conditions(g) if conditions is None else list(conditions)
    interner = Interner() if interner is None else interner
    rc = ultra_relation_colors(g, sorted({q for q, _ in conditions}), t, interner)
    return second_stage(g, rc, conditions, l, t, interner)


# separation

def separates(c: LinkColoring, link1: LinkQuery, link2: LinkQuery, l: int | None = None) -> bool:
    """Different final colours. Both links must be conditions of one coloring
    (one shared interner), otherwise ids are not comparable."""
    return c.color(link1, l) != c.color(link2, l)


@dataclass
class SeparationResult:
    link1: str
    link2: str
    separated: bool
    first_at: tuple[int, int] | None
    grid: tuple[int, int]

    def to_dict(self) -> dict:
        return {"link1": self.link1, "link2": self.link2, "separated": self.separated,
                "first_at": list(self.first_at) if self.first_at else None}


def _link_label(g: KnowledgeGraph, link: LinkQuery) -> str:
    return f"{g.relation_names[link.relation]}({g.node_names[link.source]},{g.node_names[link.target]})"


def separation_sweep(g: KnowledgeGraph, link1: LinkQuery, link2: LinkQuery,
                     motifs: Iterable[Motif] | RelationalHypergraph | None = None, *,
                     ultra: bool = False, t_max: int = DEFAULT_SWEEP,
                     l_max: int = DEFAULT_SWEEP) -> SeparationResult:
    """Lexicographically smallest (t, l) on the grid at which the two links
    get different colours, or None. ``ultra=True`` uses the rcol/ecol test."""
    conditions = list(dict.fromkeys([(link1.relation, link1.source), (link2.relation, link2.source)]))
    qs = sorted({q for q, _ in conditions})
    interner = Interner()
    if ultra:
        rc = ultra_relation_colors(g, qs, t_max, interner)
    else:
        h = motifs if isinstance(motifs, RelationalHypergraph) else lift(motifs or [], g)
        rc = hcwl_colors(h, qs, t_max, interner)
    first = None
    for t in range(t_max + 1):
        lc = second_stage(g, rc, conditions, l_max, t, interner)
        for l in range(l_max + 1):
            if separates(lc, link1, link2, l):
                first = (t, l)
                break
        if first:
            break
    return SeparationResult(_link_label(g, link1), _link_label(g, link2), first is not None,
                            first, (t_max, l_max))


def separated_at(g: KnowledgeGraph, link1: LinkQuery, link2: LinkQuery,
                 motifs: Iterable[Motif] | RelationalHypergraph | None = None, *,
                 ultra: bool = False, t: int = 3, l: int = 3) -> bool:
    conditions = list(dict.fromkeys([(link1.relation, link1.source), (link2.relation, link2.source)]))
    if ultra:
        c = ultra_link_colors(g, t, l, conditions)
    else:
        h = motifs if isinstance(motifs, RelationalHypergraph) else lift(motifs or [], g)
        c = motif_link_colors(g, h, t, l, conditions)
    return separates(c, link1, link2)


# dumps

def dump_relation_colors(rc: RelColoring, q: int, t: int | None = None) -> dict:
    t = rc.t_max if t is None else t
    cols = rc.colors(q, t)
    return {"condition": {"q": rc.relation_names[q]}, "t": t,
            "colors": [[name, int(c)] for name, c in zip(rc.relation_names, cols)]}


def dump_link_colors(lc: LinkColoring, g: KnowledgeGraph, q: int, u: int, l: int | None = None) -> dict:
    l = lc.l_max if l is None else l
    cols = lc.colors(q, u, l)
    return {"condition": {"q": g.relation_names[q], "u": g.node_names[u]}, "t": lc.t, "l": l,
            "colors": [[name, int(c)] for name, c in zip(g.node_names, cols)]}


def to_json(obj: dict, **kwargs) -> str:
    return json.dumps(obj, **kwargs)
