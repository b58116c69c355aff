"""Relation-preserving homomorphisms, rp-cores, core-onto checks and the
refinement necessary-condition report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .homsearch import HomSearch, exists
from .kg import (KGError, KnowledgeGraph, NodeRelHomomorphism, SizeLimitError, is_isomorphic,
                 name_preserving_map, validate_homomorphism)
from .motifs import Motif, canonical_motifs

MAX_NODES = 16
MAX_RELATIONS = 12


def _check_size(g: KnowledgeGraph, max_nodes: int, max_relations: int, what: str = "graph") -> None:
    if g.num_nodes > max_nodes or g.num_relations > max_relations:
        raise SizeLimitError(
            f"{what} has {g.num_nodes} nodes / {g.num_relations} relations; "
            f"cap is {max_nodes} / {max_relations}")


def find_rp_homomorphism(src: KnowledgeGraph, dst: KnowledgeGraph) -> NodeRelHomomorphism | None:
    """A homomorphism whose relation map permutes src's relations.

    Relations are aligned by name: ``dst`` must contain every relation name
    of ``src``, and each is sent to some relation of ``dst`` carrying one of
    src's names, bijectively.
    """
    missing = [r for r in src.relation_names if not dst.has_relation(r)]
    if missing:
        raise KGError(f"relations {missing} of the source graph are missing from the target")
    ident = name_preserving_map(src, dst)
    if ident is not None and validate_homomorphism(ident, src, dst):
        return ident
    allowed = [dst.relation_id(r) for r in src.relation_names]
    return exists(HomSearch(src, dst, injective_rels=True,
                            rel_candidates={r: allowed for r in range(src.num_relations)}))


def _smaller_endomorphism(g: KnowledgeGraph) -> NodeRelHomomorphism | None:
    """rp-endomorphism with the fewest image nodes, if that is below |V|."""
    used = {f.relation for f in g.facts}
    touched = {v for f in g.facts for v in (f.head, f.tail)}
    if len(g.facts) == len(used) and len(touched) == g.num_nodes:
        # phi permutes the used relations, so every fact is hit
        return None
    everything = list(range(g.num_relations))
    for k in range(1, g.num_nodes):
        h = exists(HomSearch(g, g, injective_rels=True, max_image_nodes=k,
                             rel_candidates={r: everything for r in everything}))
        if h is not None:
            return h
    return None


@dataclass(frozen=True)
class CoreResult:
    core: KnowledgeGraph
    to_core: NodeRelHomomorphism     # g -> core
    from_core: NodeRelHomomorphism   # core -> g


def rp_core_with_witnesses(g: KnowledgeGraph, *, max_nodes: int = MAX_NODES,
                           max_relations: int = MAX_RELATIONS) -> CoreResult:
    """Relation-preserving core plus rp-homomorphisms in both directions.

    Repeatedly replaces the graph by the image of a non-onto rp-endomorphism.
    An endomorphism hitting every node is a bijection on facts, so "not onto"
    is the same as "fewer image nodes". The core is a subgraph of ``g`` and
    keeps every relation (phi permutes them), so ``from_core`` is inclusion.
    """
    _check_size(g, max_nodes, max_relations)
    cur = g
    # g-node -> cur-node, g-rel -> cur-rel
    pi = list(range(g.num_nodes))
    phi = list(range(g.num_relations))
    while True:
        h = _smaller_endomorphism(cur)
        if h is None:
            break
        img = h.image(cur, cur)
        node_ix = {name: i for i, name in enumerate(img.node_names)}
        rel_ix = {name: i for i, name in enumerate(img.relation_names)}
        pi = [node_ix[cur.node_names[h.node_map[v]]] for v in pi]
        phi = [rel_ix[cur.relation_names[h.rel_map[r]]] for r in phi]
        cur = img
    to_core = NodeRelHomomorphism(tuple(pi), tuple(phi))
    from_core = NodeRelHomomorphism(tuple(g.node_id(n) for n in cur.node_names),
                                    tuple(g.relation_id(r) for r in cur.relation_names))
    return CoreResult(cur, to_core, from_core)


def rp_core(g: KnowledgeGraph, **caps) -> KnowledgeGraph:
    return rp_core_with_witnesses(g, **caps).core


def is_trivial_graph_core(core: KnowledgeGraph) -> bool:
    """Isomorphic to a single fact r(u, v) with u != v."""
    return core.num_relations == 1 and core.num_nodes == 2 and len(core.facts) == 1


def motif_core(p: Motif, **caps) -> KnowledgeGraph:
    """rp-core of a motif pattern, memoised on the motif's definition."""
    key = (json.dumps(p.pattern.named_triples()), tuple(sorted(p.pattern.relation_names)),
           tuple(sorted(caps.items())))
    core = _CORE_CACHE.get(key)
    if core is None:
        core = _CORE_CACHE[key] = rp_core(p.pattern, **caps)
    return core


_CORE_CACHE: dict = {}


def is_trivial_motif(p: Motif, **caps) -> bool:
    return is_trivial_graph_core(motif_core(p, **caps))


def core_onto_homomorphism(p: Motif, q: Motif, *, core_q: KnowledgeGraph | None = None,
                           max_nodes: int = MAX_NODES,
                           max_relations: int = MAX_RELATIONS) -> NodeRelHomomorphism | None:
    """A homomorphism from p's pattern into q's whose image is isomorphic to
    the rp-core of q's pattern, or None."""
    _check_size(p.pattern, max_nodes, max_relations, f"motif {p.name}")
    _check_size(q.pattern, max_nodes, max_relations, f"motif {q.name}")
    if core_q is None:
        core_q = motif_core(q, max_nodes=max_nodes, max_relations=max_relations)
    n_facts = len(core_q.facts)
    search = HomSearch(p.pattern, q.pattern, image_fact_count=n_facts)
    for h in search:
        img = h.image(p.pattern, q.pattern)
        if (img.num_nodes == core_q.num_nodes and img.num_relations == core_q.num_relations
                and is_isomorphic(img, core_q)):
            return h
    return None


def core_onto_exists(p: Motif, q: Motif, **caps) -> bool:
    return core_onto_homomorphism(p, q, **caps) is not None


@dataclass
class RefinementReport:
    """Which non-trivial motifs of ``to_set`` receive a core-onto
    homomorphism from some motif of ``from_set``.

    A non-empty ``uncovered`` list certifies that ``from_set`` does not refine
    ``to_set``: some link pair separated by ``to_set`` is not separated by
    ``from_set``.
    """

    from_set: list[str]
    to_set: list[str]
    uncovered: list[tuple[str, str]] = field(default_factory=list)
    covered: list[tuple[str, str]] = field(default_factory=list)
    trivial_exempt: list[str] = field(default_factory=list)
    witnesses: dict[str, NodeRelHomomorphism] = field(default_factory=dict, repr=False)

    @property
    def uncovered_names(self) -> list[str]:
        return [m for m, _ in self.uncovered]

    def to_dict(self) -> dict:
        return {
            "from": self.from_set,
            "to": self.to_set,
            "uncovered": [{"motif": m, "reason": r} for m, r in self.uncovered],
            "covered": [{"motif": m, "witness_via": w} for m, w in self.covered],
            "trivial_exempt": self.trivial_exempt,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def refinement_report(f: Iterable[Motif], f2: Iterable[Motif], *, max_nodes: int = MAX_NODES,
                      max_relations: int = MAX_RELATIONS) -> RefinementReport:
    """Check the necessary condition for F refining F': every non-trivial
    P' in F' must be the core-onto image of some P in F."""
    f = canonical_motifs(f)
    f2 = canonical_motifs(f2)
    caps = dict(max_nodes=max_nodes, max_relations=max_relations)
    report = RefinementReport([p.name for p in f], [p.name for p in f2])
    for target in f2:
        core = motif_core(target, **caps)
        if is_trivial_graph_core(core):
            report.trivial_exempt.append(target.name)
            continue
        for source in f:
            h = core_onto_homomorphism(source, target, core_q=core, **caps)
            if h is not None:
                report.covered.append((target.name, source.name))
                report.witnesses[target.name] = h
                break
        else:
            report.uncovered.append((target.name, "non-trivial-and-uncovered"))
    return report


def motifs_by_name(motifs: Sequence[Motif]) -> dict[str, Motif]:
    return {p.name: p for p in motifs}
