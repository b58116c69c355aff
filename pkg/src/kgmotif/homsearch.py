"""Backtracking search for node-relation homomorphisms between small graphs.

The search walks the source facts in a connectivity order (each next fact
shares as many endpoints as possible with the already-mapped ones) and maps
pi and phi jointly, drawing candidates from the target's per-relation
adjacency. Neither map is required to be injective unless asked.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Iterator, Mapping

from .kg import Fact, KnowledgeGraph, NodeRelHomomorphism


def fact_order(g: KnowledgeGraph, facts: Iterable[Fact] | None = None) -> list[Fact]:
    """Facts ordered so that every fact after the first touches a mapped node
    whenever its component allows it; ties favour facts with both ends mapped."""
    remaining = sorted(g.facts if facts is None else facts)
    if not remaining:
        return []
    degree = Counter()
    for f in remaining:
        degree[f.head] += 1
        degree[f.tail] += 1
    seen: set[int] = set()
    order: list[Fact] = []
    while remaining:
        best_i, best_key = 0, None
        for i, f in enumerate(remaining):
            key = ((f.head in seen) + (f.tail in seen), degree[f.head] + degree[f.tail])
            if best_key is None or key > best_key:
                best_i, best_key = i, key
        f = remaining.pop(best_i)
        order.append(f)
        seen.update((f.head, f.tail))
    return order


class HomSearch:
    """Iterate homomorphisms ``src -> dst`` as :class:`NodeRelHomomorphism`.

    Options restrict the search: injectivity of either map, per-variable
    candidate sets, and bounds on the image (distinct image nodes / facts)
    used by the core and core-onto searches for pruning.
    With ``total=False`` only nodes and relations that occur in facts are
    mapped (entries for the others are -1); that is all Eval needs.
    """

    def __init__(
        self,
        src: KnowledgeGraph,
        dst: KnowledgeGraph,
        *,
        injective_nodes: bool = False,
        injective_rels: bool = False,
        node_candidates: Mapping[int, Iterable[int]] | None = None,
        rel_candidates: Mapping[int, Iterable[int]] | None = None,
        total: bool = True,
        max_image_nodes: int | None = None,
        image_fact_count: int | None = None,
    ):
        self.src, self.dst = src, dst
        self.injective_nodes = injective_nodes
        self.injective_rels = injective_rels
        self.node_ok = {v: set(c) for v, c in (node_candidates or {}).items()}
        all_rels = range(dst.num_relations)
        self.rel_cands = {r: sorted(set((rel_candidates or {}).get(r, all_rels)))
                          for r in range(src.num_relations)}
        self.total = total
        self.max_image_nodes = max_image_nodes
        self.image_fact_count = image_fact_count
        self.order = fact_order(src)
        touched_nodes = {v for f in src.facts for v in (f.head, f.tail)}
        touched_rels = {f.relation for f in src.facts}
        self.free_nodes = [v for v in range(src.num_nodes) if v not in touched_nodes] if total else []
        self.free_rels = [r for r in range(src.num_relations) if r not in touched_rels] if total else []

    def __iter__(self) -> Iterator[NodeRelHomomorphism]:
        self.pi = [-1] * self.src.num_nodes
        self.phi = [-1] * self.src.num_relations
        self.used_nodes: Counter = Counter()
        self.used_rels: Counter = Counter()
        self.image: Counter = Counter()
        yield from self._facts(0)

    # helpers

    def _node_allowed(self, v: int, w: int) -> bool:
        if self.injective_nodes and self.used_nodes[w]:
            return False
        ok = self.node_ok.get(v)
        if ok is not None and w not in ok:
            return False
        if self.max_image_nodes is not None and not self.used_nodes[w] \
                and len(self.used_nodes) >= self.max_image_nodes:
            return False
        return True

    def _bind_node(self, v: int, w: int) -> None:
        self.pi[v] = w
        self.used_nodes[w] += 1

    def _unbind_node(self, v: int) -> None:
        w = self.pi[v]
        self.pi[v] = -1
        self.used_nodes[w] -= 1
        if not self.used_nodes[w]:
            del self.used_nodes[w]

    def _candidates(self, f: Fact):
        dst = self.dst
        r_img = self.phi[f.relation]
        if r_img >= 0:
            rels = (r_img,)
        else:
            rels = [s for s in self.rel_cands[f.relation]
                    if not (self.injective_rels and self.used_rels[s])]
        a, b = self.pi[f.head], self.pi[f.tail]
        loop = f.head == f.tail
        for s in rels:
            if a >= 0 and b >= 0:
                if dst.has_fact(s, a, b):
                    yield s, a, b
            elif a >= 0:
                for t in dst.tails(s, a):
                    if not loop or t == a:
                        yield s, a, t
            elif b >= 0:
                for h in dst.heads(s, b):
                    yield s, h, b
            else:
                for g in dst.facts_of(s):
                    if not loop or g.head == g.tail:
                        yield s, g.head, g.tail

    def _facts(self, i: int) -> Iterator[NodeRelHomomorphism]:
        if i == len(self.order):
            yield from self._free_nodes(0)
            return
        f = self.order[i]
        remaining = len(self.order) - i - 1
        for s, a, b in self._candidates(f):
            bound = []
            ok = True
            for v, w in ((f.head, a), (f.tail, b)):
                if self.pi[v] < 0:
                    if not self._node_allowed(v, w):
                        ok = False
                        break
                    self._bind_node(v, w)
                    bound.append(v)
            if ok:
                new_rel = self.phi[f.relation] < 0
                if new_rel:
                    self.phi[f.relation] = s
                    self.used_rels[s] += 1
                img = Fact(s, a, b)
                self.image[img] += 1
                target = self.image_fact_count
                if target is None or (len(self.image) <= target and len(self.image) + remaining >= target):
                    yield from self._facts(i + 1)
                self.image[img] -= 1
                if not self.image[img]:
                    del self.image[img]
                if new_rel:
                    self.used_rels[s] -= 1
                    self.phi[f.relation] = -1
            for v in reversed(bound):
                self._unbind_node(v)

    def _free_nodes(self, i: int) -> Iterator[NodeRelHomomorphism]:
        if i == len(self.free_nodes):
            yield from self._free_rels(0)
            return
        v = self.free_nodes[i]
        # already-used image nodes first: keeps bounded searches cheap
        cands = sorted(range(self.dst.num_nodes), key=lambda w: (not self.used_nodes[w], w))
        for w in cands:
            if self._node_allowed(v, w):
                self._bind_node(v, w)
                yield from self._free_nodes(i + 1)
                self._unbind_node(v)

    def _free_rels(self, i: int) -> Iterator[NodeRelHomomorphism]:
        if i == len(self.free_rels):
            yield NodeRelHomomorphism(tuple(self.pi), tuple(self.phi))
            return
        r = self.free_rels[i]
        for s in self.rel_cands[r]:
            if self.injective_rels and self.used_rels[s]:
                continue
            self.phi[r] = s
            self.used_rels[s] += 1
            yield from self._free_rels(i + 1)
            self.used_rels[s] -= 1
            self.phi[r] = -1


def exists(search: HomSearch) -> NodeRelHomomorphism | None:
    for h in search:
        return h
    return None
