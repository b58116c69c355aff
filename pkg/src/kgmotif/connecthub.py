"""ConnectHub(k): hub-detection benchmark graphs and their WL-based evaluation.

Each graph has positive relations P = {p1..pl}, negative relations
N = {n1..nl} and a query relation q that carries no facts. It consists of:

* a hub: one fresh node a_p per p in P with p(a_p, hub);
* for every size-k subset S of P, a positive community: a fresh centre x and
  fresh leaves y_s with s(y_s, x) for s in S;
* the same communities over N, without a hub.

The task asks whether q(hub, x) should hold for community centres x: yes
for positive centres and no for negative ones. A motif set solves a graph
exactly when the final colours of the positive candidate links are disjoint
from those of the negative ones.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .kg import KGError, KnowledgeGraph, augment_inverses, load_kg, save_kg
from .lift import lift
from .motifs import Motif
from .wl import Interner, motif_link_colors, ultra_link_colors

MIN_K, MAX_K = 2, 8


@dataclass(frozen=True)
class HubGraph:
    kg: KnowledgeGraph
    positive_relations: tuple[int, ...]
    negative_relations: tuple[int, ...]
    q: int
    hub_center: int
    positive_centers: tuple[int, ...]
    negative_centers: tuple[int, ...]


@dataclass(frozen=True)
class ConnectHubInstance:
    k: int
    l: int
    seed: int
    graphs: tuple[HubGraph, ...]


def expected_fact_count(k: int, l: int) -> int:
    return l + 2 * math.comb(l, k) * k


def _check_params(k: int, l: int, n_graphs: int) -> None:
    if not MIN_K <= k <= MAX_K:
        raise ValueError(f"k must lie in [{MIN_K}, {MAX_K}], got {k}")
    if l <= k:
        raise ValueError(f"l must exceed k (got k={k}, l={l})")
    if n_graphs < 1:
        raise ValueError("n_graphs must be positive")


def _build_graph(k: int, l: int, rng: np.random.Generator) -> HubGraph:
    pos = [f"p{i}" for i in range(1, l + 1)]
    neg = [f"n{i}" for i in range(1, l + 1)]
    triples = [(f"a_{p}", p, "hub") for p in pos]
    centers: dict[str, list[str]] = {"p": [], "n": []}
    for cls, rels in (("p", pos), ("n", neg)):
        for j, subset in enumerate(itertools.combinations(rels, k)):
            x = f"{cls}c{j}"
            centers[cls].append(x)
            triples.extend((f"{x}_{r}", r, x) for r in subset)
    base = KnowledgeGraph.from_triples(triples, relations=pos + neg + ["q"])
    node_perm = rng.permutation(base.num_nodes).tolist()
    rel_perm = rng.permutation(base.num_relations).tolist()
    g = base.permuted(node_perm, rel_perm)
    return HubGraph(
        g,
        tuple(g.relation_id(r) for r in pos),
        tuple(g.relation_id(r) for r in neg),
        g.relation_id("q"),
        g.node_id("hub"),
        tuple(g.node_id(x) for x in centers["p"]),
        tuple(g.node_id(x) for x in centers["n"]),
    )


def generate(k: int, l: int | None = None, n_graphs: int = 1, seed: int = 0) -> ConnectHubInstance:
    """Deterministic in (k, l, n_graphs, seed); ids are shuffled per graph."""
    l = k + 1 if l is None else l
    _check_params(k, l, n_graphs)
    streams = np.random.SeedSequence(seed).spawn(n_graphs)
    graphs = tuple(_build_graph(k, l, np.random.Generator(np.random.Philox(s))) for s in streams)
    inst = ConnectHubInstance(k, l, seed, graphs)
    problems = validate(inst)
    if problems:  # pragma: no cover - generator bug guard
        raise AssertionError("generated instance is invalid: " + "; ".join(problems))
    return inst


def _components(g: KnowledgeGraph) -> list[set[int]]:
    parent = list(range(g.num_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in g.facts:
        parent[find(f.head)] = find(f.tail)
    comps: dict[int, set[int]] = {}
    for v in range(g.num_nodes):
        comps.setdefault(find(v), set()).add(v)
    return list(comps.values())


def validate_graph(hg: HubGraph, k: int) -> list[str]:
    """Check the construction invariants; returns human-readable problems."""
    g, out = hg.kg, []
    P, N = set(hg.positive_relations), set(hg.negative_relations)
    l = len(P)
    if len(N) != l or l <= k or P & N or hg.q in P | N:
        out.append("relation classes malformed")
    if g.facts_of(hg.q):
        out.append("query relation has facts")
    hub_in = [f for f in g.facts if f.tail == hg.hub_center]
    if sorted(f.relation for f in hub_in) != sorted(P) or len({f.head for f in hub_in}) != l:
        out.append("hub is not an l-star over P with distinct leaves")
    for cls, rels, cs in (("positive", P, hg.positive_centers), ("negative", N, hg.negative_centers)):
        seen = set()
        for x in cs:
            inc = [f for f in g.facts if f.tail == x]
            sig = frozenset(f.relation for f in inc)
            if len(inc) != k or len(sig) != k or not sig <= rels or len({f.head for f in inc}) != k:
                out.append(f"{cls} community at node {x} malformed")
            seen.add(sig)
        if seen != {frozenset(s) for s in itertools.combinations(sorted(rels), k)}:
            out.append(f"{cls} communities do not cover every size-{k} subset exactly once")
        if len(seen) != len(cs):
            out.append(f"duplicate {cls} community")
    comps = _components(g)
    if len(comps) != 1 + len(hg.positive_centers) + len(hg.negative_centers):
        out.append("components are not node-disjoint stars")
    if len(g.facts) != expected_fact_count(k, l):
        out.append(f"expected {expected_fact_count(k, l)} facts, found {len(g.facts)}")
    return out


def validate(inst: ConnectHubInstance) -> list[str]:
    return [f"graph {i}: {p}" for i, hg in enumerate(inst.graphs) for p in validate_graph(hg, inst.k)]


# evaluation

@dataclass(frozen=True)
class HubEvaluation:
    motif_set: str
    per_graph: tuple[float, ...]

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.per_graph))


def graph_accuracy(hg: HubGraph, motifs: Iterable[Motif] | None, t: int = 2, l: int = 2, *,
                   augment: bool = False, ultra: bool = False, threads: int = 1) -> float:
    """1.0 when no positive candidate link shares its colour with a negative
    one (a perfect classifier exists), else 0.5 (chance)."""
    g = augment_inverses(hg.kg) if augment else hg.kg
    cond = [(hg.q, hg.hub_center)]
    interner = Interner()
    if ultra:
        c = ultra_link_colors(g, t, l, cond, interner)
    else:
        c = motif_link_colors(g, lift(motifs, g, threads=threads), t, l, cond, interner)
    cols = c.colors(hg.q, hg.hub_center)
    pos = {int(cols[x]) for x in hg.positive_centers}
    neg = {int(cols[x]) for x in hg.negative_centers}
    return 0.5 if pos & neg else 1.0


def evaluate_separation(inst: ConnectHubInstance, motifs: Iterable[Motif] | None, t: int = 2, l: int = 2, *,
                        name: str = "", augment: bool = False, ultra: bool = False,
                        threads: int = 1) -> HubEvaluation:
    motifs = list(motifs) if motifs is not None else None
    scores = tuple(graph_accuracy(hg, motifs, t, l, augment=augment, ultra=ultra, threads=threads)
                   for hg in inst.graphs)
    return HubEvaluation(name, scores)


# serialisation

def save_instance(inst: ConnectHubInstance, directory: str | Path) -> Path:
    """One triple file per graph plus ``manifest.json``; returns the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    graphs = []
    for i, hg in enumerate(inst.graphs):
        fname = f"graph_{i}.tsv"
        save_kg(hg.kg, d / fname)
        g = hg.kg
        graphs.append({
            "file": fname,
            "q": g.relation_names[hg.q],
            "hub_center": g.node_names[hg.hub_center],
            "positive_centers": [g.node_names[x] for x in hg.positive_centers],
            "negative_centers": [g.node_names[x] for x in hg.negative_centers],
            "positive_relations": [g.relation_names[r] for r in hg.positive_relations],
            "negative_relations": [g.relation_names[r] for r in hg.negative_relations],
        })
    manifest = d / "manifest.json"
    manifest.write_text(json.dumps({"k": inst.k, "l": inst.l, "seed": inst.seed, "graphs": graphs}, indent=1),
                        encoding="utf-8")
    return manifest


def load_instance(manifest: str | Path) -> ConnectHubInstance:
    manifest = Path(manifest)
    data = json.loads(manifest.read_text(encoding="utf-8"))
    graphs = []
    for entry in data["graphs"]:
        g = load_kg(manifest.parent / entry["file"], relations=[entry["q"]])
        try:
            graphs.append(HubGraph(
                g,
                tuple(g.relation_id(r) for r in entry["positive_relations"]),
                tuple(g.relation_id(r) for r in entry["negative_relations"]),
                g.relation_id(entry["q"]),
                g.node_id(entry["hub_center"]),
                tuple(g.node_id(x) for x in entry["positive_centers"]),
                tuple(g.node_id(x) for x in entry["negative_centers"]),
            ))
        except KGError as exc:
            raise KGError(f"manifest entry {entry['file']} names an unknown node or relation: {exc}") from None
    return ConnectHubInstance(int(data["k"]), int(data["l"]), int(data["seed"]), tuple(graphs))
