"""Motif evaluation and the Lift construction.

``eval_motif`` returns every relation tuple realised by some homomorphism from
the motif's pattern into a KG. Two engines compute it:

* ``join`` (default): a column-store join over the pattern facts in
  connectivity order, projecting away node variables as soon as no later
  fact needs them and deduplicating after every step. This keeps wide star
  motifs tractable because leaf nodes never accumulate.
* ``backtrack``: explicit homomorphism enumeration with :class:`HomSearch`;
  slow but independent, used as the oracle in tests.

The 2-path and 3-path families also have sparse-product fast paths.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .homsearch import HomSearch, fact_order
from .kg import KnowledgeGraph
from .motifs import Motif, canonical_motifs, catalog

log = logging.getLogger(__name__)

_EMPTY = np.zeros((0, 0), dtype=np.int64)


class RelationalHypergraph:
    """Lift output: nodes are the KG's relations, one hyperedge type per motif.

    ``edges[name]`` is a sorted, duplicate-free ``(n, arity)`` int64 array of
    relation-id tuples for the motif called ``name``.
    """

    def __init__(self, node_names: Sequence[str], motifs: Iterable[Motif],
                 edges: dict[str, np.ndarray]):
        self.node_names = tuple(node_names)
        self.edge_types: list[Motif] = canonical_motifs(motifs)
        self.edges: dict[str, np.ndarray] = {}
        for p in self.edge_types:
            arr = np.asarray(edges.get(p.name, np.zeros((0, p.arity), np.int64)), dtype=np.int64)
            arr = arr.reshape(-1, p.arity)
            if len(arr) and (arr.min() < 0 or arr.max() >= len(self.node_names)):
                raise ValueError(f"hyperedge of {p.name} references an unknown relation")
            self.edges[p.name] = _unique_rows(arr)

    @property
    def num_nodes(self) -> int:
        return len(self.node_names)

    @property
    def motif_names(self) -> list[str]:
        return [p.name for p in self.edge_types]

    def __len__(self) -> int:
        return sum(len(a) for a in self.edges.values())

    def __repr__(self) -> str:
        return f"RelationalHypergraph(nodes={self.num_nodes}, types={self.motif_names}, hyperedges={len(self)})"

    def hyperedge_set(self) -> set[tuple[str, tuple[int, ...]]]:
        return {(name, tuple(int(x) for x in row)) for name, arr in self.edges.items() for row in arr}

    def named_hyperedges(self) -> list[tuple[str, tuple[str, ...]]]:
        """Hyperedges with relation names, sorted by motif then names."""
        out = [(name, tuple(self.node_names[x] for x in row))
               for name, arr in self.edges.items() for row in arr.tolist()]
        out.sort()
        return out

    def has(self, motif: str, rels: Sequence[str]) -> bool:
        arr = self.edges.get(motif)
        if arr is None or len(rels) != arr.shape[1]:
            return False
        try:
            ids = [self.node_names.index(r) for r in rels]
        except ValueError:
            return False
        return bool(np.any(np.all(arr == np.asarray(ids), axis=1)))

    def restrict(self, keep: Iterable[int]) -> RelationalHypergraph:
        """Sub-hypergraph induced by the relations in ``keep`` (ids renumbered)."""
        keep = sorted(set(keep))
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        edges = {}
        for name, arr in self.edges.items():
            inside = np.all(np.isin(arr, keep), axis=1) if len(arr) else np.zeros(0, bool)
            edges[name] = remap[arr[inside]]
        return RelationalHypergraph([self.node_names[r] for r in keep], self.edge_types, edges)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.node_names),
            "edge_types": self.motif_names,
            "hyperedges": [[name, list(rels)] for name, rels in self.named_hyperedges()],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _unique_rows(arr: np.ndarray, radix: Sequence[int] | None = None) -> np.ndarray:
    """Sorted unique rows; packs rows into one int64 key when the radix fits."""
    if arr.shape[0] <= 1:
        return arr.copy()
    if arr.shape[1] == 0:
        return arr[:1].copy()
    if radix is None:
        radix = [int(arr[:, c].max()) + 1 for c in range(arr.shape[1])]
    total = 1
    for r in radix:
        total *= max(int(r), 1)
    if total < 2 ** 62:
        key = np.zeros(arr.shape[0], dtype=np.int64)
        for c, r in enumerate(radix):
            key = key * max(int(r), 1) + arr[:, c]
        _, idx = np.unique(key, return_index=True)
        return arr[idx]
    return np.unique(arr, axis=0)


# generic evaluation

def _eval_join(p: Motif, g: KnowledgeGraph) -> np.ndarray:
    pat = p.pattern
    order = fact_order(pat)
    arr = g.fact_array()
    if len(arr) == 0:
        return np.zeros((0, p.arity), np.int64)
    out_ptr, out_rel, out_tail = g.out_csr()
    in_ptr, in_rel, in_head = g.in_csr()
    last_use: dict[int, int] = {}
    for i, f in enumerate(order):
        last_use[f.head] = i
        last_use[f.tail] = i

    # table columns: ("n", node var) or ("r", relation var)
    cols: dict[tuple[str, int], np.ndarray] = {}
    n_nodes, n_rels = g.num_nodes, g.num_relations

    f0 = order[0]
    rows = arr[arr[:, 1] == arr[:, 2]] if f0.head == f0.tail else arr
    cols[("r", f0.relation)] = rows[:, 0]
    cols[("n", f0.head)] = rows[:, 1]
    cols[("n", f0.tail)] = rows[:, 2]

    for i, f in enumerate(order):
        if i > 0:
            a_bound = ("n", f.head) in cols
            b_bound = ("n", f.tail) in cols
            if a_bound:
                parent, slot = _kernels.csr_expand(out_ptr, cols[("n", f.head)])
                new_rel, other = out_rel[slot], out_tail[slot]
                cols = {k: v[parent] for k, v in cols.items()}
                if b_bound:
                    keep = other == cols[("n", f.tail)]
                    cols = {k: v[keep] for k, v in cols.items()}
                    new_rel = new_rel[keep]
                else:
                    cols[("n", f.tail)] = other
                cols[("r", f.relation)] = new_rel
            elif b_bound:
                parent, slot = _kernels.csr_expand(in_ptr, cols[("n", f.tail)])
                cols = {k: v[parent] for k, v in cols.items()}
                cols[("r", f.relation)] = in_rel[slot]
                cols[("n", f.head)] = in_head[slot]
            else:  # unreachable for connected patterns
                raise AssertionError("pattern fact order is not connected")
        for v in [k for k in cols if k[0] == "n" and last_use[k[1]] <= i]:
            del cols[v]
        keys = sorted(cols)
        if not keys or len(next(iter(cols.values()))) == 0:
            return np.zeros((0, p.arity), np.int64)
        table = np.stack([cols[k] for k in keys], axis=1)
        table = _unique_rows(table, [n_nodes if k[0] == "n" else n_rels for k in keys])
        cols = {k: table[:, j] for j, k in enumerate(keys)}

    result = np.stack([cols[("r", r)] for r in p.order], axis=1)
    return _unique_rows(result, [n_rels] * p.arity)


def _eval_backtrack(p: Motif, g: KnowledgeGraph) -> np.ndarray:
    seen = {tuple(h.rel_map[r] for r in p.order) for h in HomSearch(p.pattern, g, total=False)}
    if not seen:
        return np.zeros((0, p.arity), np.int64)
    return np.array(sorted(seen), dtype=np.int64).reshape(-1, p.arity)


def eval_motif_array(p: Motif, g: KnowledgeGraph, method: str = "join") -> np.ndarray:
    """Eval(P, G) as a sorted duplicate-free ``(n, arity)`` array of relation ids."""
    if method == "join":
        return _eval_join(p, g)
    if method == "backtrack":
        return _eval_backtrack(p, g)
    raise ValueError(f"unknown evaluation method {method!r}")


def eval_motif(p: Motif, g: KnowledgeGraph, method: str = "join") -> set[tuple[int, ...]]:
    """Eval(P, G): the set of tuples ``(phi(r1), ..., phi(rk))`` over all
    homomorphisms (pi, phi) from P's pattern into ``g``, in P's order."""
    return {tuple(row) for row in eval_motif_array(p, g, method).tolist()}


def _warn_if_costly(p: Motif, g: KnowledgeGraph) -> None:
    if p.arity < 5 or g.num_nodes == 0:
        return
    in_ptr = g.in_csr()[0]
    max_deg = int(np.diff(in_ptr).max(initial=0))
    if max_deg ** p.arity > 10 ** 6:
        log.warning("motif %s has %d relations; enumeration may produce up to %d tuples per node",
                    p.name, p.arity, max_deg ** p.arity)


def lift(motifs: Iterable[Motif], g: KnowledgeGraph, *, method: str = "join",
         threads: int = 1) -> RelationalHypergraph:
    """Lift_F(G): one hyperedge per motif match, nodes are G's relations."""
    motifs = canonical_motifs(motifs)
    for p in motifs:
        _warn_if_costly(p, g)
    if threads > 1 and len(motifs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: eval_motif_array(p, g, method), motifs))
    else:
        results = [eval_motif_array(p, g, method) for p in motifs]
    return RelationalHypergraph(g.relation_names, motifs, {p.name: a for p, a in zip(motifs, results)})


# sparse-product fast paths

def _incidence(g: KnowledgeGraph) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Relation-by-node head and tail incidence matrices."""
    arr = g.fact_array()
    shape = (g.num_relations, g.num_nodes)
    ones = np.ones(len(arr), dtype=np.int64)
    head = sp.csr_matrix((ones, (arr[:, 0], arr[:, 1])), shape=shape)
    tail = sp.csr_matrix((ones, (arr[:, 0], arr[:, 2])), shape=shape)
    # duplicates summed by the constructor; only the pattern matters
    head.data[:] = 1
    tail.data[:] = 1
    return head, tail


def _pairs(m: sp.spmatrix) -> np.ndarray:
    m = sp.coo_matrix(m)
    nz = m.data != 0
    return np.stack([m.row[nz], m.col[nz]], axis=1).astype(np.int64)


def _two_path_edges(g: KnowledgeGraph) -> dict[str, np.ndarray]:
    H, T = _incidence(g)
    return {
        "h2t": _pairs(T @ H.T),
        "t2h": _pairs(H @ T.T),
        "h2h": _pairs(H @ H.T),
        "t2t": _pairs(T @ T.T),
    }


def lift_fast_2path(g: KnowledgeGraph) -> RelationalHypergraph:
    """Lift over the four binary motifs via products of incidence matrices."""
    return RelationalHypergraph(g.relation_names, catalog("ultra4"), _two_path_edges(g))


def lift_fast_3path(g: KnowledgeGraph) -> RelationalHypergraph:
    """Lift over the 2- and 3-edge path motifs via sparse products.

    For every middle relation b with adjacency A_b, the outer pair (a, c) is
    read off one triple product, e.g. tfh uses T A_b H^T.
    """
    two = _two_path_edges(g)
    edges = {name: two[name] for name in ("h2t", "h2h", "t2t")}
    H, T = _incidence(g)
    arr = g.fact_array()
    n = g.num_nodes
    left = {"tfh": T, "tft": T, "hfh": H, "hft": H}
    right = {"tfh": H, "tft": T, "hfh": T, "hft": H}
    parts: dict[str, list[np.ndarray]] = {k: [] for k in left}
    for b in np.unique(arr[:, 0]) if len(arr) else []:
        sel = arr[arr[:, 0] == b]
        A = sp.csr_matrix((np.ones(len(sel), np.int64), (sel[:, 1], sel[:, 2])), shape=(n, n))
        for name in left:
            ac = _pairs(left[name] @ A @ right[name].T)
            if len(ac):
                mid = np.full((len(ac), 1), b, dtype=np.int64)
                parts[name].append(np.hstack([ac[:, :1], mid, ac[:, 1:]]))
    for name, chunks in parts.items():
        edges[name] = np.vstack(chunks) if chunks else np.zeros((0, 3), np.int64)
    return RelationalHypergraph(g.relation_names, catalog("f3path"), edges)


FAST_PATHS = {"ultra4": lift_fast_2path, "f3path": lift_fast_3path}


def lift_fast(motif_set: str, g: KnowledgeGraph) -> RelationalHypergraph:
    """Fast lift for a catalog set that has one; f2path is read off the ultra4 products."""
    if motif_set == "f2path":
        full = lift_fast_2path(g)
        keep = catalog("f2path")
        return RelationalHypergraph(g.relation_names, keep, {p.name: full.edges[p.name] for p in keep})
    try:
        return FAST_PATHS[motif_set](g)
    except KeyError:
        raise ValueError(f"no sparse fast path for motif set {motif_set!r}; "
                         f"available: f2path, {', '.join(FAST_PATHS)}") from None
