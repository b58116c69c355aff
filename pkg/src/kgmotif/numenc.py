"""Forward-only numeric encoder with seeded random weights.

Relation encoder (conditioned on a query relation q, over a lifted hypergraph):

    h_r^0     = 1 if r == q else 0                      (vector of width d)
    h_r^{t+1} = relu(W_t [h_r^t || sum_{(e,i): e(i)=r} z_{t,rho(e)} * prod_{j != i} (a_t h_{e(j)}^t + (1 - a_t) p_j)] + b_t)

Entity encoder (conditioned on q and a source node u, over the KG):

    h_v^0     = 1{v == u} * h_q^T
    h_v^{l+1} = relu(W_l [h_v^0 || sum_{r(w, v)} h_w^l * MLP_l(h_r^T)] + b_l)

``use_layer0=False`` concatenates h_v^l instead of h_v^0. The decoder is a
two-layer perceptron followed by a sigmoid.

In canonical mode every sum first sorts its addends by their bit patterns and
then accumulates sequentially, and every affine map uses a fixed summation
order. Equal multisets of inputs therefore give bit-identical outputs, which
is what makes the colour-refinement upper bound checkable exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from . import _kernels
from .kg import KnowledgeGraph
from .lift import RelationalHypergraph, lift
from .motifs import Motif

DEFAULT_D = 32
DEFAULT_T = 4
DEFAULT_L = 4
ALPHA_INIT = 0.5
_ONE_BELOW = float(np.nextafter(1.0, 0.0))


def sinusoidal_pe(position: int, d: int) -> np.ndarray:
    """Entry 2k is sin(i / 10000^(2k/d)), entry 2k+1 the matching cosine."""
    if d % 2:
        raise ValueError(f"positional encoding width must be even, got {d}")
    k = np.arange(d // 2, dtype=np.float64)
    angle = position / np.power(10000.0, 2 * k / d)
    out = np.empty(d, np.float64)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


@dataclass
class EncoderWeights:
    seed: int
    d: int
    T: int
    L: int
    motifs: tuple[str, ...]
    rel_W: list[np.ndarray]
    rel_b: list[np.ndarray]
    rel_z: list[dict[str, np.ndarray]]
    rel_alpha: list[float]
    ent_W: list[np.ndarray]
    ent_b: list[np.ndarray]
    mlp: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
    dec: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @classmethod
    def init(cls, seed: int, motifs: Iterable[str | Motif], d: int = DEFAULT_D,
             T: int = DEFAULT_T, L: int = DEFAULT_L) -> EncoderWeights:
        """Weights uniform in [-1/sqrt(d), 1/sqrt(d)], drawn from a Philox
        stream in a fixed order determined by (d, T, L, sorted motif names)."""
        if d % 2:
            raise ValueError("embedding width must be even")
        names = tuple(sorted(p if isinstance(p, str) else p.name for p in motifs))
        rng = np.random.Generator(np.random.Philox(seed))
        s = 1.0 / np.sqrt(d)

        def u(*shape):
            return rng.uniform(-s, s, size=shape)

        rel_W, rel_b, rel_z, rel_alpha = [], [], [], []
        for _ in range(T):
            rel_W.append(u(d, 2 * d))
            rel_b.append(u(d))
            rel_z.append({n: u(d) for n in names})
            rel_alpha.append(ALPHA_INIT)
        ent_W, ent_b, mlp = [], [], []
        for _ in range(L):
            ent_W.append(u(d, 2 * d))
            ent_b.append(u(d))
            mlp.append((u(d, d), u(d), u(d, d), u(d)))
        dec = (u(d, d), u(d), u(1, d), u(1))
        return cls(seed, d, T, L, names, rel_W, rel_b, rel_z, rel_alpha, ent_W, ent_b, mlp, dec)

    def to_dict(self) -> dict:
        def a(x):
            return np.asarray(x).tolist()
        return {
            "seed": self.seed, "d": self.d, "T": self.T, "L": self.L, "motifs": list(self.motifs),
            "relation_layers": [{"W": a(W), "b": a(b), "alpha": al, "z": {k: a(v) for k, v in z.items()}}
                                for W, b, z, al in zip(self.rel_W, self.rel_b, self.rel_z, self.rel_alpha)],
            "entity_layers": [{"W": a(W), "b": a(b), "mlp": [a(m) for m in ml]}
                              for W, b, ml in zip(self.ent_W, self.ent_b, self.mlp)],
            "decoder": [a(x) for x in self.dec],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EncoderWeights:
        f = np.asarray
        rl, el = d["relation_layers"], d["entity_layers"]
        return cls(
            int(d["seed"]), int(d["d"]), int(d["T"]), int(d["L"]), tuple(d["motifs"]),
            [f(x["W"], float) for x in rl], [f(x["b"], float) for x in rl],
            [{k: f(v, float) for k, v in x["z"].items()} for x in rl], [float(x["alpha"]) for x in rl],
            [f(x["W"], float) for x in el], [f(x["b"], float) for x in el],
            [tuple(f(m, float) for m in x["mlp"]) for x in el],
            tuple(f(x, float) for x in d["decoder"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> EncoderWeights:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _affine(x: np.ndarray, W: np.ndarray, b: np.ndarray, canonical: bool) -> np.ndarray:
    if canonical:
        return _kernels.affine(x, W, b)
    return x @ W.T + b


def _aggregate(target: np.ndarray, vectors: np.ndarray, n: int, canonical: bool) -> np.ndarray:
    """Per-target sum of addend rows."""
    d = vectors.shape[1] if vectors.ndim == 2 else 0
    if len(target) == 0:
        return np.zeros((n, d), np.float64)
    if not canonical:
        m = sp.csr_matrix((np.ones(len(target)), (target, np.arange(len(target)))), shape=(n, len(target)))
        return np.asarray(m @ vectors)
    bits = np.ascontiguousarray(vectors).view(np.uint64)
    keys = [bits[:, c] for c in range(d - 1, -1, -1)] + [target]
    order = np.lexsort(keys)
    return _kernels.segment_sum(vectors[order], target[order], n)


def relation_forward(h: RelationalHypergraph, q: int, w: EncoderWeights, t_max: int | None = None,
                     canonical: bool = True) -> list[np.ndarray]:
    """Relation embeddings conditioned on q, one (m, d) array per layer 0..t_max."""
    t_max = w.T if t_max is None else t_max
    if t_max > w.T:
        raise ValueError(f"weights have {w.T} relation layers, asked for {t_max}")
    if not 0 <= q < h.num_nodes:
        raise ValueError(f"query relation {q} is not a node of the hypergraph")
    missing = [p.name for p in h.edge_types if p.name not in w.motifs]
    if missing:
        raise ValueError(f"weights have no message vectors for motifs {missing}")
    m, d = h.num_nodes, w.d
    cur = np.zeros((m, d))
    cur[q] = 1.0
    out = [cur]
    max_k = max((p.arity for p in h.edge_types), default=0)
    pe = [sinusoidal_pe(j, d) for j in range(1, max_k + 1)]
    for t in range(t_max):
        a = w.rel_alpha[t]
        targets, addends = [], []
        for p in h.edge_types:
            E = h.edges[p.name]
            if len(E) == 0:
                continue
            z = w.rel_z[t][p.name]
            # position-aware neighbour terms, one (n_e, d) array per position
            terms = [a * cur[E[:, j]] + (1 - a) * pe[j] for j in range(p.arity)]
            for i in range(p.arity):
                msg = np.broadcast_to(z, (len(E), d)).copy()
                for j in range(p.arity):
                    if j != i:
                        msg *= terms[j]
                targets.append(E[:, i])
                addends.append(msg)
        if targets:
            agg = _aggregate(np.concatenate(targets), np.concatenate(addends), m, canonical)
        else:
            agg = np.zeros((m, d))
        cur = np.maximum(_affine(np.hstack([cur, agg]), w.rel_W[t], w.rel_b[t], canonical), 0.0)
        out.append(cur)
    return out


def _mlp(x: np.ndarray, params, canonical: bool) -> np.ndarray:
    W1, b1, W2, b2 = params
    return _affine(np.maximum(_affine(x, W1, b1, canonical), 0.0), W2, b2, canonical)


def entity_forward(g: KnowledgeGraph, rel_embeds: np.ndarray, u: int | Iterable[int], q: int,
                   w: EncoderWeights, l_max: int | None = None, *, use_layer0: bool = True,
                   canonical: bool = True) -> list[np.ndarray]:
    """Node embeddings conditioned on (q, u), one (n, d) array per layer.

    ``u`` may be a list of sources; arrays are then (n_sources, n, d).
    ``rel_embeds`` is the (m, d) final relation embedding for query q.
    """
    l_max = w.L if l_max is None else l_max
    if l_max > w.L:
        raise ValueError(f"weights have {w.L} entity layers, asked for {l_max}")
    rel_embeds = np.asarray(rel_embeds, np.float64)
    if rel_embeds.shape != (g.num_relations, w.d):
        raise ValueError(f"relation embeddings must have shape {(g.num_relations, w.d)}, got {rel_embeds.shape}")
    single = isinstance(u, (int, np.integer))
    sources = [int(u)] if single else [int(x) for x in u]
    n, d, ns = g.num_nodes, w.d, len(sources)
    h0 = np.zeros((ns, n, d))
    for s, src in enumerate(sources):
        h0[s, src] = rel_embeds[q]
    arr = g.fact_array()
    rel, head, tail = arr[:, 0], arr[:, 1], arr[:, 2]
    cond = np.repeat(np.arange(ns, dtype=np.int64), len(arr))
    target = cond * n + np.tile(tail, ns)
    src_idx = cond * n + np.tile(head, ns)
    rel_idx = np.tile(rel, ns)
    cur = h0
    out = [h0]
    for l in range(l_max):
        mr = _mlp(rel_embeds, w.mlp[l], canonical)
        flat = cur.reshape(ns * n, d)
        msgs = flat[src_idx] * mr[rel_idx]
        agg = _aggregate(target, msgs, ns * n, canonical)
        keep = (h0 if use_layer0 else cur).reshape(ns * n, d)
        cur = np.maximum(_affine(np.hstack([keep, agg]), w.ent_W[l], w.ent_b[l], canonical), 0.0).reshape(ns, n, d)
        out.append(cur)
    return [x[0] for x in out] if single else out


def decode(x: np.ndarray, w: EncoderWeights, canonical: bool = True) -> np.ndarray:
    """Sigmoid of a two-layer perceptron, clipped into the open interval (0, 1)."""
    W1, b1, W2, b2 = w.dec
    x = np.atleast_2d(x)
    hidden = np.maximum(_affine(x, W1, b1, canonical), 0.0)
    s = expit(_affine(hidden, W2, b2, canonical)[:, 0])
    return np.clip(s, np.finfo(np.float64).tiny, _ONE_BELOW)


def score_link(g: KnowledgeGraph, motifs: Iterable[Motif] | RelationalHypergraph, q: int, u: int, v: int,
               w: EncoderWeights, t_max: int | None = None, l_max: int | None = None,
               canonical: bool = True) -> float:
    """Probability-like score of q(u, v) from the full lift/encode/decode pipeline."""
    h = motifs if isinstance(motifs, RelationalHypergraph) else lift(motifs, g)
    rel = relation_forward(h, q, w, t_max, canonical)[-1]
    ent = entity_forward(g, rel, u, q, w, l_max, canonical=canonical)[-1]
    return float(decode(ent[v], w, canonical)[0])


def dump_embeddings(g: KnowledgeGraph, q: int, u: int, emb: np.ndarray, t: int, l: int) -> dict:
    return {"condition": {"q": g.relation_names[q], "u": g.node_names[u]}, "t": t, "l": l,
            "embeddings": [[name, vec.tolist()] for name, vec in zip(g.node_names, emb)]}
