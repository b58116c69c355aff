"""Graph motifs: a connected pattern graph plus an order over its relations."""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .kg import KGError, KnowledgeGraph


class MotifError(KGError):
    pass


class CatalogError(MotifError):
    pass


@dataclass(frozen=True, eq=False)
class Motif:
    """Pattern graph with an ordered tuple over its relation variables.

    Every relation variable labels exactly one fact, so the arity of the
    lifted hyperedge type equals the number of pattern facts.
    """

    name: str
    pattern: KnowledgeGraph
    order: tuple[int, ...]

    def __post_init__(self):
        g = self.pattern
        if sorted(self.order) != list(range(g.num_relations)):
            raise MotifError(f"motif {self.name}: order must list every relation exactly once")
        counts = [len(g.facts_of(r)) for r in range(g.num_relations)]
        if any(c != 1 for c in counts):
            raise MotifError(f"motif {self.name}: each relation variable must label exactly one fact")
        if g.num_nodes == 0 or not _connected(g):
            raise MotifError(f"motif {self.name}: pattern graph must be connected")

    @property
    def arity(self) -> int:
        return len(self.order)

    @classmethod
    def from_facts(cls, name: str, facts: Sequence[tuple[str, str, str]],
                   order: Sequence[str] | None = None) -> Motif:
        """``facts`` are (relvar, nodevar, nodevar); order defaults to fact order."""
        if order is None:
            order = [r for r, _, _ in facts]
        if len(set(order)) != len(order):
            raise MotifError(f"motif {name}: order repeats a relation variable")
        used = [r for r, _, _ in facts]
        if len(set(used)) != len(used):
            raise MotifError(f"motif {name}: relation variable used by more than one fact")
        if set(used) != set(order):
            raise MotifError(f"motif {name}: order and facts mention different relation variables")
        g = KnowledgeGraph.from_triples([(h, r, t) for r, h, t in facts], relations=order)
        return cls(name, g, tuple(g.relation_id(r) for r in order))

    def to_dict(self) -> dict:
        g = self.pattern
        return {
            "name": self.name,
            "order": [g.relation_names[r] for r in self.order],
            "facts": [[g.relation_names[f.relation], g.node_names[f.head], g.node_names[f.tail]]
                      for f in sorted(g.facts)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Motif:
        try:
            name, order, facts = d["name"], d["order"], d["facts"]
        except KeyError as exc:
            raise MotifError(f"motif definition missing key {exc}") from None
        if not all(isinstance(f, (list, tuple)) and len(f) == 3 for f in facts):
            raise MotifError(f"motif {name}: every fact must be [relvar, nodevar, nodevar]")
        return cls.from_facts(str(name), [tuple(map(str, f)) for f in facts], [str(r) for r in order])

    def renamed(self, name: str) -> Motif:
        return Motif(name, self.pattern, self.order)

    def __repr__(self) -> str:
        return f"Motif({self.name}, arity={self.arity})"


def _connected(g: KnowledgeGraph) -> bool:
    adj: dict[int, set[int]] = {v: set() for v in range(g.num_nodes)}
    for f in g.facts:
        adj[f.head].add(f.tail)
        adj[f.tail].add(f.head)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.num_nodes


# catalog

def _m(name: str, *facts: tuple[str, str, str]) -> Motif:
    return Motif.from_facts(name, list(facts))


# h2t(a, b): the tail of a is the head of b; t2h is its mirror image
H2T = _m("h2t", ("a", "x", "y"), ("b", "y", "z"))
T2H = _m("t2h", ("a", "y", "x"), ("b", "z", "y"))
H2H = _m("h2h", ("a", "y", "x"), ("b", "y", "z"))
T2T = _m("t2t", ("a", "x", "y"), ("b", "z", "y"))

TFH = _m("tfh", ("a", "u", "v"), ("b", "v", "w"), ("c", "w", "x"))
TFT = _m("tft", ("a", "u", "v"), ("b", "v", "w"), ("c", "x", "w"))
HFH = _m("hfh", ("a", "v", "u"), ("b", "v", "w"), ("c", "x", "w"))
HFT = _m("hft", ("a", "v", "u"), ("b", "v", "w"), ("c", "w", "x"))

PARA = _m("para", ("a", "x", "y"), ("b", "x", "y"))
LOOP = _m("loop", ("a", "x", "x"))

MAX_PATH = 4
MAX_STAR = 8


def path_motif(directions: Sequence[bool], name: str | None = None) -> Motif:
    """Path u1 - u2 - ... with edge j pointing forward iff directions[j]."""
    facts = []
    for j, fwd in enumerate(directions):
        a, b = f"u{j + 1}", f"u{j + 2}"
        facts.append((f"r{j + 1}", a, b) if fwd else (f"r{j + 1}", b, a))
    if name is None:
        name = f"path{len(directions)}_" + "".join("f" if d else "b" for d in directions)
    return Motif.from_facts(name, facts)


def star_motif(k: int) -> Motif:
    """k-star r1(v1,u), ..., rk(vk,u)."""
    return Motif.from_facts(f"star{k}", [(f"r{i}", f"v{i}", "u") for i in range(1, k + 1)])


_NAMED_2 = {(True, True): H2T, (True, False): T2T, (False, True): H2H}
_NAMED_3 = {(True, True, True): TFH, (True, True, False): TFT,
            (False, True, False): HFH, (False, True, True): HFT}


def _path_orientations(k: int) -> list[tuple[bool, ...]]:
    """One representative per isomorphism class of k-edge oriented paths.

    Reading the path from the other end reverses the edge sequence and flips
    every direction; the named representatives are preferred when present."""
    named = _NAMED_2 if k == 2 else _NAMED_3 if k == 3 else {}
    reps = []
    seen = set()
    for d in itertools.product((True, False), repeat=k):
        if d in seen:
            continue
        rev = tuple(not x for x in reversed(d))
        seen.update((d, rev))
        reps.append(rev if rev in named and d not in named else d)
    return reps


def path_family(n: int) -> list[Motif]:
    """All oriented paths with 2..n edges, one per isomorphism class."""
    out = []
    for k in range(2, n + 1):
        named = _NAMED_2 if k == 2 else _NAMED_3 if k == 3 else {}
        for d in _path_orientations(k):
            out.append(named.get(d) or path_motif(d))
    return out


def star_family(m: int) -> list[Motif]:
    """k-stars for 2 <= k <= m."""
    return [star_motif(k) for k in range(2, m + 1)]


_PATH_RE = re.compile(r"^f(\d+)path$")
_STAR_RE = re.compile(r"^f(\d+)star$")


def catalog_names() -> list[str]:
    names = ["empty", "h2t", "ultra4", "para", "loop"]
    names += [f"f{n}path" for n in range(2, MAX_PATH + 1)]
    names += [f"f{m}star" for m in range(2, MAX_STAR + 1)]
    return names


def catalog(name: str) -> list[Motif]:
    """Named motif set, sorted by motif name."""
    if name == "empty":
        out: list[Motif] = []
    elif name == "h2t":
        out = [H2T]
    elif name == "ultra4":
        out = [H2T, T2H, H2H, T2T]
    elif name == "para":
        out = [PARA]
    elif name == "loop":
        out = [LOOP]
    elif (mt := _PATH_RE.match(name)) and 2 <= int(mt.group(1)) <= MAX_PATH:
        out = path_family(int(mt.group(1)))
    elif (mt := _STAR_RE.match(name)) and 2 <= int(mt.group(1)) <= MAX_STAR:
        out = star_family(int(mt.group(1)))
    else:
        raise CatalogError(f"unknown motif set {name!r}; valid names: {', '.join(catalog_names())}")
    return sorted(out, key=lambda p: p.name)


def canonical_motifs(motifs: Iterable[Motif]) -> list[Motif]:
    """Sort by name, rejecting two different motifs under one name."""
    by_name: dict[str, Motif] = {}
    for p in motifs:
        prev = by_name.get(p.name)
        if prev is not None and prev is not p and prev.to_dict() != p.to_dict():
            raise MotifError(f"two different motifs named {p.name!r}")
        by_name[p.name] = p
    return [by_name[n] for n in sorted(by_name)]


def load_motifs(path: str | Path) -> list[Motif]:
    """Read one motif object or a list of them from a JSON file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    items = data if isinstance(data, list) else [data]
    return canonical_motifs(Motif.from_dict(d) for d in items)


def resolve_motifs(spec: str) -> list[Motif]:
    """Catalog name, motif JSON path, or a comma-separated mix of both."""
    out: list[Motif] = []
    for part in (s.strip() for s in spec.split(",")):
        if not part:
            continue
        if Path(part).suffix == ".json" or Path(part).is_file():
            out.extend(load_motifs(part))
        else:
            out.extend(catalog(part))
    return canonical_motifs(out)
