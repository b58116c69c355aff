"""Command-line entry point. Every command prints (or writes) one JSON report
that embeds the resolved configuration.

Exit codes: 0 success (and, for check commands, the check passed),
1 a check failed, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels, __version__
from .connecthub import evaluate_separation, generate, save_instance
from .homs import rp_core_with_witnesses, refinement_report
from .kg import KnowledgeGraph, LinkQuery, augment_inverses, load_kg, random_kg, serialize_kg
from .lift import lift, lift_fast
from .motifs import catalog, resolve_motifs
from .numenc import EncoderWeights, entity_forward, relation_forward, decode
from .wl import (Interner, all_conditions, dump_link_colors, dump_relation_colors, hcwl_colors,
                 motif_link_colors, same_partition, separated_at, separation_sweep, ultra_link_colors,
                 ultra_relation_colors)

log = logging.getLogger("kgmotif")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ULTRA_TEST = "ultra"


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("MOTIF_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MOTIF_SEED must be an integer, got {raw!r}") from None


# helpers

def _load(path: str, augment: bool) -> KnowledgeGraph:
    g = load_kg(path)
    return augment_inverses(g) if augment else g


def _parse_link(g: KnowledgeGraph, text: str) -> LinkQuery:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"link must be 'q,u,v', got {text!r}")
    return g.link(*parts)


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "pretty", "out", "log_level"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["backend"] = _kernels.BACKEND
    cfg["version"] = __version__
    return cfg


def _pretty(report: dict) -> str:
    if "table" in report:
        rows = report["table"]
        width = max(len(name) for name in rows) if rows else 4
        lines = [f"ConnectHub(k={report['config']['k']}), l={report['config']['l']}"]
        lines += [f"  {name:<{width}}  {acc:.2f}" for name, acc in rows.items()]
        return "\n".join(lines)
    return json.dumps(report, indent=2)


def _emit(args: argparse.Namespace, report: dict) -> None:
    report = {"command": args.command, **report, "config": _config(args)}
    text = _pretty(report) if args.pretty else json.dumps(report, sort_keys=False)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


# commands

def cmd_lift(args) -> int:
    g = _load(args.kg, args.augment)
    if args.fast:
        try:
            h = lift_fast(args.motifs, g)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        h = lift(resolve_motifs(args.motifs), g, threads=args.threads)
    _emit(args, {"lift": h.to_dict()})
    return EXIT_OK


def _motifs_or_ultra(spec: str):
    return None if spec == ULTRA_TEST else resolve_motifs(spec)


def cmd_separate(args) -> int:
    g = _load(args.kg, args.augment)
    l1, l2 = _parse_link(g, args.link1), _parse_link(g, args.link2)
    motifs = _motifs_or_ultra(args.motifs)
    ultra = motifs is None
    if args.sweep:
        res = separation_sweep(g, l1, l2, motifs, ultra=ultra, t_max=args.t_max, l_max=args.l_max)
        out = res.to_dict()
    else:
        sep = separated_at(g, l1, l2, motifs, ultra=ultra, t=args.t, l=args.l)
        out = {"link1": g.link_name(l1), "link2": g.link_name(l2), "separated": sep,
               "first_at": None}
    _emit(args, {"separation": out})
    return EXIT_OK


def cmd_wl_dump(args) -> int:
    g = _load(args.kg, args.augment)
    q = g.relation_id(args.q)
    motifs = _motifs_or_ultra(args.motifs)
    interner = Interner()
    if args.u is None:
        if motifs is None:
            rc = ultra_relation_colors(g, [q], args.t, interner)
        else:
            rc = hcwl_colors(lift(motifs, g, threads=args.threads), q, args.t, interner)
        dump = dump_relation_colors(rc, q)
        dump["stable_at"] = rc.stable_at()
    else:
        cond = [(q, g.node_id(args.u))]
        if motifs is None:
            lc = ultra_link_colors(g, args.t, args.l, cond, interner)
        else:
            lc = motif_link_colors(g, lift(motifs, g, threads=args.threads), args.t, args.l, cond, interner)
        dump = dump_link_colors(lc, g, *cond[0])
        dump["stable_at"] = lc.stable_at()
    _emit(args, {"coloring": dump})
    return EXIT_OK


def _core_entry(name: str, g: KnowledgeGraph, caps: dict) -> dict:
    res = rp_core_with_witnesses(g, **caps)
    c = res.core
    return {
        "name": name,
        "core": [list(t) for t in c.named_triples()],
        "core_nodes": list(c.node_names),
        "to_core": {g.node_names[v]: c.node_names[w] for v, w in enumerate(res.to_core.node_map)},
        "trivial": c.num_relations == 1 and c.num_nodes == 2 and len(c.facts) == 1,
    }


def cmd_core(args) -> int:
    caps = {"max_nodes": args.max_nodes, "max_relations": args.max_relations}
    if bool(args.kg) == bool(args.motifs):
        raise UsageError("give exactly one of --kg or --motifs")
    if args.kg:
        entries = [_core_entry(args.kg, load_kg(args.kg), caps)]
    else:
        entries = [_core_entry(p.name, p.pattern, caps) for p in resolve_motifs(args.motifs)]
    _emit(args, {"cores": entries})
    return EXIT_OK


def cmd_refine(args) -> int:
    rep = refinement_report(resolve_motifs(args.from_spec), resolve_motifs(args.to_spec),
                            max_nodes=args.max_nodes, max_relations=args.max_relations)
    _emit(args, {"refinement": rep.to_dict()})
    return EXIT_OK


def cmd_connecthub(args) -> int:
    try:
        inst = generate(args.k, args.l, args.n_graphs, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    names = args.eval.split(",") if args.eval else ["ultra4"] + [f"f{m}star" for m in range(2, args.k + 2)]
    if not args.augment:
        log.info("evaluating on the graphs as generated (no inverse relations)")
    else:
        log.info("adding inverse relations before evaluation (disable with --no-augment)")
    table, per_graph = {}, {}
    for name in names:
        t0 = time.perf_counter()
        motifs = _motifs_or_ultra(name)
        ev = evaluate_separation(inst, motifs, args.t, args.layers, name=name, augment=args.augment,
                                 ultra=motifs is None, threads=args.threads)
        table[name] = ev.accuracy
        per_graph[name] = list(ev.per_graph)
        log.info("%s: %.2f (%.1fs)", name, ev.accuracy, time.perf_counter() - t0)
    report = {"table": table, "per_graph": per_graph,
              "inverse_augmentation": bool(args.augment)}
    if args.save_dir:
        report["manifest"] = str(save_instance(inst, args.save_dir))
    args.l = inst.l
    _emit(args, report)
    return EXIT_OK


def _equiv_trial(g: KnowledgeGraph, t_max: int, l_max: int,
                 ultra_fn: Callable = ultra_link_colors) -> list[list[int]]:
    """(t, l) grid points where the two tests' link partitions differ."""
    bad = []
    conds = all_conditions(g)
    h = lift(catalog("f2path"), g)
    for t in range(1, t_max + 1):
        a = motif_link_colors(g, h, t, l_max, conds)
        b = ultra_fn(g, t, l_max, conds)
        for l in range(1, l_max + 1):
            if not same_partition(a.all_link_colors(l), b.all_link_colors(l)):
                bad.append([t, l])
    return bad


def cmd_ultra_equiv(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    if args.trials == 0:
        log.warning("zero trials: the check passes vacuously")
    trials, counterexample = [], None
    for i in range(args.trials):
        g = random_kg(rng, args.max_nodes, args.max_rels, args.p)
        bad = _equiv_trial(g, args.t, args.l, ULTRA_IMPL)
        trials.append({"trial": i, "nodes": g.num_nodes, "relations": g.num_relations,
                       "facts": len(g.facts), "pass": not bad})
        if bad and counterexample is None:
            counterexample = {"trial": i, "triples": [list(t) for t in g.named_triples()],
                              "relations": list(g.relation_names), "nodes": list(g.node_names),
                              "mismatch_at": bad}
    ok = all(t["pass"] for t in trials)
    _emit(args, {"passed": ok, "n_pass": sum(t["pass"] for t in trials), "trials": trials,
                 "vacuous": args.trials == 0, "counterexample": counterexample})
    return EXIT_OK if ok else EXIT_FAIL


# test hook: replaced in negative-control tests
ULTRA_IMPL: Callable = ultra_link_colors


def cmd_numenc_probe(args) -> int:
    g = _load(args.kg, args.augment)
    motifs = resolve_motifs(args.motifs)
    w = EncoderWeights.init(args.seed, motifs, d=args.d, T=args.t, L=args.l)
    if args.save_weights:
        w.save(args.save_weights)
    h = lift(motifs, g, threads=args.threads)
    links = [_parse_link(g, args.link)] + ([_parse_link(g, args.link2)] if args.link2 else [])
    out = []
    embeds = []
    for link in links:
        rel = relation_forward(h, link.relation, w)[-1]
        ent = entity_forward(g, rel, link.source, link.relation, w)[-1]
        vec = ent[link.target]
        embeds.append(vec)
        out.append({"link": g.link_name(link), "score": float(decode(vec, w)[0]),
                    "embedding": vec.tolist()})
    report = {"links": out}
    if len(embeds) == 2:
        report["identical_embeddings"] = bool(np.array_equal(embeds[0], embeds[1]))
    _emit(args, report)
    return EXIT_OK


def cmd_gen_random(args) -> int:
    rng = np.random.Generator(np.random.Philox(args.seed))
    graphs = []
    for i in range(args.n_graphs):
        g = random_kg(rng, args.max_nodes, args.max_rels, args.p)
        entry = {"nodes": list(g.node_names), "relations": list(g.relation_names), "facts": len(g.facts)}
        if args.out_dir:
            d = Path(args.out_dir)
            d.mkdir(parents=True, exist_ok=True)
            path = d / f"random_{i}.tsv"
            path.write_text(serialize_kg(g), encoding="utf-8")
            entry["file"] = str(path)
        else:
            entry["triples"] = [list(t) for t in g.named_triples()]
        graphs.append(entry)
    _emit(args, {"graphs": graphs})
    return EXIT_OK


# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $MOTIF_SEED or 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for per-motif evaluation")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--pretty", action="store_true", help="human-readable rendering")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    p = argparse.ArgumentParser(prog="kgmotif", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    def kg_args(sp, augment_default=False):
        sp.add_argument("--kg", required=True, help="triple file")
        sp.add_argument("--augment", dest="augment", action="store_true", default=augment_default,
                        help="add inverse relations first")
        sp.add_argument("--no-augment", dest="augment", action="store_false")

    sp = add("lift", cmd_lift, "lift a KG to a relational hypergraph")
    kg_args(sp)
    sp.add_argument("--motifs", required=True, help="catalog name, motif JSON file, or comma list")
    sp.add_argument("--fast", action="store_true", help="sparse-product path (ultra4, f2path, f3path)")

    sp = add("separate", cmd_separate, "do two links get different colours?")
    kg_args(sp)
    sp.add_argument("--motifs", required=True, help=f"motif spec, or '{ULTRA_TEST}' for the rcol/ecol test")
    sp.add_argument("--link1", required=True, help="q,u,v")
    sp.add_argument("--link2", required=True, help="q,u,v")
    sp.add_argument("--t", type=int, default=3)
    sp.add_argument("--l", type=int, default=3)
    sp.add_argument("--sweep", action="store_true", help="search the (t, l) grid for the first separation")
    sp.add_argument("--t-max", type=int, default=8)
    sp.add_argument("--l-max", type=int, default=8)

    sp = add("wl-dump", cmd_wl_dump, "dump stage-one or link colours")
    kg_args(sp)
    sp.add_argument("--motifs", required=True)
    sp.add_argument("--q", required=True, help="query relation name")
    sp.add_argument("--u", help="source node; omit for stage-one relation colours")
    sp.add_argument("--t", type=int, default=3)
    sp.add_argument("--l", type=int, default=3)

    sp = add("core", cmd_core, "relation-preserving core of a KG or of motifs")
    sp.add_argument("--kg")
    sp.add_argument("--motifs")
    sp.add_argument("--max-nodes", type=int, default=16)
    sp.add_argument("--max-relations", type=int, default=12)

    sp = add("refine", cmd_refine, "necessary-condition refinement report")
    sp.add_argument("--from", dest="from_spec", required=True)
    sp.add_argument("--to", dest="to_spec", required=True)
    sp.add_argument("--max-nodes", type=int, default=16)
    sp.add_argument("--max-relations", type=int, default=12)

    sp = add("connecthub", cmd_connecthub, "hub-detection accuracy table")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--l", type=int, default=None, help="relations per class (default k+1)")
    sp.add_argument("--n-graphs", type=int, default=1)
    sp.add_argument("--eval", help=f"comma list of motif specs ('{ULTRA_TEST}' = rcol/ecol test)")
    sp.add_argument("--t", type=int, default=2)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--augment", dest="augment", action="store_true", default=True,
                    help="add inverse relations before evaluating (default)")
    sp.add_argument("--no-augment", dest="augment", action="store_false")
    sp.add_argument("--save-dir", help="also write the instance (triple files + manifest)")

    sp = add("ultra-equiv", cmd_ultra_equiv, "fuzz the four-motif test against the 2-path motif test")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--max-nodes", type=int, default=12)
    sp.add_argument("--max-rels", type=int, default=5)
    sp.add_argument("--p", type=float, default=0.15)
    sp.add_argument("--t", type=int, default=4)
    sp.add_argument("--l", type=int, default=4)

    sp = add("numenc-probe", cmd_numenc_probe, "numeric encoder scores and embeddings")
    kg_args(sp)
    sp.add_argument("--motifs", required=True)
    sp.add_argument("--link", required=True, help="q,u,v")
    sp.add_argument("--link2", help="second link; reports whether embeddings are bit-identical")
    sp.add_argument("--d", type=int, default=32)
    sp.add_argument("--t", type=int, default=4)
    sp.add_argument("--l", type=int, default=4)
    sp.add_argument("--save-weights", help="write the weights as JSON")

    sp = add("gen-random", cmd_gen_random, "random Erdos-Renyi KGs")
    sp.add_argument("--n-graphs", type=int, default=1)
    sp.add_argument("--max-nodes", type=int, default=12)
    sp.add_argument("--max-rels", type=int, default=5)
    sp.add_argument("--p", type=float, default=0.15)
    sp.add_argument("--out-dir")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = default_seed()
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"kgmotif {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
