"""Enumerate connected multigraphs (loops allowed) with at most MAX_DARTS darts.

Graphs are grown one edge or loop at a time from a single vertex and
deduplicated up to isomorphism, then written as gzipped JSON for the census
equivalence tests. Needs networkx (not a package dependency).

    python scripts/build_graph_corpus.py --max-darts 14 --out tests/data/graphs_le14_darts.json.gz
"""

import argparse
import gzip
import json
from collections import defaultdict

import networkx as nx


def n_darts(g: nx.MultiGraph) -> int:
    return sum(1 if u == v else 2 for u, v in g.edges())


def bucket_key(g: nx.MultiGraph):
    mult = defaultdict(int)
    for u, v in g.edges():
        mult[min(u, v), max(u, v)] += 1
    return (
        nx.weisfeiler_lehman_graph_hash(nx.Graph(g)),
        tuple(sorted(d for _, d in g.degree())),
        tuple(sorted(mult.values())),
    )


def grow(g: nx.MultiGraph, max_darts: int):
    dc, n = n_darts(g), g.number_of_nodes()
    if dc + 1 <= max_darts:
        for v in range(n):
            h = g.copy()
            h.add_edge(v, v)
            yield h
    if dc + 2 <= max_darts:
        for u in range(n):
            for v in range(u + 1, n + 1):
                h = g.copy()
                h.add_edge(u, v)
                yield h


def enumerate_graphs(max_darts: int) -> list[nx.MultiGraph]:
    seed = nx.MultiGraph()
    seed.add_node(0)
    found = [seed]
    buckets = defaultdict(list)
    frontier = [seed]
    while frontier:
        nxt = []
        for g in frontier:
            for h in grow(g, max_darts):
                key = bucket_key(h)
                if any(nx.is_isomorphic(h, k) for k in buckets[key]):
                    continue
                buckets[key].append(h)
                nxt.append(h)
                found.append(h)
        frontier = nxt
    return found


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-darts", type=int, default=14)
    ap.add_argument("--out", default="tests/data/graphs_le14_darts.json.gz")
    args = ap.parse_args()
    graphs = [g for g in enumerate_graphs(args.max_darts) if g.number_of_edges()]
    rows = []
    for g in graphs:
        rows.append({
            "vertices": sorted(g.nodes()),
            "edges": sorted([min(u, v), max(u, v)] for u, v in g.edges() if u != v),
            "loops": sorted(u for u, v in g.edges() if u == v),
        })
    rows.sort(key=lambda r: (2 * len(r["edges"]) + len(r["loops"]), len(r["vertices"]), r["edges"], r["loops"]))
    with gzip.open(args.out, "wt") as fh:
        json.dump({"max_darts": args.max_darts, "graphs": rows}, fh)
    print(f"{len(rows)} connected multigraphs with 1..{args.max_darts} darts -> {args.out}")


if __name__ == "__main__":
    main()
