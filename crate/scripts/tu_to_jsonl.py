#!/usr/bin/env python3
"""Convert a TU-format graph dataset directory into the smae JSONL corpus format.

Usage: tu_to_jsonl.py <dir> <NAME> <out.jsonl>

Reads NAME_A.txt, NAME_graph_indicator.txt, NAME_graph_labels.txt and, when
present, NAME_node_labels.txt / NAME_node_attributes.txt. Graph labels are
remapped to 0..C-1 in sorted order, node labels likewise. Self-loops and
duplicate undirected edges are dropped; each edge is written once with i < j.
"""
import json
import os
import sys


def read_ints(path):
    with open(path) as f:
        return [[int(x) for x in line.replace(",", " ").split()] for line in f if line.strip()]


def main():
    root, name, out = sys.argv[1:4]
    p = lambda suffix: os.path.join(root, f"{name}_{suffix}.txt")
    indicator = [r[0] - 1 for r in read_ints(p("graph_indicator"))]
    glabels = [r[0] for r in read_ints(p("graph_labels"))]
    gmap = {v: i for i, v in enumerate(sorted(set(glabels)))}

    node_labels = None
    if os.path.exists(p("node_labels")):
        raw = [r[0] for r in read_ints(p("node_labels"))]
        nmap = {v: i for i, v in enumerate(sorted(set(raw)))}
        node_labels = [nmap[v] for v in raw]
    attrs = None
    if os.path.exists(p("node_attributes")):
        with open(p("node_attributes")) as f:
            attrs = [[float(x) for x in line.replace(",", " ").split()] for line in f if line.strip()]

    num_graphs = len(glabels)
    members = [[] for _ in range(num_graphs)]
    for node, g in enumerate(indicator):
        members[g].append(node)
    local = {}
    for g, nodes in enumerate(members):
        for k, node in enumerate(nodes):
            local[node] = k

    edges = [set() for _ in range(num_graphs)]
    for a, b in read_ints(p("A")):
        a, b = a - 1, b - 1
        g = indicator[a]
        assert indicator[b] == g, "edge crosses graphs"
        i, j = local[a], local[b]
        if i != j:
            edges[g].add((min(i, j), max(i, j)))

    with open(out, "w") as f:
        for g, nodes in enumerate(members):
            rec = {"n": len(nodes), "edges": [list(e) for e in sorted(edges[g])]}
            if node_labels is not None:
                rec["node_labels"] = [node_labels[v] for v in nodes]
            if attrs is not None:
                rec["features"] = [attrs[v] for v in nodes]
            rec["label"] = gmap[glabels[g]]
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
