"""Synthetic attributed graphs and random tree queries for benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .graphs import AttributedGraph, GraphFormatError, GraphSchema


def random_graph(rng: np.random.Generator, n_vertices: int = 200, n_types: int = 3,
                 attrs_per_type: int = 2, dict_size_range: tuple[int, int] = (16, 256),
                 avg_degree: float = 3.0) -> AttributedGraph:
    """A connected-ish heterogeneous graph with numeric (ordinal) attributes."""
    g = AttributedGraph()
    type_names = [chr(ord("A") + t) for t in range(n_types)]
    # split the population roughly evenly, every type gets its share
    counts = [n_vertices // n_types] * n_types
    for i in range(n_vertices - sum(counts)):
        counts[i % n_types] += 1
    attr_pools: dict[tuple[str, str], list[str]] = {}
    for t, tname in enumerate(type_names):
        for a in range(attrs_per_type):
            size = int(rng.integers(dict_size_range[0], dict_size_range[1] + 1))
            base = int(rng.integers(0, 50))
            pool = [str(base + 3 * i) for i in range(size)]
            attr_pools[(tname, f"x{a}")] = pool
    ext = 0
    for t, tname in enumerate(type_names):
        for _ in range(counts[t]):
            attrs = {
                f"x{a}": attr_pools[(tname, f"x{a}")][int(rng.integers(0, len(attr_pools[(tname, f"x{a}")])))]
                for a in range(attrs_per_type)
            }
            g.add_vertex(tname, f"v{ext}", attrs)
            ext += 1
    n_edges = int(avg_degree * n_vertices / 2)
    tries = 0
    added = 0
    while added < n_edges and tries < n_edges * 20:
        tries += 1
        a = int(rng.integers(0, n_vertices))
        b = int(rng.integers(0, n_vertices))
        if a == b:
            continue
        try:
            g.add_edge(f"v{a}", f"v{b}")
            added += 1
        except GraphFormatError:
            continue
    g.validate()
    return g


def _pick_predicate(rng: np.random.Generator, attr_name: str, values: list[str],
                    kinds=("eq", "lt", "iv")) -> str:
    kind = kinds[int(rng.integers(0, len(kinds)))]
    nums = sorted(float(v) for v in values)
    n = len(nums)
    if kind == "eq":
        v = values[int(rng.integers(0, n))]
        return f"{attr_name} = {v}"
    # range predicates select a fraction of the dictionary in [0.3, 0.8) so
    # multi-hop queries keep a healthy survival rate
    frac = 0.3 + 0.5 * rng.random()
    width = max(1, int(frac * n))
    if kind == "lt":
        op = ("<", "<=", ">", ">=")[int(rng.integers(0, 4))]
        if op in ("<", "<="):
            bound = nums[min(n - 1, width)]
        else:
            bound = nums[max(0, n - 1 - width)]
        return f"{attr_name} {op} {bound:g}"
    lo_i = int(rng.integers(0, max(1, n - width)))
    hi_i = min(n - 1, lo_i + width)
    return f"{attr_name} in {nums[lo_i]:g} {nums[hi_i]:g}"


def random_query_text(rng: np.random.Generator, schema: GraphSchema,
                      n_targets: int = 4, kinds=("eq", "lt", "iv"),
                      multi_pred_prob: float = 0.2) -> str:
    """Random rooted-tree query text, valid against the schema by construction."""
    types = sorted(schema.types)
    lines = []
    slot_types: list[str] = []
    edges: list[tuple[int, int]] = []
    # root: a type that has at least one posting type if possible
    candidates = [t for t in types if schema.types[t].posting_types] or types
    slot_types.append(candidates[int(rng.integers(0, len(candidates)))])
    while len(slot_types) < n_targets:
        parents = [i for i, t in enumerate(slot_types) if schema.types[t].posting_types]
        if not parents:
            break
        p = parents[int(rng.integers(0, len(parents)))]
        ptypes = schema.types[slot_types[p]].posting_types
        child = ptypes[int(rng.integers(0, len(ptypes)))]
        edges.append((p, len(slot_types)))
        slot_types.append(child)
    for i, t in enumerate(slot_types):
        ts = schema.types[t]
        attr_names = sorted(ts.attrs)
        n_preds = 2 if (len(attr_names) > 1 and rng.random() < multi_pred_prob) else 1
        chosen = rng.choice(len(attr_names), size=n_preds, replace=False)
        for ai in np.atleast_1d(chosen):
            a = attr_names[int(ai)]
            pred = _pick_predicate(rng, a, ts.attrs[a].values, kinds)
            lines.append(f"Q s{i} {t} {pred}")
        if n_preds > 1 and rng.random() < 0.5:
            lines.append(f"QC s{i} ANY")
    lines.append("QS s0")
    for p, c in edges:
        lines.append(f"QE s{p} s{c}")
    return "\n".join(lines) + "\n"


def graph_to_text(g: AttributedGraph) -> str:
    """Serialize a graph back to the line-oriented ingest format."""
    lines = []
    for v in g.vertices:
        attrs = " ".join(f"{k}={v.attrs[k]}" for k in sorted(v.attrs))
        lines.append(f"V {v.vtype} {v.ext_id} {attrs}")
    seen = set()
    for i, nbrs in enumerate(g.neighbors):
        for lst in nbrs.values():
            for j in lst:
                key = (min(i, j), max(i, j))
                if key in seen:
                    continue
                seen.add(key)
                lines.append(f"E {g.vertices[i].ext_id} {g.vertices[j].ext_id}")
    return "\n".join(lines) + "\n"
