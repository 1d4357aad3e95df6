"""Plaintext attributed graphs, public schema, padding, and graph encryption.

The plaintext ingest format is line oriented::

    V <type> <ext-id> <attr>=<value> ...
    E <ext-id> <ext-id>

Vertices of one type must carry the same attribute names. Edges are
undirected and typed implicitly by their endpoint types; adjacency is kept
as posting lists (per neighbor type, in ext-id appearance order).

Encryption turns every private value into a one-hot vector over a public
dictionary and splits it with replicated secret sharing. Before sharing,
posting lists are padded inside groups of ``k`` same-type vertices so that
group members have identical per-type degrees; the dummy entries are shares
of the zero vector and are indistinguishable from true entries.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .bits import BitVector, pack_bits, words_for
from .rss import next_party


class GraphFormatError(ValueError):
    """Malformed graph text or schema violation."""


@dataclass
class Vertex:
    vtype: str
    ext_id: str
    attrs: dict[str, str]


class AttributedGraph:
    """Typed vertices with typed attributes and per-type posting lists."""

    def __init__(self):
        self.vertices: list[Vertex] = []
        self.index_of: dict[str, int] = {}
        self.neighbors: list[dict[str, list[int]]] = []
        self.type_members: dict[str, list[int]] = {}
        self._edges: set[tuple[int, int]] = set()

    def add_vertex(self, vtype: str, ext_id: str, attrs: dict[str, str]) -> int:
        if ext_id in self.index_of:
            raise GraphFormatError(f"duplicate vertex id {ext_id!r}")
        if not attrs:
            raise GraphFormatError(f"vertex {ext_id!r} has no attributes")
        idx = len(self.vertices)
        self.vertices.append(Vertex(vtype, ext_id, dict(attrs)))
        self.index_of[ext_id] = idx
        self.neighbors.append({})
        self.type_members.setdefault(vtype, []).append(idx)
        return idx

    def add_edge(self, a: str, b: str) -> None:
        try:
            ia, ib = self.index_of[a], self.index_of[b]
        except KeyError as exc:
            raise GraphFormatError(f"edge references unknown vertex {exc.args[0]!r}") from None
        if ia == ib:
            raise GraphFormatError(f"self-loop on {a!r}")
        key = (min(ia, ib), max(ia, ib))
        if key in self._edges:
            raise GraphFormatError(f"duplicate edge {a!r} -- {b!r}")
        self._edges.add(key)
        self.neighbors[ia].setdefault(self.vertices[ib].vtype, []).append(ib)
        self.neighbors[ib].setdefault(self.vertices[ia].vtype, []).append(ia)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def posting_list(self, idx: int, neighbor_type: str) -> list[int]:
        return self.neighbors[idx].get(neighbor_type, [])

    def validate(self) -> None:
        for vtype, members in self.type_members.items():
            names = {frozenset(self.vertices[i].attrs) for i in members}
            if len(names) > 1:
                raise GraphFormatError(
                    f"vertices of type {vtype!r} disagree on attribute names"
                )


def parse_graph_text(text: str) -> AttributedGraph:
    g = AttributedGraph()
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "V":
                if len(parts) < 4:
                    raise GraphFormatError("vertex line needs type, id and attributes")
                attrs = {}
                for chunk in parts[3:]:
                    name, sep, value = chunk.partition("=")
                    if not sep or not name or not value:
                        raise GraphFormatError(f"bad attribute {chunk!r}")
                    if name in attrs:
                        raise GraphFormatError(f"repeated attribute {name!r}")
                    attrs[name] = value
                g.add_vertex(parts[1], parts[2], attrs)
            elif parts[0] == "E":
                if len(parts) != 3:
                    raise GraphFormatError("edge line needs exactly two vertex ids")
                edges.append((parts[1], parts[2]))
            else:
                raise GraphFormatError(f"unknown record {parts[0]!r}")
        except GraphFormatError as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    for a, b in edges:
        g.add_edge(a, b)
    g.validate()
    return g


# ---------------------------------------------------------------------------
# public schema / dictionaries
# ---------------------------------------------------------------------------


def _numeric(value: str) -> float | None:
    try:
        return float(value)
    except ValueError:
        return None


@dataclass
class AttrSchema:
    values: list[str]
    ordinal: bool
    unique: bool
    index_of: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index_of:
            self.index_of = {v: i for i, v in enumerate(self.values)}

    @property
    def domain_size(self) -> int:
        return len(self.values)


@dataclass
class TypeSchema:
    ext_ids: list[str]
    attrs: dict[str, AttrSchema]
    posting_types: list[str]
    groups: list[list[int]]
    padded_len: dict[str, list[int]]

    @property
    def population(self) -> int:
        return len(self.ext_ids)

    def max_padded(self, neighbor_type: str) -> int:
        lens = self.padded_len.get(neighbor_type)
        return max(lens) if lens else 0


@dataclass
class GraphSchema:
    k: int
    types: dict[str, TypeSchema]

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "k": self.k,
            "types": {
                t: {
                    "ext_ids": ts.ext_ids,
                    "attrs": {
                        a: {"values": s.values, "ordinal": s.ordinal, "unique": s.unique}
                        for a, s in sorted(ts.attrs.items())
                    },
                    "posting_types": ts.posting_types,
                    "groups": ts.groups,
                    "padded_len": {n: ts.padded_len[n] for n in sorted(ts.padded_len)},
                }
                for t, ts in sorted(self.types.items())
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "GraphSchema":
        doc = json.loads(text)
        types = {}
        for t, td in doc["types"].items():
            attrs = {
                a: AttrSchema(ad["values"], ad["ordinal"], ad["unique"])
                for a, ad in td["attrs"].items()
            }
            types[t] = TypeSchema(
                ext_ids=td["ext_ids"],
                attrs=attrs,
                posting_types=td["posting_types"],
                groups=[list(gr) for gr in td["groups"]],
                padded_len={n: list(v) for n, v in td["padded_len"].items()},
            )
        return GraphSchema(k=doc["k"], types=types)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_json().encode()).digest()


def encode_one_hot(value: str, attr: AttrSchema) -> BitVector:
    try:
        idx = attr.index_of[value]
    except KeyError:
        raise GraphFormatError(f"value {value!r} not in dictionary") from None
    return BitVector.one_hot(attr.domain_size, idx)


def decode_one_hot(vec: BitVector, attr: AttrSchema) -> str | None:
    """Dictionary value for a one-hot vector; ``None`` marks a dummy (all-zero)."""
    idx = vec.hot_index()
    return None if idx is None else attr.values[idx]


# ---------------------------------------------------------------------------
# k-group padding
# ---------------------------------------------------------------------------


def pad_k_groups(graph: AttributedGraph, k: int):
    """Partition each type into groups of >= k vertices and compute padded lengths.

    Vertices are ordered by total posting length and chunked, which keeps
    group members' lengths close and the padding small; a short residual
    chunk merges into the previous group. Returns ``(groups, padded_len)``
    keyed by type, with local vertex indices.
    """
    if k < 2:
        raise GraphFormatError("k must be at least 2")
    groups: dict[str, list[list[int]]] = {}
    padded: dict[str, dict[str, list[int]]] = {}
    for vtype, members in graph.type_members.items():
        if len(members) < k:
            raise GraphFormatError(
                f"type {vtype!r} has {len(members)} vertices, fewer than k={k}"
            )
        ptypes = sorted({t for i in members for t in graph.neighbors[i]})
        order = sorted(
            range(len(members)),
            key=lambda li: (sum(len(graph.posting_list(members[li], t)) for t in ptypes), li),
        )
        chunks = [order[i:i + k] for i in range(0, len(order), k)]
        if len(chunks) > 1 and len(chunks[-1]) < k:
            chunks[-2].extend(chunks.pop())
        lens = {t: [0] * len(members) for t in ptypes}
        for chunk in chunks:
            for t in ptypes:
                target = max(len(graph.posting_list(members[li], t)) for li in chunk)
                for li in chunk:
                    lens[t][li] = target
        groups[vtype] = chunks
        padded[vtype] = lens
    return groups, padded


def build_schema(graph: AttributedGraph, k: int) -> GraphSchema:
    graph.validate()
    groups, padded = pad_k_groups(graph, k)
    types: dict[str, TypeSchema] = {}
    for vtype, members in sorted(graph.type_members.items()):
        attr_names = sorted(graph.vertices[members[0]].attrs)
        attrs = {}
        for name in attr_names:
            raw = [graph.vertices[i].attrs[name] for i in members]
            distinct = sorted(set(raw))
            nums = [_numeric(v) for v in distinct]
            ordinal = all(x is not None for x in nums)
            if ordinal:
                distinct.sort(key=lambda v: (_numeric(v), v))
            attrs[name] = AttrSchema(distinct, ordinal, unique=len(set(raw)) == len(raw))
        types[vtype] = TypeSchema(
            ext_ids=[graph.vertices[i].ext_id for i in members],
            attrs=attrs,
            posting_types=sorted({t for i in members for t in graph.neighbors[i]}),
            groups=groups[vtype],
            padded_len=padded[vtype],
        )
    return GraphSchema(k=k, types=types)


# ---------------------------------------------------------------------------
# encryption
# ---------------------------------------------------------------------------


@dataclass
class TypePartyShare:
    """One party's share matrices for every vertex of one type.

    Posting tensors are stacked to the type's maximum padded length; slots
    past a vertex's padded length are public structural zeros.
    """

    id_a: np.ndarray
    id_b: np.ndarray
    attrs: dict[str, tuple[np.ndarray, np.ndarray]]
    posting: dict[str, tuple[np.ndarray, np.ndarray]]


@dataclass
class GraphShare:
    party_index: int
    schema: GraphSchema
    types: dict[str, TypePartyShare]


def _share_matrix(plain_words: np.ndarray, rng: np.random.Generator):
    """Split a packed word array into three XOR share arrays."""
    s1 = rng.integers(0, 1 << 32, size=plain_words.shape, dtype=np.uint32)
    s2 = rng.integers(0, 1 << 32, size=plain_words.shape, dtype=np.uint32)
    s3 = plain_words ^ s1 ^ s2
    return s1, s2, s3


def encrypt_graph(graph: AttributedGraph, k: int, rng: np.random.Generator,
                  schema: GraphSchema | None = None):
    """Produce the public schema and the three per-party share sets."""
    if schema is None:
        schema = build_schema(graph, k)
    per_type_parts: dict[str, dict] = {}
    for vtype, ts in schema.types.items():
        members = graph.type_members[vtype]
        x = ts.population

        id_bits = np.eye(x, dtype=np.uint8)
        id_shares = _share_matrix(pack_bits(id_bits), rng)

        attr_shares = {}
        for name, aschema in ts.attrs.items():
            n = aschema.domain_size
            bits = np.zeros((x, n), dtype=np.uint8)
            for row, gi in enumerate(members):
                bits[row, aschema.index_of[graph.vertices[gi].attrs[name]]] = 1
            attr_shares[name] = _share_matrix(pack_bits(bits), rng)

        posting_shares = {}
        for t_ne in ts.posting_types:
            ne_members = graph.type_members[t_ne]
            ne_local = {gi: li for li, gi in enumerate(ne_members)}
            x_ne = len(ne_members)
            l_max = ts.max_padded(t_ne)
            w_ne = words_for(x_ne)
            stack = [np.zeros((x, l_max, w_ne), dtype=np.uint32) for _ in range(3)]
            for row, gi in enumerate(members):
                plist = graph.posting_list(gi, t_ne)
                padded_len = ts.padded_len[t_ne][row]
                if padded_len == 0:
                    continue
                bits = np.zeros((padded_len, x_ne), dtype=np.uint8)
                for slot, ngi in enumerate(plist):
                    bits[slot, ne_local[ngi]] = 1
                parts = _share_matrix(pack_bits(bits), rng)
                for p in range(3):
                    stack[p][row, :padded_len] = parts[p]
            posting_shares[t_ne] = tuple(stack)
        per_type_parts[vtype] = {
            "id": id_shares,
            "attrs": attr_shares,
            "posting": posting_shares,
        }

    shares = []
    for party in (1, 2, 3):
        a, b = party - 1, next_party(party) - 1
        types = {}
        for vtype, parts in per_type_parts.items():
            types[vtype] = TypePartyShare(
                id_a=parts["id"][a].copy(),
                id_b=parts["id"][b].copy(),
                attrs={
                    name: (mats[a].copy(), mats[b].copy())
                    for name, mats in parts["attrs"].items()
                },
                posting={
                    t: (mats[a].copy(), mats[b].copy())
                    for t, mats in parts["posting"].items()
                },
            )
        shares.append(GraphShare(party, schema, types))
    return schema, tuple(shares)


def reconstruct_type_matrix(shares, vtype: str, kind: str, name: str | None = None):
    """XOR the three share components back together (test/front-end helper).

    ``kind`` is "id", "attr" or "posting"; returns the packed plaintext array.
    """
    mats = {}
    for gs in shares:
        tps = gs.types[vtype]
        if kind == "id":
            pair = (tps.id_a, tps.id_b)
        elif kind == "attr":
            pair = tps.attrs[name]
        else:
            pair = tps.posting[name]
        mats[gs.party_index] = pair[0]
        mats[next_party(gs.party_index)] = pair[1]
    if set(mats) != {1, 2, 3}:
        raise ValueError("need share components from all three indices")
    return mats[1] ^ mats[2] ^ mats[3]
