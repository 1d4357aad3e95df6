"""Secure matching engine.

Four cooperating pieces, each executed in lockstep by the three parties:

* predicate evaluation: every party evaluates its two FSS keys over the
  public positions of a candidate's attribute shares, producing two of the
  six additive terms per candidate; one bit per candidate is re-shared.
* matched-vertex fetch: a unique-valued attribute lets the parties fold the
  candidates into a single record with pure local algebra plus one vector
  re-share; otherwise the flag/id/value table is obliviously shuffled and
  only the shuffled flag column is opened.
* neighbor access: a matched vertex's posting list is pulled out of the
  whole type population by one-hot selection, validity flags are computed,
  shuffled and opened to discard padding, and the surviving neighbors'
  attribute values are fetched by one-hot selection again.
* the matcher walks the query tree breadth-first, carrying public
  provenance (which parent record a candidate group descends from), and
  finally assembles complete subgraphs and prunes partial branches.

Candidates are processed as stacked word matrices; one protocol message per
operation carries the whole batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import fss, rss
from .bits import BitVector, pack_bits, unpack_bits, words_for
from .graphs import GraphSchema, GraphShare
from .net import OP_RESHARE
from .query import PartyToken
from .shuffle import MatchTable, sec_shuffle


@dataclass
class EngineConfig:
    any_mode: str = "or"  # ANY combiner: logical "or", or the literal "xor" chain
    progress: object | None = None


@dataclass
class CandidateGroup:
    """Stacked candidate shares with public provenance."""

    parent_slot: int | None
    parent_record: int | None
    count: int
    id_width: int  # parent-type population the one-hot ids range over
    ids_a: np.ndarray  # (count, words(id_width))
    ids_b: np.ndarray
    attrs: dict[str, tuple[np.ndarray, np.ndarray]]
    attr_widths: dict[str, int]


@dataclass
class MatchedRecord:
    parent_slot: int | None
    parent_record: int | None
    vertex_id: rss.SharedBitVector
    attrs: dict[str, rss.SharedBitVector]


@dataclass
class MatchResultSet:
    party_index: int
    structure: dict
    records: list[list[MatchedRecord]]
    subgraphs: list[tuple[int, ...]]
    opened_flags: list[tuple[str, np.ndarray]] = field(default_factory=list)


def _parity_rows(mat: np.ndarray) -> np.ndarray:
    if mat.size == 0:
        return np.zeros(mat.shape[0], dtype=np.uint8)
    acc = np.bitwise_xor.reduce(mat, axis=-1)
    return (np.bitwise_count(acc) & 1).astype(np.uint8)


def _reshare_matrix(rt, additive: np.ndarray, width: int):
    """Re-share a batch of additive rows in one message; returns (a, b) matrices."""
    rows, w = additive.shape
    zs = rt.zero_share(rows * w * 32).words.reshape(rows, w)
    blinded = additive ^ zs
    if width % 32 and w:
        blinded[:, -1] &= np.uint32((1 << (width % 32)) - 1)
    rt.send_next(OP_RESHARE, blinded.tobytes(), logical_bits=rows * width)
    received = np.frombuffer(rt.recv_prev(OP_RESHARE), dtype=np.uint32).reshape(rows, w)
    return received, blinded


def _select_one_additive(bits_a, bits_b, mat_a, mat_b) -> np.ndarray:
    """Additive share of XOR_c bit[c] AND row[c], folded over the first axis."""
    pa = bits_a.astype(bool)
    qa = bits_b.astype(bool)
    shape = (len(pa),) + (1,) * (mat_a.ndim - 1)
    terms = np.where(pa.reshape(shape), mat_a ^ mat_b, np.uint32(0))
    terms ^= np.where(qa.reshape(shape), mat_a, np.uint32(0))
    return np.bitwise_xor.reduce(terms, axis=0)


def _select_many_additive(sel_a, sel_b, mat_a, mat_b) -> np.ndarray:
    """Row-batched one-hot selection: (K, X) selector bits against (X, W) rows."""
    k, x = sel_a.shape
    w = mat_a.shape[1]
    out = np.zeros((k, w), dtype=np.uint32)
    axb = mat_a ^ mat_b
    # chunk over selector rows to bound the (k, x, w) intermediate
    step = max(1, (1 << 22) // max(1, x * w))
    for lo in range(0, k, step):
        hi = min(k, lo + step)
        pa = sel_a[lo:hi].astype(bool)[:, :, None]
        qa = sel_b[lo:hi].astype(bool)[:, :, None]
        terms = np.where(pa, axb[None, :, :], np.uint32(0))
        terms ^= np.where(qa, mat_a[None, :, :], np.uint32(0))
        out[lo:hi] = np.bitwise_xor.reduce(terms, axis=1)
    return out


class _OpenLabels:
    """Monotone open labels; identical across parties because allocation is lockstep."""

    def __init__(self):
        self._n = 0

    def next(self) -> int:
        self._n += 1
        return self._n


# ---------------------------------------------------------------------------
# predicate evaluation
# ---------------------------------------------------------------------------


def sec_eval(rt, group: CandidateGroup, key_pair, attr: str, domain_size: int,
             fde_cache: dict | None = None) -> rss.SharedBitVector:
    """Evaluate one predicate over a candidate group; one shared bit each.

    Each evaluation pass re-shares one bit per candidate. Interval keys run
    two passes (their two comparison halves), doubling the communication.
    """
    first, second = key_pair
    passes = list(zip(fss.key_parts_for_engine(first), fss.key_parts_for_engine(second)))
    da, db = group.attrs[attr]
    result: rss.SharedBitVector | None = None
    for pass_idx, (part_a, part_b) in enumerate(passes):
        if fde_cache is not None:
            cache_key = (id(first), pass_idx)
            if cache_key not in fde_cache:
                fde_cache[cache_key] = (
                    fss.full_domain_eval(part_a, domain_size).words,
                    fss.full_domain_eval(part_b, domain_size).words,
                )
            ind_a, ind_b = fde_cache[cache_key]
        else:
            ind_a = fss.full_domain_eval(part_a, domain_size).words
            ind_b = fss.full_domain_eval(part_b, domain_size).words
        additive_bits = _parity_rows(da & ind_a[None, :]) ^ _parity_rows(db & ind_b[None, :])
        shared = rss.reshare(rt, BitVector.from_bits(additive_bits))
        result = shared if result is None else result.xor(shared)
    return result


def combine_predicates(rt, bits: list[rss.SharedBitVector], combiner: str,
                       any_mode: str = "or") -> rss.SharedBitVector:
    """Fold per-predicate shared bits by the public Boolean combiner."""
    if not bits:
        raise ValueError("no predicate bits to combine")
    acc = bits[0]
    if combiner == "ALL":
        for nxt in bits[1:]:
            acc = rss.and_gate(rt, acc, nxt)
        return acc
    if combiner != "ANY":
        raise ValueError(f"unknown combiner {combiner!r}")
    if any_mode == "xor":
        for nxt in bits[1:]:
            acc = acc.xor(nxt)
        return acc
    if any_mode != "or":
        raise ValueError(f"unknown ANY mode {any_mode!r}")
    for nxt in bits[1:]:
        conj = rss.and_gate(rt, acc, nxt)
        acc = acc.xor(nxt).xor(conj)
    return acc


# ---------------------------------------------------------------------------
# matched-vertex fetch
# ---------------------------------------------------------------------------


def sec_fetch_unique(rt, group: CandidateGroup,
                     flags: rss.SharedBitVector) -> MatchedRecord:
    """Case with at most one satisfying candidate: fold by flag bits locally.

    Local AND terms accumulate additively over the candidates, then a single
    re-share per field runs; communication does not grow with the candidate
    count. A zero-match group folds to the all-zero (dummy) record.
    """
    fa = flags.share_a.to_bits()
    fb = flags.share_b.to_bits()

    def fold(mat_a, mat_b, width):
        additive = _select_one_additive(fa, fb, mat_a, mat_b)
        return rss.reshare(rt, BitVector(additive, width))

    vertex_id = fold(group.ids_a, group.ids_b, group.id_width)
    attrs = {
        name: fold(pair[0], pair[1], group.attr_widths[name])
        for name, pair in sorted(group.attrs.items())
    }
    return MatchedRecord(group.parent_slot, group.parent_record, vertex_id, attrs)


def sec_fetch_multi(rt, group: CandidateGroup, flags: rss.SharedBitVector,
                    labels: _OpenLabels, audit: list) -> list[MatchedRecord]:
    """General fetch: shuffle flag/id/value rows, open the flags, keep the ones."""
    attr_names = sorted(group.attrs)
    id_width = group.id_width
    attr_widths = {a: group.attr_widths[a] for a in attr_names}

    def build_rows(fbits, ids, attr_mats):
        cols = [fbits[:, None], unpack_bits(ids, id_width)]
        for a in attr_names:
            cols.append(unpack_bits(attr_mats[a], attr_widths[a]))
        return pack_bits(np.concatenate(cols, axis=1))

    row_width = 1 + id_width + sum(attr_widths.values())
    rows_a = build_rows(flags.share_a.to_bits(), group.ids_a,
                        {a: group.attrs[a][0] for a in attr_names})
    rows_b = build_rows(flags.share_b.to_bits(), group.ids_b,
                        {a: group.attrs[a][1] for a in attr_names})
    table = MatchTable(rt.index, row_width, rows_a, rows_b)
    shuffled = sec_shuffle(rt, table)

    flag_col = rss.SharedBitVector(
        rt.index,
        BitVector.from_bits(shuffled.share_a[:, 0] & 1),
        BitVector.from_bits(shuffled.share_b[:, 0] & 1),
    )
    mask = rss.open_shared(rt, flag_col, label=labels.next()).to_bits()
    audit.append(("fetch", mask.copy()))

    records = []
    bits_a = unpack_bits(shuffled.share_a, row_width)
    bits_b = unpack_bits(shuffled.share_b, row_width)
    for row in np.nonzero(mask)[0]:
        pos = 1
        vid = rss.SharedBitVector(
            rt.index,
            BitVector.from_bits(bits_a[row, pos:pos + id_width]),
            BitVector.from_bits(bits_b[row, pos:pos + id_width]),
        )
        pos += id_width
        attrs = {}
        for a in attr_names:
            aw = attr_widths[a]
            attrs[a] = rss.SharedBitVector(
                rt.index,
                BitVector.from_bits(bits_a[row, pos:pos + aw]),
                BitVector.from_bits(bits_b[row, pos:pos + aw]),
            )
            pos += aw
        records.append(MatchedRecord(group.parent_slot, group.parent_record, vid, attrs))
    return records


# ---------------------------------------------------------------------------
# neighbor access
# ---------------------------------------------------------------------------


def sec_access(rt, record: MatchedRecord, parent_type: str, child_type: str,
               needed_attrs: list[str], gshare: GraphShare,
               provenance: tuple[int, int], labels: _OpenLabels, audit: list) -> CandidateGroup:
    """Pull one matched vertex's neighbors of ``child_type`` out of the graph.

    Selection runs over the whole parent-type population, so nothing about
    which vertex matched leaks; padding and zero-extension are discarded only
    after the validity flags have been shuffled.
    """
    schema = gshare.schema
    parent_slot, parent_rec = provenance
    x_ne = schema.types[child_type].population
    w_ne = words_for(x_ne)
    attr_widths = {a: schema.types[child_type].attrs[a].domain_size for a in needed_attrs}
    lists_a, lists_b = gshare.types[parent_type].posting[child_type]
    l_max = lists_a.shape[1]

    def empty_group():
        return CandidateGroup(
            parent_slot, parent_rec, 0, x_ne,
            np.zeros((0, w_ne), np.uint32), np.zeros((0, w_ne), np.uint32),
            {a: (np.zeros((0, words_for(attr_widths[a])), np.uint32),
                 np.zeros((0, words_for(attr_widths[a])), np.uint32))
             for a in needed_attrs},
            attr_widths,
        )

    if l_max == 0:
        return empty_group()

    # one-hot selection of the matched vertex's padded posting list
    sel_a = record.vertex_id.share_a.to_bits()
    sel_b = record.vertex_id.share_b.to_bits()
    additive = _select_one_additive(sel_a, sel_b, lists_a, lists_b)  # (l_max, w_ne)
    fetched_a, fetched_b = _reshare_matrix(rt, additive, x_ne)

    # validity flag per fetched row, then shuffle flag||id and open the flags
    ya = _parity_rows(fetched_a)
    yb = _parity_rows(fetched_b)
    rows_a = pack_bits(np.concatenate([ya[:, None], unpack_bits(fetched_a, x_ne)], axis=1))
    rows_b = pack_bits(np.concatenate([yb[:, None], unpack_bits(fetched_b, x_ne)], axis=1))
    shuffled = sec_shuffle(rt, MatchTable(rt.index, 1 + x_ne, rows_a, rows_b))
    flag_col = rss.SharedBitVector(
        rt.index,
        BitVector.from_bits(shuffled.share_a[:, 0] & 1),
        BitVector.from_bits(shuffled.share_b[:, 0] & 1),
    )
    valid = rss.open_shared(rt, flag_col, label=labels.next()).to_bits()
    audit.append(("access", valid.copy()))
    keep = np.nonzero(valid)[0]
    if keep.size == 0:
        return empty_group()

    kept_bits_a = unpack_bits(shuffled.share_a, 1 + x_ne)[keep, 1:]
    kept_bits_b = unpack_bits(shuffled.share_b, 1 + x_ne)[keep, 1:]
    ids_a = pack_bits(kept_bits_a)
    ids_b = pack_bits(kept_bits_b)

    # one-hot fetch of each surviving neighbor's queried attribute values
    attrs: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    child_share = gshare.types[child_type]
    for a in needed_attrs:
        va, vb = child_share.attrs[a]
        additive = _select_many_additive(kept_bits_a, kept_bits_b, va, vb)
        attrs[a] = _reshare_matrix(rt, additive, attr_widths[a])
    return CandidateGroup(parent_slot, parent_rec, int(keep.size), x_ne,
                          ids_a, ids_b, attrs, attr_widths)


# ---------------------------------------------------------------------------
# full query
# ---------------------------------------------------------------------------


def sec_match(rt, token: PartyToken, gshare: GraphShare,
              config: EngineConfig | None = None) -> MatchResultSet:
    """Run the whole query against the encrypted graph at one party."""
    config = config or EngineConfig()
    schema = gshare.schema
    if token.schema_digest != schema.digest():
        raise ValueError("token and graph share were built for different schemas")
    slots = token.structure["slots"]
    labels = _OpenLabels()
    audit: list[tuple[str, np.ndarray]] = []
    groups: list[list[CandidateGroup]] = [[] for _ in slots]
    records: list[list[MatchedRecord]] = [[] for _ in slots]
    fde_cache: dict = {}

    def say(msg: str):
        if config.progress:
            config.progress(f"[party-{rt.index}] {msg}")

    for s, slot in enumerate(slots):
        vtype = slot["type"]
        ts = schema.types[vtype]
        needed = sorted({p["attr"] for p in slot["preds"]})
        if s == 0:
            tps = gshare.types[vtype]
            groups[0] = [CandidateGroup(
                None, None, ts.population, ts.population,
                tps.id_a, tps.id_b,
                {a: tps.attrs[a] for a in needed},
                {a: ts.attrs[a].domain_size for a in needed},
            )]
        unique_route = (
            len(slot["preds"]) == 1
            and slot["preds"][0]["kind"] == fss.KIND_EQ
            and ts.attrs[slot["preds"][0]["attr"]].unique
        )
        say(f"slot {s} ({slot['name']}): {sum(g.count for g in groups[s])} candidates "
            f"in {len(groups[s])} groups")
        for group in groups[s]:
            if group.count == 0:
                continue
            with rt.meter.phase("secEval"):
                bits = [
                    sec_eval(rt, group, token.slot_keys[s][pi], pred["attr"],
                             ts.attrs[pred["attr"]].domain_size, fde_cache)
                    for pi, pred in enumerate(slot["preds"])
                ]
                flags = combine_predicates(rt, bits, slot["combiner"], config.any_mode)
            with rt.meter.phase("secFetch"):
                if unique_route:
                    records[s].append(sec_fetch_unique(rt, group, flags))
                else:
                    records[s].extend(sec_fetch_multi(rt, group, flags, labels, audit))
        say(f"slot {s} ({slot['name']}): {len(records[s])} matched records")
        for child in slot["children"]:
            child_type = slots[child]["type"]
            child_attrs = sorted({p["attr"] for p in slots[child]["preds"]})
            with rt.meter.phase("secAccess"):
                groups[child] = [
                    sec_access(rt, rec, vtype, child_type, child_attrs, gshare,
                               (s, ri), labels, audit)
                    for ri, rec in enumerate(records[s])
                ]

    subgraphs = _assemble(slots, records)
    say(f"assembled {len(subgraphs)} complete subgraphs")
    return MatchResultSet(rt.index, token.structure, records, subgraphs, audit)


def _assemble(slots, records: list[list[MatchedRecord]]) -> list[tuple[int, ...]]:
    """Walk public provenance links and keep only complete subtree products."""
    nslots = len(slots)
    children_of = [slot["children"] for slot in slots]
    by_parent: list[dict[int | None, list[int]]] = [{} for _ in range(nslots)]
    for s in range(nslots):
        for ri, rec in enumerate(records[s]):
            by_parent[s].setdefault(rec.parent_record, []).append(ri)

    def expand(slot: int, rec_idx: int) -> list[dict[int, int]]:
        parts: list[list[dict[int, int]]] = []
        for child in children_of[slot]:
            sub: list[dict[int, int]] = []
            for cri in by_parent[child].get(rec_idx, []):
                sub.extend(expand(child, cri))
            if not sub:
                return []
            parts.append(sub)
        out = []
        for pick in product(*parts):
            assignment = {slot: rec_idx}
            for d in pick:
                assignment.update(d)
            out.append(assignment)
        return out

    results = []
    for ri in range(len(records[0])):
        for assignment in expand(0, ri):
            results.append(tuple(assignment[s] for s in range(nslots)))
    return results


# ---------------------------------------------------------------------------
# result reconstruction (front-end side)
# ---------------------------------------------------------------------------


def open_results(result_sets: list[MatchResultSet], schema: GraphSchema):
    """Merge two or three party result sets into plaintext subgraphs.

    Returns ``(matches, details)``: slot-ordered ext-id tuples, and per-match
    decoded attribute values. Subgraphs containing a dummy (all-zero) vertex
    record collapse silently; they stem from unique-fetch groups without a
    satisfying candidate.
    """
    if len(result_sets) < 2:
        raise ValueError("need result shares from at least two parties")
    base = result_sets[0]
    for other in result_sets[1:]:
        if other.structure != base.structure:
            raise ValueError("result metadata differs between parties")
        if other.subgraphs != base.subgraphs:
            raise ValueError("result assembly differs between parties")
        if [len(r) for r in other.records] != [len(r) for r in base.records]:
            raise ValueError("record counts differ between parties")
    slots = base.structure["slots"]
    decoded: list[list[tuple[str | None, dict]]] = []
    for s, slot in enumerate(slots):
        ts = schema.types[slot["type"]]
        out = []
        for ri in range(len(base.records[s])):
            vid = rss.reconstruct([r.records[s][ri].vertex_id for r in result_sets])
            hot = vid.hot_index()
            ext = None if hot is None else ts.ext_ids[hot]
            attrs = {}
            for a in sorted({p["attr"] for p in slot["preds"]}):
                vec = rss.reconstruct([r.records[s][ri].attrs[a] for r in result_sets])
                idx = vec.hot_index()
                attrs[a] = None if idx is None else ts.attrs[a].values[idx]
            out.append((ext, attrs))
        decoded.append(out)
    matches = []
    details = []
    for combo in base.subgraphs:
        ids = tuple(decoded[s][ri][0] for s, ri in enumerate(combo))
        if any(v is None for v in ids):
            continue
        matches.append(ids)
        details.append([decoded[s][ri] for s, ri in enumerate(combo)])
    return matches, details
