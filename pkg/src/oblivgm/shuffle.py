"""Secret-shared shuffle of a table of replicated-shared rows.

The permutation is the composition of three pairwise-seeded permutations,
each known to exactly two parties, so no single party can reconstruct it.
All blinding tables and permutations are expanded deterministically from the
pairwise seeds with domain separation by table id, which keeps the protocol
reproducible under fixed seeds and lets tests simulate the exact outcome in
plaintext.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitVector, mask_tail, words_for
from .net import OP_SHUFFLE, ProtocolError
from .prf import prf_stream, seeded_permutation
from .rss import SharedBitVector

_LABEL_PERM = b"SHPI"
_LABEL_BLIND = b"SHTB"
_LABEL_RAND = b"SHRD"


@dataclass
class MatchTable:
    """One party's share of an ordered table of uniform-width records."""

    party_index: int
    width: int
    share_a: np.ndarray  # (rows, words) uint32
    share_b: np.ndarray

    def __post_init__(self):
        expected = (self.rows, words_for(self.width))
        if self.share_a.shape != expected or self.share_b.shape != expected:
            raise ValueError(f"table shares must have shape {expected}")

    @property
    def rows(self) -> int:
        return self.share_a.shape[0]

    @classmethod
    def from_rows(cls, rows: list[SharedBitVector]) -> "MatchTable":
        if not rows:
            raise ValueError("empty table")
        width = rows[0].logical_len
        party = rows[0].party_index
        for r in rows:
            if r.logical_len != width or r.party_index != party:
                raise ValueError("rows must share width and party")
        a = np.stack([r.share_a.words for r in rows])
        b = np.stack([r.share_b.words for r in rows])
        return cls(party, width, a, b)

    def row(self, i: int) -> SharedBitVector:
        return SharedBitVector(
            self.party_index,
            BitVector(self.share_a[i], self.width),
            BitVector(self.share_b[i], self.width),
        )

    def to_rows(self) -> list[SharedBitVector]:
        return [self.row(i) for i in range(self.rows)]


def _blind_table(seed: bytes, label: bytes, table_id: int, rows: int, width: int) -> np.ndarray:
    nwords = rows * words_for(width)
    raw = prf_stream(seed, label, table_id, nwords * 4)
    mat = np.frombuffer(raw, dtype=np.uint32).reshape(rows, words_for(width)).copy()
    return mask_tail(mat, width)


def _apply(perm: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return mat[perm]


def sec_shuffle(rt, table: MatchTable) -> MatchTable:
    """Obliviously permute the table's rows; returns fresh replicated shares.

    Three messages total cross the wire (party 1 to 2, 2 to 3, 3 to 2), each
    the size of the whole table.
    """
    if table.party_index != rt.index:
        raise ValueError("table does not belong to this party")
    rows, width = table.rows, table.width
    tid = rt.alloc_table_id()
    bits = rows * width
    head = int(tid).to_bytes(4, "little")

    def send_next(mat):
        rt.send_next(OP_SHUFFLE, head + mat.tobytes(), logical_bits=bits)

    def send_prev(mat):
        rt.send_prev(OP_SHUFFLE, head + mat.tobytes(), logical_bits=bits)

    def parse(raw) -> np.ndarray:
        got_tid = int.from_bytes(raw[:4], "little")
        if got_tid != tid:
            raise ProtocolError(f"shuffle table id mismatch: {got_tid} != {tid}")
        mat = np.frombuffer(raw[4:], dtype=np.uint32).reshape(rows, words_for(width))
        return mat

    if rt.index == 1:
        s12, s31 = rt.seed_with_next, rt.seed_with_prev
        pi12 = seeded_permutation(s12, _LABEL_PERM, tid, rows)
        t12 = _blind_table(s12, _LABEL_BLIND, tid, rows, width)
        r2 = _blind_table(s12, _LABEL_RAND, tid, rows, width)
        pi31 = seeded_permutation(s31, _LABEL_PERM, tid, rows)
        t31 = _blind_table(s31, _LABEL_BLIND, tid, rows, width)
        r1 = _blind_table(s31, _LABEL_RAND, tid, rows, width)
        x1 = _apply(pi31, _apply(pi12, table.share_a ^ table.share_b ^ t12) ^ t31)
        send_next(x1)
        out_a, out_b = r1, r2
    elif rt.index == 2:
        s23, s12 = rt.seed_with_next, rt.seed_with_prev
        pi12 = seeded_permutation(s12, _LABEL_PERM, tid, rows)
        t12 = _blind_table(s12, _LABEL_BLIND, tid, rows, width)
        r2 = _blind_table(s12, _LABEL_RAND, tid, rows, width)
        pi23 = seeded_permutation(s23, _LABEL_PERM, tid, rows)
        t23 = _blind_table(s23, _LABEL_BLIND, tid, rows, width)
        y1 = _apply(pi12, table.share_b ^ t12)
        x1 = parse(rt.recv_prev(OP_SHUFFLE))
        c1 = _apply(pi23, x1 ^ t23) ^ r2
        send_next(y1)
        send_next(c1)
        r3 = parse(rt.recv_next(OP_SHUFFLE))
        out_a, out_b = r2, r3
    else:
        s31, s23 = rt.seed_with_next, rt.seed_with_prev
        pi23 = seeded_permutation(s23, _LABEL_PERM, tid, rows)
        t23 = _blind_table(s23, _LABEL_BLIND, tid, rows, width)
        pi31 = seeded_permutation(s31, _LABEL_PERM, tid, rows)
        t31 = _blind_table(s31, _LABEL_BLIND, tid, rows, width)
        r1 = _blind_table(s31, _LABEL_RAND, tid, rows, width)
        y1 = parse(rt.recv_prev(OP_SHUFFLE))
        c1 = parse(rt.recv_prev(OP_SHUFFLE))
        c2 = _apply(pi23, _apply(pi31, y1 ^ t31) ^ t23) ^ r1
        r3 = c1 ^ c2
        send_prev(r3)
        out_a, out_b = r3, r1
    return MatchTable(rt.index, width, np.ascontiguousarray(out_a), np.ascontiguousarray(out_b))


def composed_permutation(s12: bytes, s23: bytes, s31: bytes, table_id: int, rows: int) -> np.ndarray:
    """The realized row permutation: apply pi12, then pi31, then pi23."""
    pi12 = seeded_permutation(s12, _LABEL_PERM, table_id, rows)
    pi31 = seeded_permutation(s31, _LABEL_PERM, table_id, rows)
    pi23 = seeded_permutation(s23, _LABEL_PERM, table_id, rows)
    return pi12[pi31[pi23]]


def simulate_shuffle(s12: bytes, s23: bytes, s31: bytes, table_id: int,
                     plain_rows: list[BitVector]) -> list[BitVector]:
    """Plaintext reference: what the protocol's output must reconstruct to."""
    perm = composed_permutation(s12, s23, s31, table_id, len(plain_rows))
    return [plain_rows[int(i)] for i in perm]
