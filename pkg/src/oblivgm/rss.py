"""Three-party replicated secret sharing over packed bit vectors.

A secret ``x`` is split into ``x1 ^ x2 ^ x3``; party ``i`` holds the pair
``(x_i, x_{i+1})`` with wrap-around. XOR is local. AND produces a 3-out-of-3
additive sharing locally and becomes replicated again through a one-round
re-share: each party blinds its additive share with a fresh zero-sharing and
forwards it to the next party.

Local share algebra lives here as pure functions. The operations that
communicate (:func:`reshare`, :func:`and_gate`, :func:`open_shared`) take a
party runtime (see :mod:`oblivgm.net`) providing ordered channels, the
zero-share context, and traffic metering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitVector, mask_tail, words_for
from .prf import prf_words

PARTIES = (1, 2, 3)


def next_party(i: int) -> int:
    return i % 3 + 1


def prev_party(i: int) -> int:
    return (i + 1) % 3 + 1


@dataclass(frozen=True)
class SharedBitVector:
    """One party's view of a replicated sharing: the pair (x_i, x_{i+1})."""

    party_index: int
    share_a: BitVector
    share_b: BitVector

    def __post_init__(self):
        if self.party_index not in PARTIES:
            raise ValueError(f"party_index must be in {PARTIES}")
        if self.share_a.logical_len != self.share_b.logical_len:
            raise ValueError("share pair length mismatch")

    @property
    def logical_len(self) -> int:
        return self.share_a.logical_len

    def xor(self, other: "SharedBitVector") -> "SharedBitVector":
        """Local XOR of two sharings held by the same party."""
        if self.party_index != other.party_index:
            raise ValueError("cannot combine shares of different parties")
        return SharedBitVector(
            self.party_index, self.share_a ^ other.share_a, self.share_b ^ other.share_b
        )

    def xor_public(self, const: BitVector) -> "SharedBitVector":
        """Add a public constant: the constant is folded into share x1 only."""
        if const.logical_len != self.logical_len:
            raise ValueError("length mismatch")
        a, b = self.share_a, self.share_b
        if self.party_index == 1:
            a = a ^ const
        elif self.party_index == 3:
            b = b ^ const
        return SharedBitVector(self.party_index, a, b)


def xor_local(a: SharedBitVector, b: SharedBitVector) -> SharedBitVector:
    return a.xor(b)


def share(plaintext: BitVector, rng: np.random.Generator):
    """Split a plaintext vector into the three party share pairs."""
    n = plaintext.logical_len
    if n == 0:
        raise ValueError("cannot share a zero-length vector")
    s1 = BitVector.random(n, rng)
    s2 = BitVector.random(n, rng)
    s3 = plaintext ^ s1 ^ s2
    parts = {1: s1, 2: s2, 3: s3}
    return tuple(
        SharedBitVector(i, parts[i], parts[next_party(i)]) for i in PARTIES
    )


def reconstruct(shares) -> BitVector:
    """Recover the plaintext from the share pairs of any two or three parties.

    Duplicated components must agree; all three share indices must be covered.
    """
    shares = list(shares)
    if not shares:
        raise ValueError("no shares given")
    n = shares[0].logical_len
    components: dict[int, BitVector] = {}
    for sv in shares:
        if sv.logical_len != n:
            raise ValueError("length mismatch between share pairs")
        for idx, vec in ((sv.party_index, sv.share_a), (next_party(sv.party_index), sv.share_b)):
            if idx in components:
                if components[idx] != vec:
                    raise ValueError(f"inconsistent copies of share {idx}")
            else:
                components[idx] = vec
    if set(components) != set(PARTIES):
        raise ValueError(f"share indices {sorted(components)} do not cover all of {PARTIES}")
    return components[1] ^ components[2] ^ components[3]


def and_terms(a: SharedBitVector, b: SharedBitVector) -> BitVector:
    """Local additive share of a AND b: a_i&b_i ^ a_i&b_{i+1} ^ a_{i+1}&b_i."""
    if a.party_index != b.party_index:
        raise ValueError("cannot combine shares of different parties")
    if a.logical_len != b.logical_len:
        raise ValueError("length mismatch")
    words = (
        (a.share_a.words & b.share_a.words)
        ^ (a.share_a.words & b.share_b.words)
        ^ (a.share_b.words & b.share_a.words)
    )
    return BitVector(words, a.logical_len)


@dataclass
class ZeroShareContext:
    """Per-party state for PRF-based fresh sharings of zero.

    Party ``i`` holds its own key and the previous party's key; with aligned
    counters the three parties' outputs XOR to zero.
    """

    prf_key_own: bytes
    prf_key_prev: bytes
    counter: int = 0

    LABEL = b"ZSHR"

    def next_share(self, nbits: int) -> BitVector:
        j = self.counter
        self.counter += 1
        words = prf_words(self.prf_key_own, self.LABEL, j, nbits)
        words ^= prf_words(self.prf_key_prev, self.LABEL, j, nbits)
        return BitVector(mask_tail(words, nbits), nbits)

    def peek(self, nbits: int, j: int) -> BitVector:
        """Share for an explicit counter value, without advancing state."""
        words = prf_words(self.prf_key_own, self.LABEL, j, nbits)
        words ^= prf_words(self.prf_key_prev, self.LABEL, j, nbits)
        return BitVector(mask_tail(words, nbits), nbits)


# ---------------------------------------------------------------------------
# Communicating operations. ``rt`` is a PartyRuntime (oblivgm.net).
# ---------------------------------------------------------------------------

from .net import OP_OPEN, OP_RESHARE  # noqa: E402  (no cycle: net does not import rss)


def reshare(rt, additive: BitVector) -> SharedBitVector:
    """Turn a 3-out-of-3 additive sharing into a replicated sharing.

    One message of ``len(additive)`` bits to the next party. The blinded
    additive share sent by party i becomes replicated share index i+1.
    """
    n = additive.logical_len
    blinded = additive ^ rt.zero_share(n)
    rt.send_next(OP_RESHARE, blinded.words.tobytes(), logical_bits=n)
    received = np.frombuffer(rt.recv_prev(OP_RESHARE), dtype=np.uint32)
    if received.size != words_for(n):
        raise ValueError("re-share message has wrong length")
    return SharedBitVector(rt.index, BitVector(received, n), blinded)


def and_gate(rt, a: SharedBitVector, b: SharedBitVector) -> SharedBitVector:
    """Bitwise AND of two replicated sharings; one round, n bits per party."""
    return reshare(rt, and_terms(a, b))


def open_shared(rt, x: SharedBitVector, label: int = 0) -> BitVector:
    """Reveal a shared vector to every party.

    Each party forwards its first share component to the next party; the label
    guards against parties opening different values in the same round.
    """
    n = x.logical_len
    payload = int(label).to_bytes(4, "little") + x.share_a.words.tobytes()
    rt.send_next(OP_OPEN, payload, logical_bits=n)
    raw = rt.recv_prev(OP_OPEN)
    peer_label = int.from_bytes(raw[:4], "little")
    if peer_label != label:
        from .net import ProtocolError

        raise ProtocolError(
            f"open label mismatch: local {label}, peer {peer_label}"
        )
    missing = np.frombuffer(raw[4:], dtype=np.uint32)
    if missing.size != words_for(n):
        raise ValueError("open message has wrong length")
    plain = x.share_a ^ x.share_b ^ BitVector(missing, n)
    rt.note_opened(label, plain)
    return plain
