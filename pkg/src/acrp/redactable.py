"""Redactable signatures over chunked messages.

Sign once, then let a designated party *remove* (never alter) individual
chunks without invalidating the signature.  Construction:

  * a binary seed tree derives one salt nonce per leaf from a 16-byte root
    seed, so revealing an interior seed reveals exactly one subtree's nonces;
  * each chunk is committed as a salted, position-bound hash leaf;
  * a Merkle tree over the leaves is bound to (chunk count, field tag,
    report context) and signed once with Ed25519.

Redaction replaces a chunk slot by its leaf commitment and re-punctures the
seed cover to the minimal disjoint subtree set spanning the remaining
present leaves.  Without the nonce, a commitment hides its chunk; with the
original message and seeds, any alteration is detectable.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, Sequence, Tuple, Union

from . import keys
from .encoding import Reader, lp, u8, u32

SEED_LEN = 16
DIGEST_LEN = 32
CONTEXT_LEN = 32
ZERO_CONTEXT = b"\x00" * CONTEXT_LEN

MAX_CHUNK_BYTES = 1 << 20  # 1 MiB per chunk
MAX_CHUNKS = 4096

# domain separation: 0x00 content leaf, 0x01 padding leaf, 0x02 interior node
_LEAF_CONTENT = b"\x00"
_LEAF_PADDING = b"\x01"
_NODE = b"\x02"


class FieldTag(IntEnum):
    Location = 0
    Picture = 1
    Description = 2


class EmptyMessage(ValueError):
    pass


class ChunkTooLarge(ValueError):
    pass


class TooManyChunks(ValueError):
    pass


class IndexOutOfRange(ValueError):
    pass


class AlreadyRedacted(ValueError):
    pass


class NonceUnavailable(ValueError):
    pass


def _h(*parts: bytes) -> bytes:
    return hashlib.sha256(b"".join(parts)).digest()


def _child_seed(parent: bytes, child_index: int) -> bytes:
    return _h(parent, bytes([child_index]), b"seed")[:SEED_LEN]


def _leaf_nonce(leaf_seed: bytes) -> bytes:
    return _h(leaf_seed, b"nonce")


def _content_leaf(nonce: bytes, index: int, chunk: bytes) -> bytes:
    return _h(_LEAF_CONTENT, nonce, u32(index), u32(len(chunk)), chunk)


def _padding_leaf(index: int) -> bytes:
    return _h(_LEAF_PADDING, u32(index))


def tree_depth(n: int) -> int:
    """ceil(log2(n)) with a minimum two-leaf tree."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def _derive_seed(seed: bytes, from_pos: int, to_pos: int) -> bytes:
    """Walk the seed tree from heap position from_pos down to to_pos."""
    path = []
    p = to_pos
    while p > from_pos:
        path.append(p & 1)
        p >>= 1
    if p != from_pos:
        raise NonceUnavailable(f"position {to_pos} not under {from_pos}")
    for bit in reversed(path):
        seed = _child_seed(seed, bit)
    return seed


def _minimal_cover(present: frozenset, num_leaves: int) -> Tuple[int, ...]:
    """Minimal disjoint set of subtree heap positions spanning exactly present.

    Heap numbering: root = 1, children of p are 2p and 2p+1, leaf i sits at
    heap position num_leaves + i.
    """
    out = []

    def rec(pos: int, lo: int, hi: int) -> None:
        count = sum(1 for i in present if lo <= i < hi)
        if count == 0:
            return
        if count == hi - lo:
            out.append(pos)
            return
        mid = (lo + hi) // 2
        rec(2 * pos, lo, mid)
        rec(2 * pos + 1, mid, hi)

    rec(1, 0, num_leaves)
    return tuple(sorted(out))


def _merkle_root(leaves: Sequence[bytes]) -> bytes:
    level = list(leaves)
    while len(level) > 1:
        level = [_h(_NODE, level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def _binding(root: bytes, n: int, field_tag: int, context: bytes) -> bytes:
    return _h(root, u32(n), u8(field_tag), context)


@dataclass(frozen=True)
class ChunkedMessage:
    """An ordered, non-empty chunk list for one report field.

    context is the 32-byte report id digest binding the signature to a single
    report; chunk order is semantically significant.
    """

    field_tag: FieldTag
    chunks: Tuple[bytes, ...]
    context: bytes = ZERO_CONTEXT

    def __post_init__(self):
        object.__setattr__(self, "chunks", tuple(self.chunks))

    def validate(self) -> None:
        if len(self.chunks) == 0:
            raise EmptyMessage("message must have at least one chunk")
        if len(self.chunks) > MAX_CHUNKS:
            raise TooManyChunks(f"{len(self.chunks)} chunks exceeds {MAX_CHUNKS}")
        for i, c in enumerate(self.chunks):
            if len(c) == 0:
                raise EmptyMessage(f"chunk {i} is empty")
            if len(c) > MAX_CHUNK_BYTES:
                raise ChunkTooLarge(f"chunk {i} is {len(c)} bytes")
        if len(self.context) != CONTEXT_LEN:
            raise ValueError("context must be 32 bytes")

    def with_context(self, context: bytes) -> "ChunkedMessage":
        return ChunkedMessage(self.field_tag, self.chunks, context)

    @property
    def n(self) -> int:
        return len(self.chunks)


@dataclass(frozen=True)
class RedactableSignature:
    """Full signature object as held by the signer and the auditor.

    root_seed lets the holder derive every leaf nonce, so this form must not
    be published; the on-chain form is SignatureCommitment.
    """

    root_signature: bytes
    n: int
    depth: int
    root_seed: bytes
    signer_pk: bytes

    def to_bytes(self) -> bytes:
        return (
            u32(self.n)
            + u8(self.depth)
            + self.root_seed
            + lp(self.root_signature)
            + lp(self.signer_pk)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "RedactableSignature":
        r = Reader(data)
        obj = cls.read_from(r)
        r.expect_done()
        return obj

    @classmethod
    def read_from(cls, r: Reader) -> "RedactableSignature":
        n = r.u32()
        depth = r.u8()
        root_seed = r.take(SEED_LEN)
        root_signature = r.lp()
        signer_pk = r.lp()
        return cls(root_signature, n, depth, root_seed, signer_pk)

    def commitment(self, field_tag: FieldTag) -> "SignatureCommitment":
        return SignatureCommitment(field_tag, self.n, self.root_signature, self.signer_pk)


@dataclass(frozen=True)
class SignatureCommitment:
    """Public part of a redactable signature, safe to place on chain."""

    field_tag: FieldTag
    n: int
    root_signature: bytes
    signer_pk: bytes

    def to_bytes(self) -> bytes:
        return u8(self.field_tag) + u32(self.n) + lp(self.root_signature) + lp(self.signer_pk)

    @classmethod
    def read_from(cls, r: Reader) -> "SignatureCommitment":
        tag = FieldTag(r.u8())
        n = r.u32()
        sig = r.lp()
        pk = r.lp()
        return cls(tag, n, sig, pk)


@dataclass(frozen=True)
class Present:
    chunk: bytes


@dataclass(frozen=True)
class Redacted:
    digest: bytes


Slot = Union[Present, Redacted]


@dataclass(frozen=True)
class RedactedMessage:
    """Post-redaction message: present chunks plus commitments for removed ones.

    seed_cover holds (heap position, seed) pairs for the minimal disjoint
    subtrees spanning exactly the present leaves; no nonce for any redacted
    slot is derivable from it.
    """

    field_tag: FieldTag
    slots: Tuple[Slot, ...]
    seed_cover: Tuple[Tuple[int, bytes], ...]
    root_signature: bytes
    n: int
    signer_pk: bytes
    context: bytes

    def present_indices(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if isinstance(s, Present))

    def redacted_indices(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if isinstance(s, Redacted))

    def to_bytes(self) -> bytes:
        out = [u8(self.field_tag), u32(self.n)]
        for slot in self.slots:
            if isinstance(slot, Present):
                out.append(u8(0) + lp(slot.chunk))
            else:
                out.append(u8(1) + lp(slot.digest))
        out.append(u32(len(self.seed_cover)))
        for pos, seed in self.seed_cover:
            out.append(u32(pos) + seed)
        out.append(lp(self.root_signature))
        out.append(lp(self.signer_pk))
        out.append(self.context)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RedactedMessage":
        r = Reader(data)
        obj = cls.read_from(r)
        r.expect_done()
        return obj

    @classmethod
    def read_from(cls, r: Reader) -> "RedactedMessage":
        field_tag = FieldTag(r.u8())
        n = r.u32()
        if n == 0 or n > MAX_CHUNKS:
            raise ValueError(f"bad chunk count {n}")
        slots = []
        for _ in range(n):
            flag = r.u8()
            payload = r.lp()
            if flag == 0:
                slots.append(Present(payload))
            elif flag == 1:
                slots.append(Redacted(payload))
            else:
                raise ValueError(f"bad slot flag {flag}")
        cover = []
        for _ in range(r.u32()):
            pos = r.u32()
            seed = r.take(SEED_LEN)
            cover.append((pos, seed))
        root_signature = r.lp()
        signer_pk = r.lp()
        context = r.take(CONTEXT_LEN)
        return cls(field_tag, tuple(slots), tuple(cover), root_signature, n, signer_pk, context)


def _leaf_nonces_from_root(root_seed: bytes, n: int, num_leaves: int) -> list:
    nonces = []
    for i in range(n):
        leaf_seed = _derive_seed(root_seed, 1, num_leaves + i)
        nonces.append(_leaf_nonce(leaf_seed))
    return nonces


def sign_redactable(
    sk: keys.SigningKey,
    msg: ChunkedMessage,
    root_seed: Optional[bytes] = None,
) -> RedactableSignature:
    """Sign a chunked message, producing the full redactable signature.

    root_seed is drawn from the OS RNG unless supplied (fixture use only);
    reusing a seed across messages would break hiding.
    """
    msg.validate()
    if root_seed is None:
        root_seed = os.urandom(SEED_LEN)
    n = msg.n
    depth = tree_depth(n)
    num_leaves = 1 << depth
    nonces = _leaf_nonces_from_root(root_seed, n, num_leaves)
    leaves = [_content_leaf(nonces[i], i, msg.chunks[i]) for i in range(n)]
    leaves += [_padding_leaf(i) for i in range(n, num_leaves)]
    root = _merkle_root(leaves)
    sig = sk.sign(_binding(root, n, msg.field_tag, msg.context))
    return RedactableSignature(sig, n, depth, root_seed, sk.public_bytes)


def verify_full(pk: bytes, msg: ChunkedMessage, sig: RedactableSignature) -> bool:
    """Recompute everything from the root seed and check the signature.

    Returns False on any mismatch or malformed input; never raises.
    """
    try:
        msg.validate()
        if sig.n != msg.n or pk != sig.signer_pk:
            return False
        if sig.depth != tree_depth(sig.n) or len(sig.root_seed) != SEED_LEN:
            return False
        num_leaves = 1 << sig.depth
        nonces = _leaf_nonces_from_root(sig.root_seed, sig.n, num_leaves)
        leaves = [_content_leaf(nonces[i], i, msg.chunks[i]) for i in range(sig.n)]
        leaves += [_padding_leaf(i) for i in range(sig.n, num_leaves)]
        root = _merkle_root(leaves)
        return keys.verify(pk, sig.root_signature, _binding(root, sig.n, msg.field_tag, msg.context))
    except (ValueError, OverflowError):
        return False


def redact(
    source: Union[ChunkedMessage, RedactedMessage],
    sig_or_none: Optional[RedactableSignature],
    to_redact: Iterable[int],
) -> RedactedMessage:
    """Remove the given chunk indices, yielding a verifiable RedactedMessage.

    Works on the original message (with its full signature) or on a prior
    RedactedMessage whose seed cover still includes the targets.  Redacting
    in stages composes: the result depends only on the union of indices.
    """
    targets = frozenset(to_redact)
    if isinstance(source, ChunkedMessage):
        if sig_or_none is None:
            raise ValueError("signature required when redacting the original message")
        return _redact_original(source, sig_or_none, targets)
    return _redact_again(source, targets)


def _redact_original(
    msg: ChunkedMessage, sig: RedactableSignature, targets: frozenset
) -> RedactedMessage:
    msg.validate()
    n = msg.n
    for i in targets:
        if not (0 <= i < n):
            raise IndexOutOfRange(f"chunk index {i} out of range for n={n}")
    num_leaves = 1 << tree_depth(n)
    nonces = _leaf_nonces_from_root(sig.root_seed, n, num_leaves)
    present = frozenset(range(n)) - targets
    slots: list = []
    for i in range(n):
        if i in present:
            slots.append(Present(msg.chunks[i]))
        else:
            slots.append(Redacted(_content_leaf(nonces[i], i, msg.chunks[i])))
    cover = tuple(
        (pos, _derive_seed(sig.root_seed, 1, pos))
        for pos in _minimal_cover(present, num_leaves)
    )
    return RedactedMessage(
        msg.field_tag, tuple(slots), cover, sig.root_signature, n, sig.signer_pk, msg.context
    )


def _cover_seed_for(red: RedactedMessage, num_leaves: int, pos: int) -> bytes:
    """Seed for heap position pos, derived from whichever cover entry spans it."""
    for cpos, cseed in red.seed_cover:
        p = pos
        while p > cpos:
            p >>= 1
        if p == cpos:
            return _derive_seed(cseed, cpos, pos)
    raise NonceUnavailable(f"no cover entry spans position {pos}")


def _redact_again(red: RedactedMessage, targets: frozenset) -> RedactedMessage:
    n = red.n
    for i in targets:
        if not (0 <= i < n):
            raise IndexOutOfRange(f"chunk index {i} out of range for n={n}")
        if isinstance(red.slots[i], Redacted):
            raise AlreadyRedacted(f"chunk {i} already redacted")
    num_leaves = 1 << tree_depth(n)
    slots = list(red.slots)
    for i in targets:
        leaf_seed = _cover_seed_for(red, num_leaves, num_leaves + i)
        nonce = _leaf_nonce(leaf_seed)
        slots[i] = Redacted(_content_leaf(nonce, i, slots[i].chunk))
    present = frozenset(
        i for i in range(n) if isinstance(slots[i], Present)
    )
    cover = tuple(
        (pos, _cover_seed_for(red, num_leaves, pos))
        for pos in _minimal_cover(present, num_leaves)
    )
    return RedactedMessage(
        red.field_tag, tuple(slots), cover, red.root_signature, n, red.signer_pk, red.context
    )


def _cover_is_wellformed(red: RedactedMessage, num_leaves: int) -> bool:
    positions = [pos for pos, _ in red.seed_cover]
    if len(set(positions)) != len(positions):
        return False
    posset = set(positions)
    covered: set = set()
    for pos, seed in red.seed_cover:
        if not (1 <= pos < 2 * num_leaves) or len(seed) != SEED_LEN:
            return False
        # no cover entry may sit inside another's subtree
        p = pos >> 1
        while p >= 1:
            if p in posset:
                return False
            p >>= 1
        lo, hi = pos, pos
        while lo < num_leaves:
            lo, hi = 2 * lo, 2 * hi + 1
        covered.update(range(lo - num_leaves, hi - num_leaves + 1))
    return covered == set(red.present_indices())

def verify_redacted(red: RedactedMessage) -> bool:
    """Check a redacted message against its carried root signature.

    Derives nonces for present slots from the seed cover, recomputes their
    commitments, uses the provided digests for redacted slots, folds the
    Merkle root and checks the Ed25519 binding.  False on any malformation;
    never raises.
    """
    try:
        n = red.n
        if n < 1 or n > MAX_CHUNKS or len(red.slots) != n:
            return False
        if len(red.context) != CONTEXT_LEN:
            return False
        num_leaves = 1 << tree_depth(n)
        if not _cover_is_wellformed(red, num_leaves):
            return False
        leaves = []
        for i in range(n):
            slot = red.slots[i]
            if isinstance(slot, Present):
                if not (1 <= len(slot.chunk) <= MAX_CHUNK_BYTES):
                    return False
                leaf_seed = _cover_seed_for(red, num_leaves, num_leaves + i)
                leaves.append(_content_leaf(_leaf_nonce(leaf_seed), i, slot.chunk))
            else:
                if len(slot.digest) != DIGEST_LEN:
                    return False
                leaves.append(slot.digest)
        leaves += [_padding_leaf(i) for i in range(n, num_leaves)]
        root = _merkle_root(leaves)
        binding = _binding(root, n, red.field_tag, red.context)
        return keys.verify(red.signer_pk, red.root_signature, binding)
    except (ValueError, OverflowError, NonceUnavailable):
        return False


# serialized sizes of the fixed fields (see RedactedMessage.to_bytes)
_PRESENT_SLOT_OVERHEAD = 1 + 4
_REDACTED_SLOT_BYTES = 1 + 4 + DIGEST_LEN
_COVER_ENTRY_BYTES = 4 + SEED_LEN
_SIG_BYTES = 4 + 64
_PK_BYTES = 4 + 32
_FIXED_BYTES = 1 + 4 + 4 + _SIG_BYTES + _PK_BYTES + CONTEXT_LEN


def signature_overhead(n: int, k: int) -> int:
    """Exact serialized size of a RedactedMessage's cryptographic fields.

    Counts everything except present chunk content, for k redactions spread
    evenly across n chunks (the pattern that fragments the seed cover most).
    """
    if not (0 <= k <= n) or n < 1:
        raise ValueError("need 0 <= k <= n, n >= 1")
    targets = frozenset(i * n // k for i in range(k)) if k else frozenset()
    present = frozenset(range(n)) - targets
    num_leaves = 1 << tree_depth(n)
    cover = _minimal_cover(present, num_leaves)
    return (
        _FIXED_BYTES
        + len(targets) * _REDACTED_SLOT_BYTES
        + (n - len(targets)) * _PRESENT_SLOT_OVERHEAD
        + len(cover) * _COVER_ENTRY_BYTES
    )


def measured_overhead(red: RedactedMessage) -> int:
    """Serialized size minus present chunk content, for size-law checks."""
    content = sum(len(s.chunk) for s in red.slots if isinstance(s, Present))
    return len(red.to_bytes()) - content
