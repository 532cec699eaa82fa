# Traceable ring signatures, following the Fujisaki-Suzuki construction:
# an OR-composition of Chaum-Pedersen discrete-log-equality proofs over a
# per-issue tag line.
#
# For issue tag T and ring (y_1 .. y_n), the signer k with secret x_k
# computes h = H_G(T) and its tag point sigma_k = h^{x_k}, then fits the
# "line" sigma_i = A0 * A1^i through (0, A0) with A0 = H_G(T || msg) and
# (k, sigma_k).  Verification recomputes all n points and checks a Fiat-
# Shamir OR-proof that log_g(y_i) = log_h(sigma_i) for some i; the n points
# form the signature's trace tag.  Two tags are compared element-wise:
#
#   all n positions equal      -> linked (same signer, same message)
#   exactly one position equal -> traced, the position is the signer index
#   otherwise                  -> independent
#
# The first-occurrence check is O(n) expected per new signature when tag
# values are kept in a hash table (see TraceStore).

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .groups import Group, DEFAULT_GROUP

__all__ = [
    "Ring",
    "IssueTag",
    "RingSignature",
    "TraceOutcome",
    "Outcome",
    "TraceStore",
    "KeyMismatch",
    "InvalidSignature",
    "NotFound",
    "keygen",
    "sign",
    "verify",
    "trace",
    "find_index",
]

_SEP = b"\x1f"
_H_DOMAIN = b"trs/tagbase"
_A0_DOMAIN = b"trs/msgbase"
_CHAL_DOMAIN = b"trs/challenge"


class KeyMismatch(Exception):
    """Secret key does not match the ring slot it claims."""


class InvalidSignature(Exception):
    """An operation required a verifying signature and did not get one."""


class NotFound(Exception):
    """No ring member's key explains the signature (find_index only)."""


@dataclass(frozen=True)
class Ring:
    """Ordered public keys; index i (1-based) belongs to process p_i."""

    public_keys: tuple
    group: Group = DEFAULT_GROUP

    def __post_init__(self):
        if len(self.public_keys) < 2:
            raise ValueError("ring needs at least 2 members")
        if len(set(self.public_keys)) != len(self.public_keys):
            raise ValueError("duplicate public key in ring")

    @property
    def n(self) -> int:
        return len(self.public_keys)

    def key_bytes(self) -> bytes:
        enc = self.group.encode_element
        return b"".join(enc(y) for y in self.public_keys)


@dataclass(frozen=True)
class IssueTag:
    """Traceability scope: one ring plus one issue string."""

    ring: Ring
    issue: bytes

    def __post_init__(self):
        if not self.issue:
            raise ValueError("empty issue")

    def tag_bytes(self) -> bytes:
        return len(self.issue).to_bytes(4, "big") + self.issue + self.ring.key_bytes()


def make_issue(instance_id: bytes, message_type: str, label: bytes = b"") -> bytes:
    """Canonical issue framing: ID, message type and optional label."""
    return instance_id + _SEP + message_type.encode() + _SEP + label


@dataclass
class RingSignature:
    a1: int
    c: tuple  # n challenge scalars
    z: tuple  # n response scalars
    # Derived on verification; exactly n group elements.
    trace_tag: Optional[tuple] = None

    def encode(self, group: Group) -> bytes:
        """Wire format: length-prefixed scalars (c then z), then elements."""
        scalars = list(self.c) + list(self.z)
        out = [len(scalars).to_bytes(2, "big")]
        out += [group.encode_scalar(s) for s in scalars]
        out.append((1).to_bytes(2, "big"))
        out.append(group.encode_element(self.a1))
        return b"".join(out)


def decode_signature(group: Group, raw: bytes) -> RingSignature:
    ssz, esz = group.scalar_size, group.element_size
    if len(raw) < 2:
        raise ValueError("truncated signature")
    count = int.from_bytes(raw[0:2], "big")
    if count < 2 or count % 2:
        raise ValueError("bad scalar count")
    off = 2
    scalars = []
    for _ in range(count):
        scalars.append(group.decode_scalar(raw[off : off + ssz]))
        off += ssz
    ecount = int.from_bytes(raw[off : off + 2], "big")
    off += 2
    if ecount != 1:
        raise ValueError("bad element count")
    a1 = group.decode_element(raw[off : off + esz])
    off += esz
    if off != len(raw):
        raise ValueError("trailing bytes")
    half = count // 2
    return RingSignature(a1=a1, c=tuple(scalars[:half]), z=tuple(scalars[half:]))


class Outcome(Enum):
    INDEPENDENT = "independent"
    LINKED = "linked"
    TRACED = "traced"


@dataclass(frozen=True)
class TraceOutcome:
    kind: Outcome
    signer_index: Optional[int] = None  # 1-based, present iff kind is TRACED


def keygen(rng, group: Group = DEFAULT_GROUP):
    """Return (secret scalar, public element = g^secret)."""
    x = group.scalar_random(rng)
    return x, group.exp(group.g, x)


def _tag_points(group: Group, tag: IssueTag, message: bytes):
    tb = tag.tag_bytes()
    h = group.hash_to_group(_H_DOMAIN, tb)
    a0 = group.hash_to_group(_A0_DOMAIN, tb + message)
    return tb, h, a0


def _sigma_line(group: Group, a0: int, a1: int, n: int):
    # sigma_i = a0 * a1^i, built with n multiplications.
    sigmas = []
    acc = a0
    for _ in range(n):
        acc = group.mul(acc, a1)
        sigmas.append(acc)
    return sigmas


def _challenge(group: Group, tb: bytes, message: bytes, a1: int, commits) -> int:
    enc = group.encode_element
    payload = enc(a1) + message + b"".join(enc(x) for x in commits)
    return group.hash_to_scalar(_CHAL_DOMAIN, tb + payload)


def sign(signer_index: int, secret: int, tag: IssueTag, message: bytes, rng) -> RingSignature:
    """Sign on behalf of the ring; the wire form carries no signer index."""
    group = tag.ring.group
    n = tag.ring.n
    ys = tag.ring.public_keys
    if not 1 <= signer_index <= n:
        raise KeyMismatch("signer index out of range")
    if ys[signer_index - 1] != group.exp(group.g, secret):
        raise KeyMismatch("secret key does not match ring slot")

    tb, h, a0 = _tag_points(group, tag, message)
    sigma_k = group.exp(h, secret)
    # Fit the tag line through (0, a0) and (signer_index, sigma_k).
    a1 = group.exp(group.mul(sigma_k, group.inv(a0)), group.scalar_inv(signer_index))
    sigmas = _sigma_line(group, a0, a1, n)

    k = signer_index - 1
    c = [0] * n
    z = [0] * n
    commits = [0] * (2 * n)
    w = group.scalar_random(rng)
    commits[2 * k] = group.exp(group.g, w)
    commits[2 * k + 1] = group.exp(h, w)
    for i in range(n):
        if i == k:
            continue
        c[i] = group.scalar_random(rng)
        z[i] = group.scalar_random(rng)
        commits[2 * i] = group.mul(group.exp(group.g, z[i]), group.exp(ys[i], c[i]))
        commits[2 * i + 1] = group.mul(group.exp(h, z[i]), group.exp(sigmas[i], c[i]))
    total = _challenge(group, tb, message, a1, commits)
    c[k] = (total - sum(c)) % group.q
    z[k] = (w - c[k] * secret) % group.q
    return RingSignature(a1=a1, c=tuple(c), z=tuple(z))


def verify(tag: IssueTag, message: bytes, sig: RingSignature):
    """Return the n-element trace tag on accept, None on reject.

    Rejection is a result, not a fault: any malformed or forged input must
    land here.
    """
    group = tag.ring.group
    n = tag.ring.n
    ys = tag.ring.public_keys
    if len(sig.c) != n or len(sig.z) != n:
        return None
    if not group.is_element(sig.a1):
        return None
    if any(not 0 <= s < group.q for s in sig.c + sig.z):
        return None

    tb, h, a0 = _tag_points(group, tag, message)
    sigmas = _sigma_line(group, a0, sig.a1, n)
    commits = []
    for i in range(n):
        commits.append(group.mul(group.exp(group.g, sig.z[i]), group.exp(ys[i], sig.c[i])))
        commits.append(group.mul(group.exp(h, sig.z[i]), group.exp(sigmas[i], sig.c[i])))
    if sum(sig.c) % group.q != _challenge(group, tb, message, sig.a1, commits):
        return None
    sig.trace_tag = tuple(sigmas)
    return sig.trace_tag


def _tag_of(tag: IssueTag, message: bytes, sig: RingSignature):
    if sig.trace_tag is not None and len(sig.trace_tag) == tag.ring.n:
        return sig.trace_tag
    out = verify(tag, message, sig)
    if out is None:
        raise InvalidSignature("signature does not verify")
    return out


def compare_tags(tag_a, tag_b) -> TraceOutcome:
    """Element-wise trace-tag comparison implementing the trace contract."""
    equal = [i for i, (x, y) in enumerate(zip(tag_a, tag_b)) if x == y]
    if len(equal) == len(tag_a):
        return TraceOutcome(Outcome.LINKED)
    if len(equal) == 1:
        return TraceOutcome(Outcome.TRACED, signer_index=equal[0] + 1)
    return TraceOutcome(Outcome.INDEPENDENT)


def trace(tag: IssueTag, m1: bytes, sig1: RingSignature, m2: bytes, sig2: RingSignature) -> TraceOutcome:
    """Relate two verifying signatures under one issue tag."""
    return compare_tags(_tag_of(tag, m1, sig1), _tag_of(tag, m2, sig2))


def find_index(tag: IssueTag, message: bytes, sig: RingSignature, secrets) -> int:
    """Test-only oracle: recover the true signer index from dealer secrets.

    Re-derives each candidate's tag point h^{x_i} and matches it against the
    signature's tag line.  Protocol code must never call this; it exists for
    harness assertions only.
    """
    group = tag.ring.group
    tag_points = _tag_of(tag, message, sig)
    h = group.hash_to_group(_H_DOMAIN, tag.tag_bytes())
    for i, x in enumerate(secrets):
        if group.exp(h, x) == tag_points[i]:
            return i + 1
    raise NotFound("no candidate secret matches the tag line")


@dataclass
class TraceStore:
    """Per-issue accumulator of verified signatures for incremental tracing.

    Individual tag values are indexed in a hash map keyed by (position,
    element), so relating a new signature to everything seen so far costs
    O(n) expected lookups.  Single-writer: owned by one protocol instance.
    """

    _by_value: dict = field(default_factory=dict)  # (pos, element) -> entry id
    _tags: dict = field(default_factory=dict)  # entry id -> trace tag

    def check_and_add(self, entry_id, trace_tag):
        """Relate trace_tag against the store; add it if independent.

        Returns (outcome, conflicting entry id or None).  The outcome is the
        first non-independent relation found; positions with no collisions
        mean the signature is independent of everything stored.
        """
        seen = set()
        for pos, val in enumerate(trace_tag):
            other = self._by_value.get((pos, val))
            if other is None or other in seen:
                continue
            seen.add(other)
            outcome = compare_tags(trace_tag, self._tags[other])
            if outcome.kind is not Outcome.INDEPENDENT:
                return outcome, other
        self._tags[entry_id] = trace_tag
        for pos, val in enumerate(trace_tag):
            self._by_value[(pos, val)] = entry_id
        return TraceOutcome(Outcome.INDEPENDENT), None
