# Prime-order group arithmetic and hashing shared by the ring-signature and
# threshold-encryption schemes.
#
# The group is the order-q subgroup of quadratic residues of Z_p* for a safe
# prime p = 2q + 1 (a Schnorr group).  Group elements are plain Python ints
# in [1, p); scalars are plain ints in [0, q).  This keeps the hot paths
# (thousands of modexps per simulated protocol run) free of wrapper overhead,
# mirroring how the reference math is usually written.
#
# WARNING: the default parameter set uses a 256-bit modulus.  That is far
# too small for real-world discrete-log security and is chosen purely so
# that large simulated runs (hundreds of signers) finish in minutes.  A
# 2048-bit parameter set (MODP_2048) is included for realistic sizing; all
# code is parametric in the group.

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

try:  # gmpy2 roughly triples modexp throughput; fall back to builtin pow
    from gmpy2 import powmod as _powmod
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _powmod = pow

__all__ = [
    "Group",
    "DEFAULT_GROUP",
    "MODP_2048",
    "digest",
    "DIGEST_SIZE",
]

DIGEST_SIZE = 32


def digest(payload: bytes) -> bytes:
    """32-byte collision-resistant digest of a byte string (SHA-256)."""
    return hashlib.sha256(payload).digest()


def _frame(domain: bytes, payload: bytes) -> bytes:
    # Length-prefixing the domain makes distinct domains collision-free by
    # construction, regardless of payload contents.
    return struct.pack(">I", len(domain)) + domain + payload


@dataclass(frozen=True)
class Group:
    """A Schnorr group: the order-q subgroup of Z_p* with p = 2q + 1."""

    p: int
    q: int
    g: int
    name: str = "group"

    @property
    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        return (self.q.bit_length() + 7) // 8

    # -- arithmetic -------------------------------------------------------

    def exp(self, base: int, e: int) -> int:
        return int(_powmod(base, e, self.p))

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def inv(self, a: int) -> int:
        return int(_powmod(a, self.p - 2, self.p))

    def scalar_inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("scalar has no inverse")
        return int(_powmod(a, self.q - 2, self.q))

    def is_element(self, x: int) -> bool:
        # Membership in the prime-order subgroup, not just in Z_p*.
        return 0 < x < self.p and self.exp(x, self.q) == 1

    # -- randomness and hashing -------------------------------------------

    def scalar_random(self, rng) -> int:
        """Uniform scalar in [0, q) from a seeded random source."""
        return rng.randrange(self.q)

    def hash_to_scalar(self, domain: bytes, payload: bytes) -> int:
        h = hashlib.sha256(_frame(domain, payload)).digest()
        return int.from_bytes(h, "big") % self.q

    def hash_to_group(self, domain: bytes, payload: bytes) -> int:
        """Deterministic map into the subgroup; never the identity.

        Squaring a nonzero residue lands in the quadratic-residue subgroup
        (cofactor 2); candidates hashing to 0 or 1 are rejected and the
        counter bumped, so no discrete log of the output is known.
        """
        framed = _frame(domain, payload)
        ctr = 0
        while True:
            h = hashlib.sha256(framed + struct.pack(">I", ctr)).digest()
            u = int.from_bytes(h, "big") % self.p
            x = u * u % self.p
            if x > 1:
                return x
            ctr += 1

    # -- canonical encodings ------------------------------------------------

    def encode_scalar(self, s: int) -> bytes:
        return s.to_bytes(self.scalar_size, "little")

    def decode_scalar(self, raw: bytes) -> int:
        if len(raw) != self.scalar_size:
            raise ValueError("bad scalar length")
        s = int.from_bytes(raw, "little")
        if s >= self.q:
            raise ValueError("scalar out of range")
        return s

    def encode_element(self, x: int) -> bytes:
        return x.to_bytes(self.element_size, "big")

    def decode_element(self, raw: bytes) -> int:
        if len(raw) != self.element_size:
            raise ValueError("bad element length")
        x = int.from_bytes(raw, "big")
        if not self.is_element(x):
            raise ValueError("not a group element")
        return x


# Default parameters: a 256-bit safe prime found by deterministic search
# (q = nextprime-chain from a fixed 255-bit seed until 2q + 1 is prime);
# primality of both is re-checked in the test suite.  g = 4 = 2^2 is a
# quadratic residue and hence generates the order-q subgroup.
DEFAULT_GROUP = Group(
    p=0x932F909E1BB9FD48F36111080252229CB5BC2C4618EA7343E0473784A55AC1CB,
    q=0x4997C84F0DDCFEA479B088840129114E5ADE16230C7539A1F0239BC252AD60E5,
    g=4,
    name="schnorr256",
)

# RFC 3526 group 14 modulus (a 2048-bit safe prime).  The RFC generator 2 is
# a quadratic residue here (p = 7 mod 8); we use 4 for uniformity with the
# default group.
_MODP_2048_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
MODP_2048 = Group(p=_MODP_2048_P, q=(_MODP_2048_P - 1) // 2, g=4, name="modp2048")

GROUPS = {g.name: g for g in (DEFAULT_GROUP, MODP_2048)}
