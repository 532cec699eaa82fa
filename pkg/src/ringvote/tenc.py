# (t+1)-out-of-n threshold encryption with publicly verifiable ciphertexts
# and decryption shares, following Shoup and Gennaro's non-interactive TDH2
# construction, in hybrid mode so plaintexts are arbitrary byte strings.
#
# Dealing is a trusted-dealer Shamir sharing of the decryption exponent x
# (degree t, so any k = t + 1 shares reconstruct): PK = g^x, VK_i = g^{s_i}.
# A ciphertext carries u = g^r, ubar = ghat^r and a Fiat-Shamir proof of
# log_g u = log_ghat ubar, which binds the symmetric part and the instance
# label and makes any bit-flip fail verification.  A decryption share is
# u_i = u^{s_i} with a Chaum-Pedersen proof against VK_i; any k valid shares
# combine via Lagrange interpolation in the exponent at 0.

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .groups import Group, DEFAULT_GROUP

__all__ = [
    "TencPublic",
    "TencShareKey",
    "Ciphertext",
    "DecryptionShare",
    "BadParameters",
    "PlaintextTooLong",
    "InvalidCiphertext",
    "InsufficientShares",
    "InvalidShare",
    "deal",
    "encrypt",
    "verify_enc",
    "share_decrypt",
    "verify_share",
    "combine",
    "lagrange_at_zero",
]

MAX_PLAINTEXT = 64 * 1024

_GHAT_DOMAIN = b"tenc/second-generator"
_E_DOMAIN = b"tenc/ciphertext-proof"
_SH_DOMAIN = b"tenc/share-proof"
_DEM_DOMAIN = b"tenc/keystream"


class BadParameters(Exception):
    pass


class PlaintextTooLong(Exception):
    pass


class InvalidCiphertext(Exception):
    pass


class InsufficientShares(Exception):
    pass


class InvalidShare(Exception):
    pass


@dataclass(frozen=True)
class TencPublic:
    group: Group
    n: int
    k: int  # threshold, = t + 1
    pk: int
    vks: tuple  # VK_1 .. VK_n

    @property
    def ghat(self) -> int:
        # Second generator with unknown discrete log, fixed per group.
        g = self.group
        return g.hash_to_group(_GHAT_DOMAIN, g.encode_element(g.g))


@dataclass(frozen=True)
class TencShareKey:
    index: int  # 1-based evaluation point
    share: int  # s_index = f(index)


@dataclass(frozen=True)
class Ciphertext:
    label: bytes
    data: bytes  # keystream-masked plaintext
    u: int
    ubar: int
    e: int
    f: int

    def encode(self, group: Group) -> bytes:
        parts = [
            len(self.label).to_bytes(4, "big"),
            self.label,
            len(self.data).to_bytes(4, "big"),
            self.data,
            group.encode_element(self.u),
            group.encode_element(self.ubar),
            group.encode_scalar(self.e),
            group.encode_scalar(self.f),
        ]
        return b"".join(parts)


def decode_ciphertext(group: Group, raw: bytes) -> Ciphertext:
    off = 0

    def take(count):
        nonlocal off
        if off + count > len(raw):
            raise ValueError("truncated ciphertext")
        piece = raw[off : off + count]
        off += count
        return piece

    llen = int.from_bytes(take(4), "big")
    label = take(llen)
    dlen = int.from_bytes(take(4), "big")
    data = take(dlen)
    u = group.decode_element(take(group.element_size))
    ubar = group.decode_element(take(group.element_size))
    e = group.decode_scalar(take(group.scalar_size))
    f = group.decode_scalar(take(group.scalar_size))
    if off != len(raw):
        raise ValueError("trailing bytes")
    return Ciphertext(label=label, data=data, u=u, ubar=ubar, e=e, f=f)


@dataclass(frozen=True)
class DecryptionShare:
    index: int
    ui: int
    e: int
    f: int

    def encode(self, group: Group) -> bytes:
        return (
            self.index.to_bytes(2, "big")
            + group.encode_element(self.ui)
            + group.encode_scalar(self.e)
            + group.encode_scalar(self.f)
        )


def decode_share(group: Group, raw: bytes) -> DecryptionShare:
    esz, ssz = group.element_size, group.scalar_size
    if len(raw) != 2 + esz + 2 * ssz:
        raise ValueError("bad share length")
    index = int.from_bytes(raw[:2], "big")
    ui = group.decode_element(raw[2 : 2 + esz])
    e = group.decode_scalar(raw[2 + esz : 2 + esz + ssz])
    f = group.decode_scalar(raw[2 + esz + ssz :])
    return DecryptionShare(index=index, ui=ui, e=e, f=f)


def deal(n: int, t: int, rng, group: Group = DEFAULT_GROUP):
    """Trusted-dealer setup: returns (TencPublic, [TencShareKey] * n)."""
    if not n > 3 * t or t < 0:
        raise BadParameters("need n > 3t >= 0")
    k = t + 1
    coeffs = [group.scalar_random(rng) for _ in range(k)]  # degree t, f(0) = x
    x = coeffs[0]

    def f(i):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * i + c) % group.q
        return acc

    shares = [TencShareKey(index=i, share=f(i)) for i in range(1, n + 1)]
    vks = tuple(group.exp(group.g, sk.share) for sk in shares)
    return TencPublic(group=group, n=n, k=k, pk=group.exp(group.g, x), vks=vks), shares


def _keystream(group: Group, secret_point: int, length: int) -> bytes:
    seed = hashlib.sha256(_DEM_DOMAIN + group.encode_element(secret_point)).digest()
    out = b""
    ctr = 0
    while len(out) < length:
        out += hashlib.sha256(seed + ctr.to_bytes(8, "big")).digest()
        ctr += 1
    return out[:length]


def _xor(data: bytes, stream: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, stream))


def _proof_challenge(group: Group, label, data, u, w, ubar, wbar) -> int:
    enc = group.encode_element
    payload = (
        len(label).to_bytes(4, "big")
        + label
        + data
        + enc(u)
        + enc(w)
        + enc(ubar)
        + enc(wbar)
    )
    return group.hash_to_scalar(_E_DOMAIN, payload)


def encrypt(pub: TencPublic, plaintext: bytes, rng, label: bytes = b"") -> Ciphertext:
    if len(plaintext) > MAX_PLAINTEXT:
        raise PlaintextTooLong(f"{len(plaintext)} > {MAX_PLAINTEXT}")
    group = pub.group
    r = group.scalar_random(rng)
    s = group.scalar_random(rng)
    u = group.exp(group.g, r)
    ubar = group.exp(pub.ghat, r)
    w = group.exp(group.g, s)
    wbar = group.exp(pub.ghat, s)
    data = _xor(plaintext, _keystream(group, group.exp(pub.pk, r), len(plaintext)))
    e = _proof_challenge(group, label, data, u, w, ubar, wbar)
    f = (s + r * e) % group.q
    return Ciphertext(label=label, data=data, u=u, ubar=ubar, e=e, f=f)


def verify_enc(pub: TencPublic, c: Ciphertext) -> bool:
    """True iff the embedded well-formedness proof checks out."""
    group = pub.group
    if not (group.is_element(c.u) and group.is_element(c.ubar)):
        return False
    if not (0 <= c.e < group.q and 0 <= c.f < group.q):
        return False
    w = group.mul(group.exp(group.g, c.f), group.inv(group.exp(c.u, c.e)))
    wbar = group.mul(group.exp(pub.ghat, c.f), group.inv(group.exp(c.ubar, c.e)))
    return c.e == _proof_challenge(group, c.label, c.data, c.u, w, c.ubar, wbar)


def _share_challenge(group: Group, index, u, ui, uhat, hhat) -> int:
    enc = group.encode_element
    payload = index.to_bytes(2, "big") + enc(u) + enc(ui) + enc(uhat) + enc(hhat)
    return group.hash_to_scalar(_SH_DOMAIN, payload)


def share_decrypt(pub: TencPublic, key: TencShareKey, c: Ciphertext, rng) -> DecryptionShare:
    """Partial decryption u^{s_i} plus a proof it matches VK_i."""
    if not verify_enc(pub, c):
        raise InvalidCiphertext("refusing to decrypt an unverified ciphertext")
    group = pub.group
    ui = group.exp(c.u, key.share)
    s = group.scalar_random(rng)
    uhat = group.exp(c.u, s)
    hhat = group.exp(group.g, s)
    e = _share_challenge(group, key.index, c.u, ui, uhat, hhat)
    f = (s + key.share * e) % group.q
    return DecryptionShare(index=key.index, ui=ui, e=e, f=f)


def verify_share(pub: TencPublic, c: Ciphertext, sh: DecryptionShare) -> bool:
    group = pub.group
    if not 1 <= sh.index <= pub.n:
        return False
    if not group.is_element(sh.ui):
        return False
    if not (0 <= sh.e < group.q and 0 <= sh.f < group.q):
        return False
    vk = pub.vks[sh.index - 1]
    uhat = group.mul(group.exp(c.u, sh.f), group.inv(group.exp(sh.ui, sh.e)))
    hhat = group.mul(group.exp(group.g, sh.f), group.inv(group.exp(vk, sh.e)))
    return sh.e == _share_challenge(group, sh.index, c.u, sh.ui, uhat, hhat)


def lagrange_at_zero(group: Group, indices) -> dict:
    """Lagrange coefficients at 0 for the given distinct evaluation points."""
    coeffs = {}
    for j in indices:
        num, den = 1, 1
        for m in indices:
            if m == j:
                continue
            num = num * m % group.q
            den = den * (m - j) % group.q
        coeffs[j] = num * group.scalar_inv(den) % group.q
    return coeffs


def combine(pub: TencPublic, c: Ciphertext, shares) -> bytes:
    """Recover the plaintext from any k distinct valid shares.

    Every provided share is checked; the interpolation uses the k lowest
    indices, but robustness of the scheme makes any valid k-subset yield
    the same plaintext.
    """
    group = pub.group
    by_index = {}
    for sh in shares:
        if not verify_share(pub, c, sh):
            raise InvalidShare(f"share {sh.index} fails verification")
        by_index.setdefault(sh.index, sh)
    if len(by_index) < pub.k:
        raise InsufficientShares(f"{len(by_index)} distinct valid shares < k={pub.k}")
    chosen = sorted(by_index)[: pub.k]
    lam = lagrange_at_zero(group, chosen)
    point = 1
    for j in chosen:
        point = group.mul(point, group.exp(by_index[j].ui, lam[j]))
    return _xor(c.data, _keystream(group, point, len(c.data)))
