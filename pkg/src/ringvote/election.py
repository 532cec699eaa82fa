# Arbitrary-ballot election: threshold-encrypted ballots agreed on by
# vector consensus, then collaboratively decrypted.
#
# Every voter prepends a fresh 16-byte nonce to its ballot, encrypts the
# result under the group key, and proposes the ciphertext to vector
# consensus whose valid() predicate is ciphertext well-formedness.  After
# the vector is decided, byte-identical ciphertexts are collapsed to one
# copy (a replayed ciphertext must be byte-identical thanks to
# non-malleability, and keeping one copy protects the honest original).
# Each process then broadcasts one DECS message carrying its decryption
# share for every unique ciphertext; incoming share batches are only
# consumed after our own broadcast, must cover exactly the unique
# ciphertexts, and must verify in full, or the whole batch is dropped.
# Once every ciphertext has k = t + 1 valid shares from distinct indices,
# everything is combined and the nonce-stripped plaintexts are returned.

from __future__ import annotations

from typing import NamedTuple

from . import tenc
from .avcp import AvcpState

__all__ = ["ElectionState", "DecsMsg", "NONCE_SIZE", "prepare_ballot", "dedupe", "encode_decs"]

KIND_DECS = 32
NONCE_SIZE = 16


class DecsMsg(NamedTuple):
    instance: bytes
    entries: tuple  # ((ciphertext_bytes, DecryptionShare), ...) in unique order
    nbytes: int


def decs_size(instance: bytes, entries) -> int:
    body = sum(4 + len(cb) + sh_len for cb, sh_len in entries)
    return 4 + len(instance) + 1 + 2 + body


def encode_decs(group, msg: DecsMsg) -> bytes:
    out = [
        len(msg.instance).to_bytes(4, "big"),
        msg.instance,
        bytes([KIND_DECS]),
        len(msg.entries).to_bytes(2, "big"),
    ]
    for cbytes, share in msg.entries:
        out.append(len(cbytes).to_bytes(4, "big"))
        out.append(cbytes)
        out.append(share.encode(group))
    return b"".join(out)


def prepare_ballot(pub, content: bytes, rng, instance_id: bytes = b""):
    """Nonce the content and encrypt it; the result passes verify_enc."""
    nonce = rng.randbytes(NONCE_SIZE)
    return tenc.encrypt(pub, nonce + content, rng, label=instance_id)


def dedupe(enc_ballots):
    """Collapse byte-identical ciphertexts, keeping first occurrences."""
    seen = set()
    unique = []
    for cbytes in enc_ballots:
        if cbytes not in seen:
            seen.add(cbytes)
            unique.append(cbytes)
    return unique


class InvalidShareBatch(Exception):
    pass


class ElectionState:
    """One election at one process: AVCP over ciphertexts plus decryption."""

    def __init__(
        self,
        env,
        instance_id: bytes,
        n: int,
        t: int,
        ring,
        my_index: int,
        pub,
        share_key,
        rng,
        output_cb,
        evidence_cb=None,
        hash_messages: bool = True,
        timer_base: int = 3,
        extra_zero_delay: int = 0,
        only_2t_broadcast: bool = False,
    ):
        self.env = env
        self.instance_id = instance_id
        self.n = n
        self.t = t
        self.my_index = my_index
        self.pub = pub
        self.share_key = share_key
        self.rng = rng
        self.output_cb = output_cb
        self.only_2t_broadcast = only_2t_broadcast

        self.avcp = AvcpState(
            env,
            instance_id,
            n,
            t,
            ring,
            my_index,
            valid_fn=self._valid,
            decide_cb=self._on_vector,
            evidence_cb=evidence_cb,
            hash_messages=hash_messages,
            timer_base=timer_base,
            extra_zero_delay=extra_zero_delay,
        )

        self.enc_ballots = None  # decided vector of ciphertext bytes
        self.unique_encs = None  # deduped ciphertext bytes, first-occurrence order
        self._ciphertexts = {}  # bytes -> decoded Ciphertext
        self.partial_decs: dict = {}  # bytes -> {index: share}
        self.has_broadcast = False
        self.ballots = None  # final plaintexts, nonces stripped
        self._queued_decs: list = []
        self.bad_batch_senders: set = set()

    # -- the AVCP validity predicate: well-formed encryption for this election

    def _valid(self, message: bytes, sig=None) -> bool:
        c = self._decode(message)
        return c is not None

    def _decode(self, message: bytes):
        c = self._ciphertexts.get(message)
        if c is None:
            try:
                cand = tenc.decode_ciphertext(self.pub.group, message)
            except ValueError:
                return None
            if cand.label != self.instance_id or not tenc.verify_enc(self.pub, cand):
                return None
            c = self._ciphertexts[message] = cand
        return c

    # -- protocol ------------------------------------------------------------

    def run(self, content: bytes, secret: int) -> None:
        ballot = prepare_ballot(self.pub, content, self.rng, self.instance_id)
        self.avcp.propose(ballot.encode(self.pub.group), secret, self.rng)

    def _on_vector(self, vector) -> None:
        self.enc_ballots = [m for m, _sig in vector]
        self.unique_encs = dedupe(self.enc_ballots)
        own_shares = []
        for cbytes in self.unique_encs:
            c = self._decode(cbytes)
            sh = tenc.share_decrypt(self.pub, self.share_key, c, self.rng)
            self.partial_decs.setdefault(cbytes, {})[sh.index] = sh
            own_shares.append((cbytes, sh))
        if not self.only_2t_broadcast or self.my_index <= 2 * self.t:
            sh_len = 2 + self.pub.group.element_size + 2 * self.pub.group.scalar_size
            sizes = [(cb, sh_len) for cb, _ in own_shares]
            self.env.broadcast(DecsMsg(self.instance_id, tuple(own_shares), decs_size(self.instance_id, sizes)))
        self.has_broadcast = True
        queued, self._queued_decs = self._queued_decs, []
        for sender, entries in queued:
            self.on_decs(sender, entries)
        self._check_done()

    def on_decs(self, sender: int, entries) -> None:
        if self.ballots is not None:
            return
        if not self.has_broadcast:
            self._queued_decs.append((sender, entries))
            return
        try:
            self._validate_batch(entries)
        except InvalidShareBatch:
            self.bad_batch_senders.add(sender)
            return
        for cbytes, sh in entries:
            self.partial_decs[cbytes][sh.index] = sh
        self._check_done()

    def _validate_batch(self, entries) -> None:
        """Batches must be exhaustive and well-formed, or they are dropped."""
        if [cb for cb, _ in entries] != self.unique_encs:
            raise InvalidShareBatch("batch does not cover the unique ciphertexts")
        for cbytes, sh in entries:
            if not tenc.verify_share(self.pub, self._ciphertexts[cbytes], sh):
                raise InvalidShareBatch("share fails verification")

    def _check_done(self) -> None:
        if self.ballots is not None:
            return
        k = self.pub.k
        if any(len(self.partial_decs[cb]) < k for cb in self.unique_encs):
            return
        ballots = []
        for cbytes in self.unique_encs:
            by_index = self.partial_decs[cbytes]
            shares = [by_index[i] for i in sorted(by_index)[:k]]
            plain = tenc.combine(self.pub, self._ciphertexts[cbytes], shares)
            ballots.append(plain[NONCE_SIZE:])
        self.ballots = ballots
        self.output_cb(ballots)

    # -- message routing glue ---------------------------------------------------

    def on_timer(self, token):
        self.avcp.on_timer(token)
