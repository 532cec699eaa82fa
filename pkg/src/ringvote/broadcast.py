# Anonymity-preserving all-to-all reliable broadcast.
#
# Bracha-style INIT/ECHO/READY with one twist: the INIT travels over an
# anonymous channel and carries a traceable ring signature instead of a
# sender identity.  On first receipt of an INIT a process verifies the
# signature and traces it against everything buffered or delivered for the
# same instance; any non-independent relation means a double-sign, so the
# payload is dropped and evidence is recorded.  Quorums are the classic
# ones for n > 3t:
#
#   ECHO  from more than (n + t) / 2 distinct senders  -> send READY
#   READY from t + 1 distinct senders                  -> send READY (amplify)
#   READY from 2t + 1 distinct senders                 -> deliver
#
# By default ECHO and READY carry the 32-byte digest of the payload rather
# than the payload itself; a process that reaches the delivery quorum
# without knowing the preimage asks t + 1 peers for it.

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import trs
from .groups import digest

__all__ = [
    "AlreadyProposed",
    "BroadcastState",
    "DoubleSignEvidence",
    "InitMsg",
    "EchoMsg",
    "ReadyMsg",
    "RecoveryReq",
    "RecoveryResp",
    "payload_bytes",
    "encode_broadcast",
]

KIND_INIT = 1
KIND_ECHO = 2
KIND_READY = 3
KIND_REQ = 4
KIND_RESP = 5

_KIND_NAMES = {
    KIND_INIT: "INIT",
    KIND_ECHO: "ECHO",
    KIND_READY: "READY",
    KIND_REQ: "REQ",
    KIND_RESP: "RESP",
}


class AlreadyProposed(Exception):
    pass


class InitMsg(NamedTuple):
    instance: bytes
    message: bytes
    sig: "trs.RingSignature"
    nbytes: int


class EchoMsg(NamedTuple):
    instance: bytes
    ref: bytes  # digest, or full payload bytes when hashing is off
    is_digest: bool
    nbytes: int


class ReadyMsg(NamedTuple):
    instance: bytes
    ref: bytes
    is_digest: bool
    nbytes: int


class RecoveryReq(NamedTuple):
    instance: bytes
    digest: bytes
    nbytes: int


class RecoveryResp(NamedTuple):
    instance: bytes
    message: bytes
    sig: "trs.RingSignature"
    nbytes: int


def payload_bytes(group, message: bytes, sig) -> bytes:
    """Serialization of (message, signature); also the label preimage."""
    return len(message).to_bytes(4, "big") + message + sig.encode(group)


def _header_len(instance: bytes) -> int:
    # u32 id length + id + kind byte + digest/payload flag byte
    return 4 + len(instance) + 2


def encode_broadcast(group, msg) -> bytes:
    """Wire codec: length-prefixed id, kind, flag, then payload bytes."""
    inst = msg.instance
    head = len(inst).to_bytes(4, "big") + inst
    if isinstance(msg, InitMsg):
        return head + bytes([KIND_INIT, 0]) + payload_bytes(group, msg.message, msg.sig)
    if isinstance(msg, (EchoMsg, ReadyMsg)):
        kind = KIND_ECHO if isinstance(msg, EchoMsg) else KIND_READY
        return head + bytes([kind, 1 if msg.is_digest else 0]) + msg.ref
    if isinstance(msg, RecoveryReq):
        return head + bytes([KIND_REQ, 1]) + msg.digest
    if isinstance(msg, RecoveryResp):
        return head + bytes([KIND_RESP, 0]) + payload_bytes(group, msg.message, msg.sig)
    raise TypeError(f"not a broadcast message: {msg!r}")


@dataclass(frozen=True)
class DoubleSignEvidence:
    """Record of a detected double-sign; surfaced to the harness only."""

    instance: bytes
    kind: "trs.Outcome"
    signer_index: Optional[int]  # present iff traced
    digest_new: bytes
    digest_old: bytes


@dataclass
class _PayloadRecord:
    payload: Optional[tuple] = None  # (message, sig, payload_bytes)
    init_seen: bool = False
    echo_senders: set = field(default_factory=set)
    ready_senders: set = field(default_factory=set)
    sent_echo: bool = False
    sent_ready: bool = False
    delivered: bool = False
    awaiting_recovery: bool = False
    requested_from: set = field(default_factory=set)
    pending_requests: set = field(default_factory=set)


class BroadcastState:
    """One reliable-broadcast instance (a single ID) at one process.

    Single-owner state machine: every entry point is invoked serially by the
    hosting process's event loop.
    """

    def __init__(
        self,
        env,
        instance_id: bytes,
        n: int,
        t: int,
        ring,
        my_index: int,
        deliver_cb,
        evidence_cb=None,
        hash_messages: bool = True,
    ):
        if not n > 3 * t:
            raise ValueError("need n > 3t")
        self.env = env
        self.instance_id = instance_id
        self.n = n
        self.t = t
        self.ring = ring
        self.group = ring.group
        self.my_index = my_index
        self.deliver_cb = deliver_cb
        self.evidence_cb = evidence_cb
        self.hash_messages = hash_messages
        self.tag = trs.IssueTag(ring, trs.make_issue(instance_id, "INIT"))
        self.echo_quorum = (n + t) // 2 + 1
        self.ready_amplify = t + 1
        self.ready_deliver = 2 * t + 1
        self.proposed = False
        self.own_digest: Optional[bytes] = None
        self.msgs_buffer: set = set()  # digests buffered, not yet delivered
        self.msgs_delivered: set = set()  # digests delivered
        self.rejected_inits = 0
        self._records: dict = {}
        self._trace_store = trs.TraceStore()

    # -- sending ------------------------------------------------------------

    def propose(self, message: bytes, secret: int, rng) -> None:
        """Sign and emit the anonymous INIT, including to ourselves."""
        if self.proposed:
            raise AlreadyProposed(self.instance_id)
        self.proposed = True
        sig = trs.sign(self.my_index, secret, self.tag, message, rng)
        pb = payload_bytes(self.group, message, sig)
        self.own_digest = digest(pb)
        msg = InitMsg(self.instance_id, message, sig, _header_len(self.instance_id) + len(pb))
        self.env.anon_broadcast(msg)

    def _ref_for(self, d: bytes, rec) -> tuple:
        if self.hash_messages:
            return d, True, 32
        pb = rec.payload[2]
        return pb, False, len(pb)

    def _send_echo(self, d: bytes, rec) -> None:
        ref, is_digest, sz = self._ref_for(d, rec)
        self.env.broadcast(EchoMsg(self.instance_id, ref, is_digest, _header_len(self.instance_id) + sz))

    def _send_ready(self, d: bytes, rec) -> None:
        rec.sent_ready = True
        if self.hash_messages:
            ref, is_digest, sz = d, True, 32
        elif rec.payload is not None:
            ref, is_digest, sz = rec.payload[2], False, len(rec.payload[2])
        else:
            # Plain-payload mode can still amplify READY for a payload it has
            # not seen: fall back to the digest form.
            ref, is_digest, sz = d, True, 32
        self.env.broadcast(ReadyMsg(self.instance_id, ref, is_digest, _header_len(self.instance_id) + sz))

    # -- receiving ------------------------------------------------------------

    def _rec(self, d: bytes) -> _PayloadRecord:
        rec = self._records.get(d)
        if rec is None:
            rec = self._records[d] = _PayloadRecord()
        return rec

    def on_init(self, message: bytes, sig) -> None:
        pb = payload_bytes(self.group, message, sig)
        d = digest(pb)
        rec = self._rec(d)
        if rec.init_seen:
            return  # replayed identical INIT: first-receipt guard
        rec.init_seen = True
        if rec.payload is not None:
            return  # already recovered through the request path
        if not self._admit_payload(d, rec, message, sig, pb):
            return
        if not rec.sent_echo:
            rec.sent_echo = True
            self._send_echo(d, rec)
        self._check_quorums(d, rec)

    def _admit_payload(self, d: bytes, rec, message: bytes, sig, pb: bytes) -> bool:
        """Signature check plus tracing against buffer and delivered sets."""
        trace_tag = trs.verify(self.tag, message, sig)
        if trace_tag is None:
            self.rejected_inits += 1
            return False
        outcome, other = self._trace_store.check_and_add(d, trace_tag)
        if outcome.kind is not trs.Outcome.INDEPENDENT:
            if self.evidence_cb is not None:
                self.evidence_cb(
                    DoubleSignEvidence(
                        instance=self.instance_id,
                        kind=outcome.kind,
                        signer_index=outcome.signer_index,
                        digest_new=d,
                        digest_old=other,
                    )
                )
            return False
        rec.payload = (message, sig, pb)
        self.msgs_buffer.add(d)
        for requester in sorted(rec.pending_requests):
            self._answer_request(requester, rec)
        rec.pending_requests.clear()
        return True

    def _key_of(self, ref: bytes, is_digest: bool):
        """Map a message reference to (digest, payload bytes or None)."""
        if is_digest:
            return (ref, None) if len(ref) == 32 else (None, None)
        return digest(ref), ref

    def on_echo(self, sender: int, ref: bytes, is_digest: bool) -> None:
        d, _ = self._key_of(ref, is_digest)
        if d is None:
            return
        rec = self._rec(d)
        if sender in rec.echo_senders:
            return  # one tally per sender per payload
        rec.echo_senders.add(sender)
        if rec.awaiting_recovery and sender not in rec.requested_from:
            # New ECHO sender is a fresh candidate holder of the preimage.
            rec.requested_from.add(sender)
            self.env.send(sender, RecoveryReq(self.instance_id, d, _header_len(self.instance_id) + 32))
        self._check_quorums(d, rec)

    def on_ready(self, sender: int, ref: bytes, is_digest: bool) -> None:
        d, _ = self._key_of(ref, is_digest)
        if d is None:
            return
        rec = self._rec(d)
        if sender in rec.ready_senders:
            return
        rec.ready_senders.add(sender)
        self._check_quorums(d, rec)

    def _check_quorums(self, d: bytes, rec) -> None:
        if not rec.sent_ready and len(rec.echo_senders) >= self.echo_quorum:
            self._send_ready(d, rec)
        if not rec.sent_ready and len(rec.ready_senders) >= self.ready_amplify:
            self._send_ready(d, rec)
        if not rec.delivered and len(rec.ready_senders) >= self.ready_deliver:
            if rec.payload is not None:
                self._deliver(d, rec)
            else:
                self._start_recovery(d, rec)

    # -- recovery (digest reached delivery quorum, preimage unknown) --------

    def _start_recovery(self, d: bytes, rec) -> None:
        if rec.awaiting_recovery:
            return
        rec.awaiting_recovery = True
        targets = [s for s in sorted(rec.echo_senders) if s != self.my_index]
        for s in sorted(rec.ready_senders):
            if s != self.my_index and s not in targets:
                targets.append(s)
        for s in targets[: self.t + 1]:
            rec.requested_from.add(s)
            self.env.send(s, RecoveryReq(self.instance_id, d, _header_len(self.instance_id) + 32))

    def on_recovery_request(self, sender: int, d: bytes) -> None:
        rec = self._records.get(d)
        if rec is not None and rec.payload is not None:
            self._answer_request(sender, rec)
        elif rec is not None:
            rec.pending_requests.add(sender)
        else:
            self._rec(d).pending_requests.add(sender)

    def _answer_request(self, requester: int, rec) -> None:
        message, sig, pb = rec.payload
        self.env.send(
            requester,
            RecoveryResp(self.instance_id, message, sig, _header_len(self.instance_id) + len(pb)),
        )

    def on_recovery_payload(self, message: bytes, sig) -> None:
        pb = payload_bytes(self.group, message, sig)
        d = digest(pb)
        rec = self._records.get(d)
        if rec is None or not rec.awaiting_recovery or rec.payload is not None:
            return
        # The quorum vouched for the digest; collision resistance pins the
        # payload.  Verify anyway and record the tag for future tracing, but
        # a trace conflict no longer blocks delivery.
        trace_tag = trs.verify(self.tag, message, sig)
        if trace_tag is None:
            return
        outcome, other = self._trace_store.check_and_add(d, trace_tag)
        if outcome.kind is not trs.Outcome.INDEPENDENT and self.evidence_cb is not None:
            self.evidence_cb(
                DoubleSignEvidence(
                    instance=self.instance_id,
                    kind=outcome.kind,
                    signer_index=outcome.signer_index,
                    digest_new=d,
                    digest_old=other,
                )
            )
        rec.payload = (message, sig, pb)
        rec.awaiting_recovery = False
        self.msgs_buffer.add(d)
        self._check_quorums(d, rec)

    def _deliver(self, d: bytes, rec) -> None:
        rec.delivered = True
        self.msgs_buffer.discard(d)
        self.msgs_delivered.add(d)
        message, sig, pb = rec.payload
        self.deliver_cb(message, sig, pb)
