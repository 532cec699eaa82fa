# Anonymity-preserving vector consensus: a reduction to n binary consensus
# instances over anonymously broadcast proposals.
#
# Proposer identities are hidden, so instances cannot be indexed by process;
# each starts unlabelled and is labelled with digest(message || signature)
# when the reliable-broadcast layer delivers that proposal.  A delivered,
# valid proposal triggers bin_propose(1) in its instance while fewer than
# n - t ones have been decided; once n - t instances have decided 1, the
# process proposes 0 everywhere it has not proposed yet (including still
# unlabelled instances).  When all n instances have decided, the vector is
# the set of proposals whose instance decided 1, sorted by label bytes.
#
# The handler below replaces the round-initial EST broadcast and the AUX
# broadcast of each instance:  ones are sent as ordinary per-label messages;
# zeros are withheld and announced in one batched EST_ONES / AUX_ONES
# message once all n instances have invoked that round's broadcast.  A
# batched message carries the labels that DID send 1; receivers deposit a
# zero from that sender into every instance not named (skipped entirely
# when all n labels are named, since there are no zeros to convey).

from __future__ import annotations

from typing import NamedTuple, Optional

from .bincons import BinConsState, EstMsg, AuxMsg, CoordMsg, bin_message_size, LABEL_SIZE
from .broadcast import BroadcastState
from .groups import digest

__all__ = ["AvcpState", "OnesMsg", "InvalidProposal", "encode_ones", "decode_ones"]

KIND_EST_ONES = 19
KIND_AUX_ONES = 20

EST = "EST"
AUX = "AUX"


class InvalidProposal(Exception):
    pass


class OnesMsg(NamedTuple):
    instance: bytes
    kind: str  # EST or AUX
    round: int
    ones: frozenset  # labels whose instance sent a 1 this round
    nbytes: int


def ones_size(instance: bytes, count: int) -> int:
    return 4 + len(instance) + 1 + 4 + 2 + count * LABEL_SIZE


def encode_ones(msg: OnesMsg) -> bytes:
    kind = KIND_EST_ONES if msg.kind == EST else KIND_AUX_ONES
    labels = sorted(msg.ones)
    return (
        len(msg.instance).to_bytes(4, "big")
        + msg.instance
        + bytes([kind])
        + msg.round.to_bytes(4, "big")
        + len(labels).to_bytes(2, "big")
        + b"".join(labels)
    )


def decode_ones(raw: bytes) -> OnesMsg:
    ilen = int.from_bytes(raw[:4], "big")
    inst = raw[4 : 4 + ilen]
    off = 4 + ilen
    kind = {KIND_EST_ONES: EST, KIND_AUX_ONES: AUX}[raw[off]]
    rnd = int.from_bytes(raw[off + 1 : off + 5], "big")
    count = int.from_bytes(raw[off + 5 : off + 7], "big")
    off += 7
    labels = []
    for _ in range(count):
        label = raw[off : off + LABEL_SIZE]
        if len(label) != LABEL_SIZE:
            raise ValueError("truncated label")
        labels.append(label)
        off += LABEL_SIZE
    if off != len(raw):
        raise ValueError("trailing bytes")
    return OnesMsg(inst, kind, rnd, frozenset(labels), len(raw))


class _InstanceTransport:
    """Routes one instance's broadcast calls through the batching handler."""

    __slots__ = ("host", "inst")

    def __init__(self, host, inst):
        self.host = host
        self.inst = inst

    def broadcast_est(self, r, bit):
        self.host._handler_broadcast(EST, self.inst, r, bit)

    def broadcast_aux(self, r, bit):
        self.host._handler_broadcast(AUX, self.inst, r, bit)

    def broadcast_est_echo(self, r, bit):
        # The t+1 re-broadcast always has a label and is never batched.
        h = self.host
        h.env.broadcast(EstMsg(h.instance_id, r, self.inst.label, bit, h._bin_size))

    def broadcast_coord(self, r, bit):
        h = self.host
        h.env.broadcast(CoordMsg(h.instance_id, r, self.inst.label, bit, h._bin_size))

    def set_round_timer(self, r, steps):
        self.host.env.set_timer(steps, ("bincons", self.inst.serial, r))

    def decided(self, bit, r):
        self.host._on_decide(self.inst, bit, r)


class AvcpState:
    """One vector-consensus instance at one process (serially driven)."""

    def __init__(
        self,
        env,
        instance_id: bytes,
        n: int,
        t: int,
        ring,
        my_index: int,
        valid_fn,
        decide_cb,
        evidence_cb=None,
        hash_messages: bool = True,
        timer_base: int = 3,
        extra_zero_delay: int = 0,
    ):
        self.env = env
        self.instance_id = instance_id
        self.n = n
        self.t = t
        self.my_index = my_index
        self.valid_fn = valid_fn
        self.decide_cb = decide_cb
        self.extra_zero_delay = extra_zero_delay
        self._bin_size = bin_message_size(instance_id)

        self.arb = BroadcastState(
            env,
            instance_id,
            n,
            t,
            ring,
            my_index,
            deliver_cb=self._on_arb_deliver,
            evidence_cb=evidence_cb,
            hash_messages=hash_messages,
        )

        self.instances = []
        self.unlabelled = []
        for serial in range(n):
            inst = BinConsState(n, t, my_index, transport=None, timer_base=timer_base)
            inst.serial = serial
            inst.transport = _InstanceTransport(self, inst)
            self.instances.append(inst)
            self.unlabelled.append(inst)
        self.labelled: dict = {}

        self.proposals: dict = {}  # label -> (message, sig)
        self.decided_ones: set = set()  # labels whose instance decided 1
        self.decision_count = 0
        self.ones = {EST: {}, AUX: {}}  # kind -> r -> set of labels
        self.counts = {EST: {}, AUX: {}}  # kind -> r -> int
        self.decided_vector = None
        self.own_message: Optional[bytes] = None
        self.decide_rounds: dict = {}  # label/serial -> round (for metrics)
        self._zeros_started = False
        self._pending_direct: dict = {}  # unknown label -> [(sender, kind, r, bit)]
        self._pending_ones: list = []  # [sender, kind, r, ones, missing:set]
        self._ones_seen: set = set()  # (sender, kind, r)
        self._unknown_refs: dict = {}  # sender -> set of unknown labels referenced

    # -- proposing -------------------------------------------------------------

    def propose(self, message: bytes, secret: int, rng) -> None:
        if not self.valid_fn(message, None):
            raise InvalidProposal("proposal fails valid()")
        self.own_message = message
        self.arb.propose(message, secret, rng)

    # -- reliable-broadcast delivery --------------------------------------------

    def _on_arb_deliver(self, message: bytes, sig, payload: bytes) -> None:
        label = digest(payload)
        assert self.unlabelled, "more deliveries than ring members"
        inst = self.unlabelled.pop()
        self.labelled[label] = inst
        if self.valid_fn(message, sig):
            self.proposals[label] = (message, sig)
            if len(self.decided_ones) < self.n - self.t and not inst.proposed:
                inst.set_labelled(label)
                inst.propose(1)
            else:
                inst.set_labelled(label)
        else:
            inst.set_labelled(label)
        for sender, kind, r, bit in self._pending_direct.pop(label, ()):
            self._deposit(inst, sender, kind, r, bit)
        self._unpark_ones(label)
        self._try_output()

    # -- handler: batched zero announcements -----------------------------------

    def _handler_broadcast(self, kind: str, inst, r: int, bit: int) -> None:
        ones = self.ones[kind].setdefault(r, set())
        if bit == 1:
            assert inst.label is not None, "a 1 can only be sent from a labelled instance"
            ones.add(inst.label)
            cls = EstMsg if kind == EST else AuxMsg
            self.env.broadcast(cls(self.instance_id, r, inst.label, 1, self._bin_size))
        counts = self.counts[kind]
        counts[r] = counts.get(r, 0) + 1
        assert counts[r] <= self.n
        if counts[r] == self.n and len(ones) < self.n:
            self.env.broadcast(
                OnesMsg(self.instance_id, kind, r, frozenset(ones), ones_size(self.instance_id, len(ones)))
            )

    # -- receiving ---------------------------------------------------------------

    def _deposit(self, inst, sender: int, kind: str, r: int, bit: int) -> None:
        if kind == EST:
            inst.on_est(sender, r, bit)
        else:
            inst.on_aux(sender, r, bit)

    def _check_quota(self, sender: int, labels) -> bool:
        refs = self._unknown_refs.setdefault(sender, set())
        fresh = [l for l in labels if l not in self.labelled]
        if len(refs | set(fresh)) > self.n:
            return False  # sender references too many unknown labels; drop
        refs.update(fresh)
        return True

    def on_bin_message(self, sender: int, msg) -> None:
        kind = AUX if isinstance(msg, AuxMsg) else EST
        inst = self.labelled.get(msg.label)
        if isinstance(msg, CoordMsg):
            if inst is not None:
                inst.on_coord(sender, msg.round, msg.bit)
            return  # coordinator hints are not worth parking
        if inst is not None:
            self._deposit(inst, sender, kind, msg.round, msg.bit)
            return
        if not self._check_quota(sender, (msg.label,)):
            return
        parked = self._pending_direct.setdefault(msg.label, [])
        if len(parked) < 8 * self.n:  # cap parked traffic per unknown label
            parked.append((sender, kind, msg.round, msg.bit))

    def on_ones(self, sender: int, msg: OnesMsg) -> None:
        key = (sender, msg.kind, msg.round)
        if key in self._ones_seen:
            return
        self._ones_seen.add(key)
        missing = {l for l in msg.ones if l not in self.labelled}
        if missing:
            if self._check_quota(sender, missing):
                self._pending_ones.append([sender, msg.kind, msg.round, msg.ones, missing])
            return
        self._apply_ones(sender, msg.kind, msg.round, msg.ones)

    def _apply_ones(self, sender: int, kind: str, r: int, ones) -> None:
        # A zero from this sender lands in every instance not named: the
        # labelled remainder plus every still-unlabelled instance.
        for label, inst in self.labelled.items():
            if label not in ones:
                self._deposit(inst, sender, kind, r, 0)
        for inst in self.unlabelled:
            self._deposit(inst, sender, kind, r, 0)

    def _unpark_ones(self, new_label: bytes) -> None:
        still = []
        for entry in self._pending_ones:
            entry[4].discard(new_label)
            if entry[4]:
                still.append(entry)
            else:
                self._apply_ones(entry[0], entry[1], entry[2], entry[3])
        self._pending_ones = still

    def on_timer(self, token) -> None:
        tag = token[0]
        if tag == "bincons":
            self.instances[token[1]].on_timer(token[2])
        elif tag == "zeros":
            self._propose_zeros()

    # -- decisions -----------------------------------------------------------------

    def _on_decide(self, inst, bit: int, r: int) -> None:
        self.decision_count += 1
        self.decide_rounds[inst.label or inst.serial] = r
        if bit == 1:
            self.decided_ones.add(inst.label)
            if len(self.decided_ones) == self.n - self.t and not self._zeros_started:
                if self.extra_zero_delay > 0:
                    self.env.set_timer(self.extra_zero_delay, ("zeros",))
                else:
                    self._propose_zeros()
        if self.decision_count == self.n:
            r_max = max(self.decide_rounds.values())
            for other in self.instances:
                other.set_halt_bound(r_max + 2)
            self._try_output()

    def _propose_zeros(self) -> None:
        if self._zeros_started:
            return
        self._zeros_started = True
        for inst in self.instances:
            if not inst.proposed:
                inst.propose(0)

    def _try_output(self) -> None:
        if self.decided_vector is not None or self.decision_count < self.n:
            return
        if any(label not in self.proposals for label in self.decided_ones):
            return  # wait for the proposals behind late 1-decisions
        vector = [(label, *self.proposals[label]) for label in sorted(self.decided_ones)]
        self.decided_vector = tuple((m, s) for _, m, s in vector)
        self.decide_cb(self.decided_vector)
