# Safe binary Byzantine consensus over BV-broadcast, with the rotating
# weak-coordinator broadcast for termination under partial synchrony.
#
# Per round r >= 1 (n > 3t):
#   - broadcast EST(r, est); on EST(r, b) from t+1 distinct senders,
#     re-broadcast EST(r, b) if not yet done; on 2t+1 distinct senders,
#     BV-deliver b into bin_values[r];
#   - once bin_values[r] is non-empty, the round's coordinator
#     ((r - 1) mod n + 1) broadcasts COORD_VALUE(r, w); everyone broadcasts
#     AUX(r, w) once, preferring the coordinator's value if it arrived (and
#     is BV-delivered) before a per-round timeout;
#   - gather AUX values from n - t distinct senders, all within
#     bin_values[r]; with b = r mod 2: a uniform set {w} sets est = w and
#     decides w when w = b, otherwise est = b; then the next round starts.
#
# Deciding does not stop participation: an instance keeps running so slower
# processes can decide (they do so within two rounds), and halts at the end
# of a designated round -- decide_round + 2 standalone, or a common bound
# set by the host when it manages many instances.
#
# The round-initial EST and the AUX broadcast go through the host-provided
# transport (which may batch zeros); the t+1 EST re-broadcast is sent
# directly, and is deferred while the instance has no label yet.

from __future__ import annotations

from typing import NamedTuple, Optional

__all__ = [
    "AlreadyProposed",
    "BinConsState",
    "EstMsg",
    "AuxMsg",
    "CoordMsg",
    "coordinator",
    "encode_bin_message",
    "decode_bin_message",
]

KIND_EST = 16
KIND_AUX = 17
KIND_COORD = 18

LABEL_SIZE = 32


class AlreadyProposed(Exception):
    pass


class EstMsg(NamedTuple):
    instance: bytes
    round: int
    label: bytes
    bit: int
    nbytes: int


class AuxMsg(NamedTuple):
    instance: bytes
    round: int
    label: bytes
    bit: int
    nbytes: int


class CoordMsg(NamedTuple):
    instance: bytes
    round: int
    label: bytes
    bit: int
    nbytes: int


_CLASSES = {KIND_EST: EstMsg, KIND_AUX: AuxMsg, KIND_COORD: CoordMsg}
_KINDS = {EstMsg: KIND_EST, AuxMsg: KIND_AUX, CoordMsg: KIND_COORD}


def bin_message_size(instance: bytes) -> int:
    # u32 id length + id + kind + u32 round + 32-byte label + bit
    return 4 + len(instance) + 1 + 4 + LABEL_SIZE + 1


def encode_bin_message(msg) -> bytes:
    return (
        len(msg.instance).to_bytes(4, "big")
        + msg.instance
        + bytes([_KINDS[type(msg)]])
        + msg.round.to_bytes(4, "big")
        + msg.label
        + bytes([msg.bit])
    )


def decode_bin_message(raw: bytes):
    ilen = int.from_bytes(raw[:4], "big")
    inst = raw[4 : 4 + ilen]
    off = 4 + ilen
    cls = _CLASSES[raw[off]]
    rnd = int.from_bytes(raw[off + 1 : off + 5], "big")
    label = raw[off + 5 : off + 5 + LABEL_SIZE]
    bit = raw[off + 5 + LABEL_SIZE]
    if off + 6 + LABEL_SIZE != len(raw):
        raise ValueError("trailing bytes")
    if bit not in (0, 1):
        raise ValueError("bad bit")
    return cls(inst, rnd, label, bit, len(raw))


def coordinator(r: int, n: int) -> int:
    """Rotating weak coordinator for round r (1-based process index)."""
    return (r - 1) % n + 1


class BinConsState:
    """One binary consensus instance, event-driven.

    The transport must provide:
      broadcast_est(r, bit)     round-initial BV broadcast (may be batched)
      broadcast_est_echo(r, bit)    direct t+1 re-broadcast (label known)
      broadcast_aux(r, bit)     per-round AUX broadcast (may be batched)
      broadcast_coord(r, bit)   coordinator value broadcast
      set_round_timer(r, steps) arrange on_timer(r) after `steps`
      decided(bit, r)           decision upcall, invoked at most once
    """

    def __init__(self, n: int, t: int, my_index: int, transport, label: Optional[bytes] = None,
                 timer_base: int = 3, standalone_halt: bool = False):
        self.n = n
        self.t = t
        self.my_index = my_index
        self.transport = transport
        self.label = label
        self.timer_base = timer_base
        self.standalone_halt = standalone_halt

        self.proposed = False
        self.est: Optional[int] = None
        self.r = 0  # current round; 0 = not started
        self.decided: Optional[int] = None
        self.decide_round: Optional[int] = None
        self.halted = False
        self.halt_after: Optional[int] = None  # halt at end of first round >= this

        self._est_senders: dict = {}  # (r, b) -> set of senders
        self._est_sent: set = set()  # (r, b) broadcast by us (initial or echo)
        self._echo_pending: set = set()  # (r, b) echo due but label unknown
        self.bin_values: dict = {}  # r -> set of bits
        self._bv_first: dict = {}  # r -> first BV-delivered bit
        self._aux_votes: dict = {}  # r -> {sender: bit}, insertion ordered
        self._aux_sent: set = set()  # rounds with AUX already broadcast
        self._coord_sent: set = set()
        self._coord_value: dict = {}  # r -> bit from the round's coordinator
        self._timer_fired: set = set()
        self._round_done: set = set()
        self._misses = 0  # rounds where the coordinator value never arrived

    # -- driving ------------------------------------------------------------

    def propose(self, b: int) -> None:
        if self.proposed:
            raise AlreadyProposed()
        self.proposed = True
        self.est = b
        self._start_round(1)

    def _start_round(self, r: int) -> None:
        self.r = r
        self.transport.broadcast_est(r, self.est)
        self._est_sent.add((r, self.est))
        self.transport.set_round_timer(r, self.timer_base << min(self._misses, 6))
        self._progress()

    def set_labelled(self, label: bytes) -> None:
        self.label = label
        for (r, b) in sorted(self._echo_pending):
            if (r, b) not in self._est_sent:
                self._est_sent.add((r, b))
                self.transport.broadcast_est_echo(r, b)
        self._echo_pending.clear()
        self._progress()

    def set_halt_bound(self, last_round: int) -> None:
        """Host-managed halting: drop out at the end of round >= last_round."""
        self.halt_after = last_round
        if self.r in self._round_done and self.r >= last_round:
            self.halted = True

    # -- message handlers ----------------------------------------------------

    def on_est(self, sender: int, r: int, b: int) -> None:
        if self.halted:
            return
        key = (r, b)
        senders = self._est_senders.get(key)
        if senders is None:
            senders = self._est_senders[key] = set()
        if sender in senders:
            return
        senders.add(sender)
        count = len(senders)
        if count >= self.t + 1 and key not in self._est_sent:
            if self.label is not None:
                self._est_sent.add(key)
                self.transport.broadcast_est_echo(r, b)
            else:
                self._echo_pending.add(key)
        if count >= 2 * self.t + 1:
            vals = self.bin_values.get(r)
            if vals is None:
                vals = self.bin_values[r] = set()
            if b not in vals:
                vals.add(b)
                self._bv_first.setdefault(r, b)
                if r == self.r:
                    self._progress()

    def on_aux(self, sender: int, r: int, b: int) -> None:
        if self.halted or r in self._round_done:
            return
        votes = self._aux_votes.get(r)
        if votes is None:
            votes = self._aux_votes[r] = {}
        if sender in votes:
            return  # one AUX vote per sender per round
        votes[sender] = b
        if r == self.r:
            self._progress()

    def on_coord(self, sender: int, r: int, b: int) -> None:
        if self.halted:
            return
        if sender != coordinator(r, self.n) or r in self._coord_value:
            return
        self._coord_value[r] = b
        if r == self.r:
            self._progress()

    def on_timer(self, r: int) -> None:
        if self.halted or r in self._timer_fired:
            return
        self._timer_fired.add(r)
        if r == self.r:
            self._progress()

    # -- round logic ----------------------------------------------------------

    def _progress(self) -> None:
        r = self.r
        if r == 0 or self.halted or r in self._round_done:
            return
        vals = self.bin_values.get(r)
        if not vals:
            return
        if self.my_index == coordinator(r, self.n) and r not in self._coord_sent and self.label is not None:
            self._coord_sent.add(r)
            self.transport.broadcast_coord(r, self._bv_first[r])
        if r not in self._aux_sent:
            bit = self._aux_bit(r, vals)
            if bit is None:
                return  # still waiting for the coordinator or the timer
            self._aux_sent.add(r)
            self.transport.broadcast_aux(r, bit)
        self._try_end_round(r, vals)

    def _aux_bit(self, r: int, vals) -> Optional[int]:
        cv = self._coord_value.get(r)
        if cv is not None and cv in vals:
            return cv
        if r in self._timer_fired:
            if cv is None and self.label is not None:
                # A labelled instance expected its coordinator and timed out;
                # stretch later rounds.  Unlabelled instances have no
                # reachable coordinator, so their timeouts stay flat.
                self._misses += 1
            return self._bv_first[r]
        return None

    def _try_end_round(self, r: int, vals) -> None:
        votes = self._aux_votes.get(r)
        if not votes:
            return
        eligible = [b for b in votes.values() if b in vals]
        need = self.n - self.t
        if len(eligible) < need:
            return
        values_r = eligible[:need]  # first n-t eligible votes; later ones ignored
        self._round_done.add(r)
        self._aux_votes.pop(r, None)  # frozen; drop the per-sender map
        parity = r % 2
        if len(set(values_r)) == 1:
            w = values_r[0]
            self.est = w
            if w == parity and self.decided is None:
                self.decided = w
                self.decide_round = r
                if self.standalone_halt:
                    self.halt_after = r + 2
                self.transport.decided(w, r)
        else:
            self.est = parity
        if self.halt_after is not None and r >= self.halt_after:
            self.halted = True
            return
        self._start_round(r + 1)
