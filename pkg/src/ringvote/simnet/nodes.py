# Per-process protocol stacks hosted inside the simulator.  A node owns one
# stack (reliable broadcast / binary consensus / vector consensus / election)
# and routes simulator deliveries into it; Byzantine variants plug in as
# behavior hooks rather than separate stacks.

from __future__ import annotations

from ..avcp import AvcpState, OnesMsg
from ..bincons import AuxMsg, BinConsState, CoordMsg, EstMsg, bin_message_size
from ..broadcast import (
    BroadcastState,
    EchoMsg,
    InitMsg,
    ReadyMsg,
    RecoveryReq,
    RecoveryResp,
)
from ..election import DecsMsg, ElectionState
from .core import NodeEnv

STANDALONE_LABEL = b"\x00" * 32


class Node:
    """One simulated process: env, behavior hooks, and a protocol stack."""

    def __init__(self, sim, pid, setup, scenario, behavior):
        self.sim = sim
        self.pid = pid
        self.setup = setup
        self.scenario = scenario
        self.behavior = behavior
        self.env = NodeEnv(sim, pid)
        self.crashed_at = None
        self.outputs = {"evidence": [], "events": []}
        self.arb = None
        self.bincons = None
        self.avcp = None
        self.election = None
        self._build()
        behavior.setup(self)
        self.env.send_filter = behavior.send_filter(self)

    # -- stack construction ----------------------------------------------------

    def _build(self):
        s, sc = self.setup, self.scenario
        kind = sc.kind
        flags = sc.flags
        if kind == "aarbp":
            self.arb = BroadcastState(
                self.env,
                s.instance_id,
                sc.config.n,
                sc.config.t,
                s.ring,
                self.pid,
                deliver_cb=self._arb_delivered,
                evidence_cb=self._evidence,
                hash_messages=flags.get("hash_messages", True),
            )
            self.outputs["delivered"] = {}
            self.outputs["deliver_steps"] = {}
        elif kind == "bincons":
            self.bincons = BinConsState(
                sc.config.n,
                sc.config.t,
                self.pid,
                transport=_DirectTransport(self),
                label=STANDALONE_LABEL,
                timer_base=flags.get("timer_base", 2 * sc.config.delta + 1),
                standalone_halt=True,
            )
        elif kind in ("avcp", "election"):
            common = dict(
                ring=s.ring,
                my_index=self.pid,
                evidence_cb=self._evidence,
                hash_messages=flags.get("hash_messages", True),
                timer_base=flags.get("timer_base", 2 * sc.config.delta + 1),
                extra_zero_delay=flags.get("extra_zero_delay", 0),
            )
            if kind == "avcp":
                self.avcp = AvcpState(
                    self.env,
                    s.instance_id,
                    sc.config.n,
                    sc.config.t,
                    valid_fn=lambda m, sig=None: True,
                    decide_cb=self._avc_decided,
                    **common,
                )
                self.arb = self.avcp.arb
            else:
                self.election = ElectionState(
                    self.env,
                    s.instance_id,
                    sc.config.n,
                    sc.config.t,
                    pub=s.tenc_pub,
                    share_key=s.tenc_keys[self.pid - 1],
                    rng=s.proc_rngs[self.pid],
                    output_cb=self._election_done,
                    only_2t_broadcast=flags.get("only_2t_broadcast", False),
                    **common,
                )
                self.avcp = self.election.avcp
                self.avcp.decide_cb = self._wrap_election_vector(self.avcp.decide_cb)
                self.arb = self.avcp.arb
        else:
            raise ValueError(f"unknown scenario kind {kind!r}")

    def _wrap_election_vector(self, inner):
        def cb(vector):
            self.outputs["vector"] = vector
            self.outputs["vector_step"] = self.sim.now
            self.sim.event(self.pid, "avc_decide", len(vector))
            inner(vector)
            if self.election.has_broadcast:
                self.sim.event(self.pid, "decs_broadcast", None)
        return cb

    # -- inputs ------------------------------------------------------------------

    def proposal_bytes(self, variant: int = 0) -> bytes:
        """The message this node would propose; variants for double-signers."""
        s = self.setup
        if self.scenario.kind == "election":
            from ..election import prepare_ballot

            content = s.contents[self.pid] + (b"" if variant == 0 else b"/alt%d" % variant)
            ballot = prepare_ballot(s.tenc_pub, content, s.proc_rngs[self.pid], s.instance_id)
            return ballot.encode(s.tenc_pub.group)
        payload = s.contents[self.pid]
        return payload if variant == 0 else payload + b"/alt%d" % variant

    def start(self):
        if self.behavior.start(self):
            return
        kind = self.scenario.kind
        s = self.setup
        if kind == "aarbp":
            self.arb.propose(self.proposal_bytes(), s.secrets[self.pid - 1], s.proc_rngs[self.pid])
        elif kind == "bincons":
            self.bincons.propose(self.scenario.inputs[self.pid])
        elif kind == "avcp":
            self.avcp.propose(self.proposal_bytes(), s.secrets[self.pid - 1], s.proc_rngs[self.pid])
        else:
            self.election.run(s.contents[self.pid], s.secrets[self.pid - 1])

    # -- upcalls -------------------------------------------------------------------

    def _arb_delivered(self, message, sig, payload_bytes):
        from ..groups import digest

        d = digest(payload_bytes)
        self.outputs["delivered"][d] = (message, sig)
        self.outputs["deliver_steps"][d] = self.sim.now
        self.sim.event(self.pid, "arb_deliver", d[:4].hex())

    def _avc_decided(self, vector):
        self.outputs["vector"] = vector
        self.outputs["vector_step"] = self.sim.now
        self.sim.event(self.pid, "avc_decide", len(vector))

    def _election_done(self, ballots):
        self.outputs["ballots"] = ballots
        self.outputs["ballots_step"] = self.sim.now
        self.sim.event(self.pid, "election_return", len(ballots))

    def _bin_decided(self, bit, rnd):
        self.outputs["decided"] = bit
        self.outputs["decide_round"] = rnd
        self.outputs["decide_step"] = self.sim.now
        self.sim.event(self.pid, "bin_decide", (bit, rnd))

    def _evidence(self, ev):
        self.outputs["evidence"].append(ev)
        self.sim.event(self.pid, "double_sign_evidence", ev.signer_index)

    # -- simulator entry points -------------------------------------------------------

    def on_anon(self, msg):
        self.behavior.peek_anon(self, msg)
        if isinstance(msg, InitMsg) and self.arb is not None:
            self.arb.on_init(msg.message, msg.sig)

    def on_message(self, sender, msg):
        if isinstance(msg, (EstMsg, AuxMsg, CoordMsg)):
            if self.avcp is not None:
                self.avcp.on_bin_message(sender, msg)
            elif self.bincons is not None:
                if isinstance(msg, EstMsg):
                    self.bincons.on_est(sender, msg.round, msg.bit)
                elif isinstance(msg, AuxMsg):
                    self.bincons.on_aux(sender, msg.round, msg.bit)
                else:
                    self.bincons.on_coord(sender, msg.round, msg.bit)
        elif isinstance(msg, OnesMsg):
            if self.avcp is not None:
                self.avcp.on_ones(sender, msg)
        elif isinstance(msg, EchoMsg):
            if self.arb is not None:
                self.arb.on_echo(sender, msg.ref, msg.is_digest)
        elif isinstance(msg, ReadyMsg):
            if self.arb is not None:
                self.arb.on_ready(sender, msg.ref, msg.is_digest)
        elif isinstance(msg, RecoveryReq):
            if self.arb is not None:
                self.arb.on_recovery_request(sender, msg.digest)
        elif isinstance(msg, RecoveryResp):
            if self.arb is not None:
                self.arb.on_recovery_payload(msg.message, msg.sig)
        elif isinstance(msg, DecsMsg):
            if self.election is not None:
                self.election.on_decs(sender, msg.entries)

    def on_timer(self, token):
        if self.behavior.on_timer(self, token):
            return
        if token[0] == "bincons" and self.bincons is not None:
            self.bincons.on_timer(token[2])
        elif self.avcp is not None:
            self.avcp.on_timer(token)


class _DirectTransport:
    """Standalone binary consensus: every broadcast goes out unbatched."""

    def __init__(self, node):
        self.node = node

    def _msg(self, cls, r, bit):
        inst = self.node.setup.instance_id
        return cls(inst, r, STANDALONE_LABEL, bit, bin_message_size(inst))

    def broadcast_est(self, r, bit):
        self.node.env.broadcast(self._msg(EstMsg, r, bit))

    broadcast_est_echo = broadcast_est

    def broadcast_aux(self, r, bit):
        self.node.env.broadcast(self._msg(AuxMsg, r, bit))

    def broadcast_coord(self, r, bit):
        self.node.env.broadcast(self._msg(CoordMsg, r, bit))

    def set_round_timer(self, r, steps):
        self.node.env.set_timer(steps, ("bincons", 0, r))

    def decided(self, bit, r):
        self.node._bin_decided(bit, r)
