# Scripted Byzantine behaviors.  Each behavior is a small strategy object
# hooked into a node: it may take over the initial proposal, filter or
# rewrite outgoing messages per recipient, schedule its own timers, or
# observe anonymous deliveries.  The fault plan is validated against the
# budget t by the simulator configuration.

from __future__ import annotations

import random

from ..avcp import EST, AUX, OnesMsg, ones_size
from ..broadcast import EchoMsg, InitMsg, payload_bytes
from ..election import DecsMsg
from .. import tenc, trs

__all__ = ["Behavior", "make_behavior", "BEHAVIOR_NAMES"]


class Behavior:
    name = "honest"

    def __init__(self, spec=None):
        self.spec = spec or {}

    def setup(self, node):
        pass

    def start(self, node):
        return False  # False: node proposes normally

    def send_filter(self, node):
        return None  # optional (recipient, msg) -> msg | None

    def on_timer(self, node, token):
        return False

    def peek_anon(self, node, msg):
        pass


class Crash(Behavior):
    name = "crash"

    def setup(self, node):
        node.crashed_at = int(self.spec.get("at", 0))


class Mute(Behavior):
    name = "mute"

    def setup(self, node):
        node.env.muted = True


class DoubleSign(Behavior):
    """Anonymously INIT two different signed messages for the same issue."""

    name = "double_sign"

    def start(self, node):
        s = node.setup
        secret = s.secrets[node.pid - 1]
        rng = s.proc_rngs[node.pid]
        arb = node.arb
        if arb is None:
            return False
        for variant in (0, 1):
            message = node.proposal_bytes(variant)
            sig = trs.sign(node.pid, secret, arb.tag, message, rng)
            pb = payload_bytes(arb.group, message, sig)
            header = 4 + len(arb.instance_id) + 2
            node.env.anon_broadcast(InitMsg(arb.instance_id, message, sig, header + len(pb)))
        arb.proposed = True
        return True


class EchoEquivocate(Behavior):
    """Send conflicting ECHO references to odd- and even-indexed peers."""

    name = "echo_equivocate"

    def send_filter(self, node):
        def rewrite(recipient, msg):
            if isinstance(msg, EchoMsg) and recipient % 2 == 1:
                fake = bytes(b ^ 0xFF for b in msg.ref[:32]).ljust(32, b"\x5a")
                return msg._replace(ref=fake[: len(msg.ref)])
            return msg

        return rewrite


class ZeroSpam(Behavior):
    """Blast empty ONES batches (a zero vote in every instance), repeatedly."""

    name = "zero_spam"

    def setup(self, node):
        self._shots = int(self.spec.get("shots", 3))
        node.env.set_timer(node.sim.config.gst + 1, ("zero_spam", 1))

    def on_timer(self, node, token):
        if token[0] != "zero_spam":
            return False
        shot = token[1]
        inst = node.setup.instance_id
        size = ones_size(inst, 0)
        for kind in (EST, AUX):
            node.env.broadcast(OnesMsg(inst, kind, shot, frozenset(), size))
        if shot < self._shots:
            node.env.set_timer(2, ("zero_spam", shot + 1))
        return True


class ShareForge(Behavior):
    """Replace every decryption share in our DECS batch with garbage."""

    name = "share_forge"

    def send_filter(self, node):
        forge_rng = random.Random(node.sim.config.seed ^ 0xF0F0F0 ^ node.pid)

        def rewrite(recipient, msg):
            if isinstance(msg, DecsMsg):
                group = node.setup.tenc_pub.group
                forged = tuple(
                    (cb, tenc.DecryptionShare(
                        index=sh.index,
                        ui=group.exp(group.g, forge_rng.randrange(group.q)),
                        e=forge_rng.randrange(group.q),
                        f=forge_rng.randrange(group.q),
                    ))
                    for cb, sh in msg.entries
                )
                return msg._replace(entries=forged)
            return msg

        return rewrite


class CiphertextReplay(Behavior):
    """Wait for an honest ciphertext and propose a byte-identical copy.

    The copy carries our own ring signature, so it passes every check and
    lands in a second consensus instance; deduplication must collapse the
    two to a single ballot.
    """

    name = "ciphertext_replay"

    def setup(self, node):
        self._done = False

    def start(self, node):
        return True  # suppress the normal proposal; we replay instead

    def peek_anon(self, node, msg):
        if self._done or not isinstance(msg, InitMsg):
            return
        if node.election is None:
            return
        if not node.election._valid(msg.message):
            return
        self._done = True
        s = node.setup
        node.avcp.propose(msg.message, s.secrets[node.pid - 1], s.proc_rngs[node.pid])


class PartialInit(Behavior):
    """Send the INIT to only the `reach` lowest-indexed peers.

    Forces the digest-mode recovery path: the remaining processes see the
    ECHO/READY quorums for a digest whose preimage they never received.
    """

    name = "partial_init"

    def start(self, node):
        s = node.setup
        arb = node.arb
        if arb is None:
            return False
        reach = int(self.spec.get("reach", arb.echo_quorum))
        message = node.proposal_bytes()
        sig = trs.sign(node.pid, s.secrets[node.pid - 1], arb.tag, message, s.proc_rngs[node.pid])
        pb = payload_bytes(arb.group, message, sig)
        msg = InitMsg(arb.instance_id, message, sig, 4 + len(arb.instance_id) + 2 + len(pb))
        lo, hi = node.sim.config.anon_delay_range
        for recipient in range(1, reach + 1):
            node.sim._count(node.pid, msg)
            node.sim._at(node.sim.now + node.sim.anon_rng.randint(lo, hi)).append((recipient, None, msg))
        arb.proposed = True
        return True


_REGISTRY = {
    cls.name: cls
    for cls in (
        Behavior,
        Crash,
        Mute,
        DoubleSign,
        EchoEquivocate,
        ZeroSpam,
        ShareForge,
        CiphertextReplay,
        PartialInit,
    )
}

BEHAVIOR_NAMES = tuple(sorted(_REGISTRY))


def make_behavior(spec) -> Behavior:
    """spec: 'honest' or {'behavior': name, ...extra keys}."""
    if isinstance(spec, str):
        name, extra = spec, {}
    else:
        extra = dict(spec)
        name = extra.pop("behavior")
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown behavior {name!r}") from None
    return cls(extra)
