# Deterministic discrete-event simulator: processes exchanging messages over
# regular (sender-identified) and anonymous (sender-stripped) channels, under
# a scripted adversary and partial synchrony.
#
# Time is a step counter; one "message step" is one unit of delay.  Before
# GST the adversary picks regular-channel delays freely within the bound
# that everything lands by gst + delta; from GST on, delays are at most
# delta.  Anonymous deliveries draw their delay from a dedicated RNG stream
# so their timing is independent of regular-channel scheduling, and the
# queued record carries no sender.  Everything is a pure function of the
# configuration: same seed, same trace.

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass

__all__ = ["SimConfig", "ConfigInvalid", "BudgetExceeded", "Simulator", "derive_rng"]


class ConfigInvalid(Exception):
    pass


class BudgetExceeded(Exception):
    pass


def derive_rng(seed: int, *tags) -> random.Random:
    """Independent named RNG stream derived from the master seed."""
    material = repr((seed,) + tags).encode()
    return random.Random(int.from_bytes(hashlib.sha256(material).digest(), "big"))


@dataclass
class SimConfig:
    n: int
    t: int
    seed: int
    gst: int = 0
    delta: int = 1
    anon_delay_range: tuple = (1, 1)
    fault_plan: tuple = ()  # ((process index, behavior spec), ...)
    adversary: str = "fifo"  # fifo | random | inverse
    step_budget: int = 0  # 0 = derive a default bound from n and delta

    def __post_init__(self):
        if not self.n > 3 * self.t or self.t < 0:
            raise ConfigInvalid("need n > 3t >= 0")
        if self.delta < 1:
            raise ConfigInvalid("delta must be >= 1")
        lo, hi = self.anon_delay_range
        if not 1 <= lo <= hi:
            raise ConfigInvalid("bad anonymous delay range")
        if len(self.fault_plan) > self.t:
            raise ConfigInvalid(f"fault plan has {len(self.fault_plan)} entries, budget is t={self.t}")
        seen = set()
        for index, _spec in self.fault_plan:
            if not 1 <= index <= self.n or index in seen:
                raise ConfigInvalid("bad fault plan index")
            seen.add(index)
        if self.step_budget == 0:
            # 10n "rounds-equivalent": a protocol round is three message
            # steps, each bounded by delta once past GST.
            self.step_budget = self.gst + 10 * self.n * 3 * max(self.delta, self.anon_delay_range[1])


class Simulator:
    """Single-threaded deterministic event loop over numbered steps."""

    def __init__(self, config: SimConfig, record_trace: bool = False):
        self.config = config
        self.now = 0
        self.adv_rng = derive_rng(config.seed, "adversary")
        self.anon_rng = derive_rng(config.seed, "anon-channel")
        self.nodes = {}
        self._steps: list = []  # heap of scheduled step numbers
        self._scheduled: set = set()
        self._messages: dict = {}  # step -> [(recipient, sender|None, msg)]
        self._timers: dict = {}  # step -> [(pid, token)]
        self.total_messages = 0
        self.total_bytes = 0
        self.kind_counts: dict = {}
        self.trace = [] if record_trace else None
        self.events = []  # (step, process, event, detail) protocol milestones

    def attach(self, nodes: dict) -> None:
        """nodes: {1-based index: node} with on_message/on_anon/on_timer."""
        self.nodes = nodes

    # -- scheduling -------------------------------------------------------------

    def _at(self, step: int) -> list:
        if step not in self._scheduled:
            self._scheduled.add(step)
            heapq.heappush(self._steps, step)
        return self._messages.setdefault(step, [])

    def _delay_regular(self) -> int:
        cfg = self.config
        if self.now >= cfg.gst:
            if cfg.adversary == "random":
                return self.adv_rng.randint(1, cfg.delta)
            return cfg.delta if cfg.adversary == "inverse" else 1
        horizon = cfg.gst + cfg.delta - self.now  # must land by gst + delta
        if cfg.adversary == "random":
            return self.adv_rng.randint(1, horizon)
        if cfg.adversary == "inverse":
            return max(1, horizon - self.now)  # later sends overtake earlier ones
        return 1

    def send(self, sender: int, recipient: int, msg) -> None:
        self._count(sender, msg)
        self._at(self.now + self._delay_regular()).append((recipient, sender, msg))

    def broadcast(self, sender: int, msg) -> None:
        self._count(sender, msg, copies=self.config.n)
        for recipient in range(1, self.config.n + 1):
            self._at(self.now + self._delay_regular()).append((recipient, sender, msg))

    def anon_broadcast(self, sender: int, msg) -> None:
        lo, hi = self.config.anon_delay_range
        self._count(sender, msg, copies=self.config.n)
        for recipient in range(1, self.config.n + 1):
            self._at(self.now + self.anon_rng.randint(lo, hi)).append((recipient, None, msg))

    def set_timer(self, pid: int, delay: int, token) -> None:
        step = self.now + max(1, delay)
        if step not in self._scheduled:
            self._scheduled.add(step)
            heapq.heappush(self._steps, step)
        self._timers.setdefault(step, []).append((pid, token))

    # -- accounting -------------------------------------------------------------

    @staticmethod
    def _label_of(msg) -> str:
        ref = getattr(msg, "label", None)
        if ref is None:
            ref = getattr(msg, "ref", None) or getattr(msg, "digest", None)
        return ref[:4].hex() if isinstance(ref, bytes) else "-"

    def _count(self, sender: int, msg, copies: int = 1) -> None:
        kind = type(msg).__name__
        self.total_messages += copies
        self.total_bytes += msg.nbytes * copies
        self.kind_counts[kind] = self.kind_counts.get(kind, 0) + copies
        if self.trace is not None:
            rec = (self.now, sender, "send", kind, self._label_of(msg), msg.nbytes)
            self.trace.extend([rec] * copies)  # one record per point-to-point send

    def event(self, pid: int, name: str, detail=None) -> None:
        self.events.append((self.now, pid, name, detail))
        if self.trace is not None:
            self.trace.append((self.now, pid, "evt", name, "-", 0))

    def export_trace(self) -> str:
        """Line format: step,process,direction,kind,label,bytes_len."""
        if self.trace is None:
            raise ValueError("trace recording was disabled")
        return "\n".join(",".join(str(x) for x in rec) for rec in self.trace)

    # -- main loop -----------------------------------------------------------------

    def run(self, until=None) -> int:
        """Drain the event queue; returns the final step.

        `until` is an optional zero-argument predicate: once it returns
        True the simulation may stop early (messages still in flight are
        abandoned).  Exceeding the step budget raises BudgetExceeded: a
        liveness failure, never a hang.
        """
        while self._steps:
            step = heapq.heappop(self._steps)
            self._scheduled.discard(step)
            if step > self.config.step_budget:
                raise BudgetExceeded(f"no quiescence by step {self.config.step_budget}")
            self.now = step
            for recipient, sender, msg in self._messages.pop(step, ()):
                node = self.nodes[recipient]
                if node.crashed_at is not None and step >= node.crashed_at:
                    continue
                if self.trace is not None:
                    self.trace.append(
                        (step, recipient, "recv", type(msg).__name__, self._label_of(msg), msg.nbytes)
                    )
                if sender is None:
                    node.on_anon(msg)
                else:
                    node.on_message(sender, msg)
            for pid, token in self._timers.pop(step, ()):
                node = self.nodes[pid]
                if node.crashed_at is not None and step >= node.crashed_at:
                    continue
                node.on_timer(token)
            if until is not None and until():
                break
        return self.now


@dataclass
class NodeEnv:
    """Per-process channel endpoints handed to protocol state machines."""

    sim: Simulator
    pid: int
    muted: bool = False
    send_filter: object = None  # behavior hook: (recipient, msg) -> msg | None

    def _blocked(self) -> bool:
        node = self.sim.nodes.get(self.pid)
        return self.muted or (
            node is not None and node.crashed_at is not None and self.sim.now >= node.crashed_at
        )

    def send(self, recipient: int, msg) -> None:
        if self._blocked():
            return
        if self.send_filter is not None:
            msg = self.send_filter(recipient, msg)
            if msg is None:
                return
        self.sim.send(self.pid, recipient, msg)

    def broadcast(self, msg) -> None:
        if self._blocked():
            return
        if self.send_filter is not None:
            for recipient in range(1, self.sim.config.n + 1):
                out = self.send_filter(recipient, msg)
                if out is not None:
                    self.sim.send(self.pid, recipient, out)
            return
        self.sim.broadcast(self.pid, msg)

    def anon_broadcast(self, msg) -> None:
        if self._blocked():
            return
        self.sim.anon_broadcast(self.pid, msg)

    def set_timer(self, delay: int, token) -> None:
        self.sim.set_timer(self.pid, delay, token)
