import pytest

from ringvote.bincons import (
    AlreadyProposed,
    AuxMsg,
    BinConsState,
    CoordMsg,
    EstMsg,
    bin_message_size,
    coordinator,
    decode_bin_message,
    encode_bin_message,
)
from ringvote.simnet import Scenario, SimConfig, assert_properties, run_scenario

LABEL = b"\x11" * 32


class StubTransport:
    def __init__(self):
        self.est = []
        self.echo = []
        self.aux = []
        self.coord = []
        self.timers = []
        self.decisions = []

    def broadcast_est(self, r, b):
        self.est.append((r, b))

    def broadcast_est_echo(self, r, b):
        self.echo.append((r, b))

    def broadcast_aux(self, r, b):
        self.aux.append((r, b))

    def broadcast_coord(self, r, b):
        self.coord.append((r, b))

    def set_round_timer(self, r, steps):
        self.timers.append((r, steps))

    def decided(self, bit, r):
        self.decisions.append((bit, r))


def make_instance(my_index=2, label=LABEL, **kw):
    tr = StubTransport()
    inst = BinConsState(4, 1, my_index, tr, label=label, **kw)
    return inst, tr


def feed_est(inst, r, b, senders):
    for s in senders:
        inst.on_est(s, r, b)


def feed_aux(inst, r, bits_by_sender):
    for s, b in bits_by_sender.items():
        inst.on_aux(s, r, b)


def test_coordinator_rotation():
    assert coordinator(1, 4) == 1
    assert coordinator(4, 4) == 4
    assert coordinator(5, 4) == 1  # wraps: (r-1) mod n + 1
    assert coordinator(1, 7) == coordinator(8, 7) == 1


def test_est_echo_at_t_plus_one_and_bv_deliver_at_2t_plus_one():
    inst, tr = make_instance()
    inst.propose(1)
    assert tr.est == [(1, 1)]
    feed_est(inst, 1, 0, [1])
    assert tr.echo == []  # one sender < t+1
    feed_est(inst, 1, 0, [3])
    assert tr.echo == [(1, 0)]  # echo fires at 2 distinct senders for (4,1)
    assert inst.bin_values.get(1, set()) == set()
    feed_est(inst, 1, 0, [4])
    assert inst.bin_values[1] == {0}  # BV-delivered at 3 distinct senders


def test_duplicate_est_senders_do_not_advance():
    inst, tr = make_instance()
    inst.propose(1)
    for _ in range(5):
        inst.on_est(3, 1, 0)
    assert tr.echo == [] and inst.bin_values.get(1, set()) == set()


def test_no_aux_before_bv_delivery_and_exactly_one_aux():
    inst, tr = make_instance()
    inst.propose(1)
    inst.on_timer(1)
    assert tr.aux == []  # nothing BV-delivered yet
    feed_est(inst, 1, 1, [1, 3, 4])
    assert tr.aux == [(1, 1)]
    feed_est(inst, 1, 0, [1, 3, 4])  # second value delivers too
    assert tr.aux == [(1, 1)]  # still one AUX for the round
    assert tr.aux[0][1] in inst.bin_values[1]


def test_aux_prefers_coordinator_value():
    inst, tr = make_instance(my_index=2)
    inst.propose(1)
    feed_est(inst, 1, 1, [1, 3, 4])
    feed_est(inst, 1, 0, [1, 3, 4])
    assert tr.aux == []  # waiting for coordinator or timer
    inst.on_coord(1, 1, 0)  # round-1 coordinator is process 1
    assert tr.aux == [(1, 0)]


def test_coord_ignored_from_non_coordinator():
    inst, tr = make_instance()
    inst.propose(1)
    feed_est(inst, 1, 1, [1, 3, 4])
    inst.on_coord(3, 1, 0)  # process 3 is not round 1's coordinator
    assert tr.aux == []
    inst.on_timer(1)
    assert tr.aux == [(1, 1)]


def test_coordinator_broadcasts_once():
    inst, tr = make_instance(my_index=1)  # coordinator of round 1
    inst.propose(1)
    feed_est(inst, 1, 1, [2, 3, 4])
    feed_est(inst, 1, 0, [2, 3, 4])
    assert tr.coord == [(1, 1)]  # first BV-delivered value, sent once


def test_round_end_rules():
    # values_r = {1,1,1}, r=1 -> decide 1
    inst, tr = make_instance()
    inst.propose(1)
    feed_est(inst, 1, 1, [1, 3, 4])
    inst.on_timer(1)
    feed_aux(inst, 1, {1: 1, 3: 1, 4: 1})
    assert tr.decisions == [(1, 1)] and inst.est == 1

    # values_r = {0,0,0}, r=1 -> est=0, no decision yet
    inst, tr = make_instance()
    inst.propose(0)
    feed_est(inst, 1, 0, [1, 3, 4])
    inst.on_timer(1)
    feed_aux(inst, 1, {1: 0, 3: 0, 4: 0})
    assert tr.decisions == [] and inst.est == 0 and inst.r == 2

    # mixed values, r=1 -> est = r mod 2 = 1
    inst, tr = make_instance()
    inst.propose(0)
    feed_est(inst, 1, 0, [1, 3, 4])
    feed_est(inst, 1, 1, [1, 3, 4])
    inst.on_timer(1)
    feed_aux(inst, 1, {1: 0, 3: 1, 4: 0})
    assert tr.decisions == [] and inst.est == 1 and inst.r == 2


def test_aux_votes_only_count_bv_delivered_bits():
    inst, tr = make_instance()
    inst.propose(1)
    feed_est(inst, 1, 1, [1, 3, 4])
    inst.on_timer(1)
    feed_aux(inst, 1, {1: 0, 3: 0, 4: 0})  # 0 was never BV-delivered
    assert inst.r == 1 and tr.decisions == []
    feed_aux(inst, 1, {2: 1})
    assert inst.r == 1  # still only one eligible vote
    feed_est(inst, 1, 0, [1, 3, 4])  # now 0 is delivered: votes become eligible
    assert inst.r == 2  # round ended on {0,0,0,1}... first n-t eligible


def test_standalone_halting_two_rounds_after_decide():
    inst, tr = make_instance(standalone_halt=True)
    inst.propose(1)
    for r in (1, 2, 3):
        feed_est(inst, r, 1, [1, 3, 4])
        inst.on_timer(r)
        feed_aux(inst, r, {1: 1, 3: 1, 4: 1})
    assert tr.decisions == [(1, 1)]
    assert inst.halted  # decided in round 1, halted at end of round 3
    before = dict(inst.bin_values)
    inst.on_est(1, 4, 1)
    inst.on_aux(1, 4, 1)
    assert inst.bin_values == before  # post-halt messages are dropped


def test_no_halt_while_undecided():
    inst, _ = make_instance(standalone_halt=True)
    inst.propose(0)
    feed_est(inst, 1, 0, [1, 3, 4])
    inst.on_timer(1)
    feed_aux(inst, 1, {1: 0, 3: 0, 4: 0})
    assert not inst.halted and inst.decided is None


def test_propose_twice_raises():
    inst, _ = make_instance()
    inst.propose(1)
    with pytest.raises(AlreadyProposed):
        inst.propose(0)


def test_echo_deferred_until_labelled():
    inst, tr = make_instance(label=None)
    inst.propose(0)
    feed_est(inst, 1, 1, [1, 3])
    assert tr.echo == []  # t+1 reached but no label yet
    inst.set_labelled(LABEL)
    assert tr.echo == [(1, 1)]


def test_codec_roundtrip():
    for cls in (EstMsg, AuxMsg, CoordMsg):
        msg = cls(b"abc", 7, LABEL, 1, bin_message_size(b"abc"))
        raw = encode_bin_message(msg)
        assert len(raw) == msg.nbytes
        assert decode_bin_message(raw) == msg
    with pytest.raises(ValueError):
        decode_bin_message(encode_bin_message(EstMsg(b"abc", 7, LABEL, 1, 0)) + b"!")


# -- simulated runs -----------------------------------------------------------


@pytest.mark.parametrize("bit,want_round", [(1, 1), (0, 2)])
def test_uniform_proposals_decide_fast(bit, want_round):
    for seed in range(5):
        sc = Scenario(
            kind="bincons",
            config=SimConfig(n=4, t=1, seed=seed),
            inputs={p: bit for p in range(1, 5)},
        )
        res = run_scenario(sc)
        assert assert_properties(res).all_ok
        for pid in range(1, 5):
            out = res.outputs[pid]
            assert out["decided"] == bit and out["decide_round"] == want_round


def test_mixed_proposals_agree_with_spread_bound():
    for seed in range(12):
        inputs = {p: (p + seed) % 2 for p in range(1, 8)}
        sc = Scenario(
            kind="bincons",
            config=SimConfig(n=7, t=2, seed=seed, gst=5, delta=2, adversary="random"),
            inputs=inputs,
        )
        res = run_scenario(sc)
        rep = assert_properties(res)
        assert rep.all_ok, rep.failures()
        # Justification: the decided bit must be one some honest process input.
        honest_inputs = {inputs[p] for p in res.honest_pids()}
        assert res.outputs[1]["decided"] in honest_inputs


def test_intrusion_tolerance_uniform_ones_with_faults():
    # All non-faulty propose 1; no schedule of t faulty peers forces a 0.
    for seed in range(8):
        for spec in ("mute", {"behavior": "crash", "at": 0}, {"behavior": "crash", "at": 2}):
            sc = Scenario(
                kind="bincons",
                config=SimConfig(n=4, t=1, seed=seed, gst=4, adversary="random", fault_plan=((3, spec),)),
                inputs={p: 1 for p in range(1, 5)},
            )
            res = run_scenario(sc)
            for pid in res.honest_pids():
                assert res.outputs[pid]["decided"] == 1
