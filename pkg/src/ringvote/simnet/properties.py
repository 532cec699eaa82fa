# Post-run property evaluation: safety and liveness claims checked against
# the outputs and event timeline of a finished simulation.  The signer
# oracle (find_index with dealer secrets) lives here, in the harness, and
# is never available to protocol code.

from __future__ import annotations

from dataclasses import dataclass, field

from .. import trs


@dataclass
class PropertyReport:
    checks: list = field(default_factory=list)  # (name, ok, detail)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def all_ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self):
        return [(n, d) for n, ok, d in self.checks if not ok]

    def __str__(self) -> str:
        lines = []
        for name, ok, detail in self.checks:
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
        return "\n".join(lines)


def _init_tag(result):
    return trs.IssueTag(result.setup.ring, trs.make_issue(result.setup.instance_id, "INIT"))


def _signer_of(result, tag, message, sig):
    return trs.find_index(tag, message, sig, result.setup.secrets)


def assert_properties(result) -> PropertyReport:
    report = PropertyReport()
    kind = result.scenario.kind
    if kind == "aarbp":
        _check_arb(result, report)
    elif kind == "bincons":
        _check_bincons(result, report)
    elif kind in ("avcp", "election"):
        _check_avc(result, report)
        if kind == "election":
            _check_election(result, report)
    return report


# -- reliable broadcast -------------------------------------------------------


def _check_arb(result, report) -> None:
    honest = result.honest_pids()
    outs = result.outputs
    tag = _init_tag(result)

    own = {}
    for pid in honest:
        arb = result.nodes[pid].arb
        if getattr(arb, "own_digest", None) is not None:
            own[pid] = arb.own_digest
    missing = [
        (p, q)
        for p, d in own.items()
        for q in honest
        if d not in outs[q]["delivered"]
    ]
    report.add(
        "arb-termination-1",
        not missing,
        f"undelivered honest proposals at {missing[:3]}" if missing else "",
    )

    delivered_sets = {pid: set(outs[pid]["delivered"]) for pid in honest}
    union = set().union(*delivered_sets.values()) if delivered_sets else set()
    stragglers = [(pid, len(union - s)) for pid, s in delivered_sets.items() if union - s]
    report.add(
        "arb-termination-2",
        not stragglers,
        f"partial delivery at {stragglers[:3]}" if stragglers else "",
    )

    unicity_ok, detail = True, ""
    for pid in honest:
        signers = []
        for d, (message, sig) in outs[pid]["delivered"].items():
            signers.append(_signer_of(result, tag, message, sig))
        if len(signers) != len(set(signers)):
            unicity_ok, detail = False, f"process {pid} delivered a double-signer twice"
            break
    report.add("arb-unicity", unicity_ok, detail)


# -- binary consensus ----------------------------------------------------------


def _check_bincons(result, report) -> None:
    honest = result.honest_pids()
    outs = result.outputs
    undecided = [pid for pid in honest if "decided" not in outs[pid]]
    report.add("bbc-termination", not undecided, f"undecided: {undecided}" if undecided else "")
    if undecided:
        return
    bits = {outs[pid]["decided"] for pid in honest}
    report.add("bbc-agreement", len(bits) == 1, f"decided bits {bits}" if len(bits) != 1 else "")
    inputs = {result.scenario.inputs.get(pid) for pid in honest}
    if len(inputs) == 1:
        (b,) = inputs
        ok = bits == {b}
        report.add("bbc-validity", ok, "" if ok else f"uniform input {b} decided {bits}")
    rounds = [outs[pid]["decide_round"] for pid in honest]
    spread = max(rounds) - min(rounds)
    report.add("bbc-decide-spread", spread <= 2, "" if spread <= 2 else f"spread {spread}")


# -- vector consensus -----------------------------------------------------------


def _check_avc(result, report) -> None:
    honest = result.honest_pids()
    outs = result.outputs
    cfg = result.scenario.config
    tag = _init_tag(result)

    missing = [pid for pid in honest if "vector" not in outs[pid]]
    report.add("avc-termination", not missing, f"no vector at {missing}" if missing else "")
    if missing:
        return

    vectors = {pid: outs[pid]["vector"] for pid in honest}
    reference = vectors[honest[0]]
    ref_bytes = [(m, s.encode(result.setup.ring.group)) for m, s in reference]
    mismatched = [
        pid
        for pid, v in vectors.items()
        if [(m, s.encode(result.setup.ring.group)) for m, s in v] != ref_bytes
    ]
    report.add("avc-agreement", not mismatched, f"divergent vectors at {mismatched}" if mismatched else "")

    size_ok = len(reference) >= cfg.n - cfg.t
    report.add("avc-validity-size", size_ok, "" if size_ok else f"|V|={len(reference)} < n-t={cfg.n - cfg.t}")

    valid_fn = result.nodes[honest[0]].avcp.valid_fn
    invalid = [i for i, (m, s) in enumerate(reference) if not valid_fn(m, s)]
    report.add("avc-validity-predicate", not invalid, f"invalid elements {invalid}" if invalid else "")

    signers = []
    for message, sig in reference:
        try:
            signers.append(_signer_of(result, tag, message, sig))
        except trs.NotFound:
            signers.append(None)
    report.add("avc-eligibility", None not in signers, "" if None not in signers else "element signed outside the ring")
    uniq_ok = len(signers) == len(set(signers))
    report.add("avc-one-per-signer", uniq_ok, "" if uniq_ok else f"signers {signers}")
    faulty = {index for index, _ in cfg.fault_plan}
    n_faulty_signed = sum(1 for s in signers if s in faulty)
    fb_ok = n_faulty_signed <= cfg.t
    report.add("avc-validity-faulty-bound", fb_ok, "" if fb_ok else f"{n_faulty_signed} faulty-signed elements")
    origin_bad = []
    for (message, _sig), signer in zip(reference, signers):
        if signer in faulty or signer is None:
            continue
        proposed = getattr(result.nodes[signer].avcp, "own_message", None)
        if proposed is not None and proposed != message:
            origin_bad.append(signer)
    report.add(
        "avc-validity-origin",
        not origin_bad,
        f"elements differ from honest proposals of {origin_bad}" if origin_bad else "",
    )


# -- election --------------------------------------------------------------------


def _check_election(result, report) -> None:
    honest = result.honest_pids()
    outs = result.outputs

    missing = [pid for pid in honest if "ballots" not in outs[pid]]
    report.add("election-termination", not missing, f"no ballots at {missing}" if missing else "")
    if missing:
        return

    reference = outs[honest[0]]["ballots"]
    mismatched = [pid for pid in honest if outs[pid]["ballots"] != reference]
    report.add("election-agreement", not mismatched, f"divergent ballots at {mismatched}" if mismatched else "")

    unique = result.nodes[honest[0]].election.unique_encs
    dd_ok = len(unique) == len(set(unique))
    report.add("election-dedupe", dd_ok, "" if dd_ok else "duplicate ciphertexts survived deduplication")

    # Ballot containment: every honest proposer whose ciphertext was decided
    # must see its own content in the result.
    missing_contents = []
    for pid in honest:
        election = result.nodes[pid].election
        own = getattr(election.avcp, "own_message", None)
        if own is not None and own in (election.enc_ballots or []):
            if result.setup.contents[pid] not in reference:
                missing_contents.append(pid)
    report.add(
        "election-honest-content",
        not missing_contents,
        f"missing contents of {missing_contents}" if missing_contents else "",
    )

    # Weak-privacy surrogate: nobody returns before having broadcast its own
    # decryption shares, which only happens after its vector is decided.
    order_bad = []
    for pid in honest:
        o = outs[pid]
        if not (o["ballots_step"] >= o["vector_step"]):
            order_bad.append(pid)
    report.add(
        "election-weak-privacy-order",
        not order_bad,
        f"combine before decision at {order_bad}" if order_bad else "",
    )
