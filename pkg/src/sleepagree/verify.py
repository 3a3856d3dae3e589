"""Property checkers over runs, and exhaustive / randomized verification drivers.

"Non-faulty" means neither crashed nor Byzantine.  Outputs only exist for
processors that survived to the end of the calendar, so every checker ignores
faulty processors on the output side.  Validity premises drop Byzantine inputs
only: a crashed processor ran the protocol faithfully with its input, and a
crash in the last round is invisible to the survivors, so excluding crashed
inputs would make validity unattainable for any crash protocol.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import random
from dataclasses import dataclass, field

from .adversary import (AdversarySpec, enumerate_crash_schedules,
                        enumerate_effective_crash_schedules, random_crash_schedule)
from .engine import SimConfig, run_simulation
from .errors import SizeLimit
from .model import Confirm, GradedOutput, SubsetDecision, carried_values, value_to_json
from .protocols import ProtocolConfig, make_protocol


@dataclass(frozen=True)
class Verdict:
    name: str
    ok: bool
    witness: dict | None = None

    def __post_init__(self):
        if not self.ok and self.witness is None:
            raise ValueError("a failing verdict needs a witness")

    @property
    def status(self) -> str:
        return "PASS" if self.ok else "FAIL"

    def to_json(self) -> dict:
        d = {"property": self.name, "status": self.status}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def _pass(name):
    return Verdict(name, True)


def _fail(name, **witness):
    return Verdict(name, False, witness)


@dataclass(frozen=True)
class FaultView:
    crashed: frozenset = frozenset()       # (pid, round)
    byzantine: frozenset = frozenset()

    @property
    def faulty(self) -> frozenset:
        return frozenset(p for p, _ in self.crashed) | self.byzantine

    @property
    def empty(self) -> bool:
        return not self.crashed and not self.byzantine

    @classmethod
    def of(cls, transcript) -> "FaultView":
        return cls(frozenset(transcript.crashed.items()), frozenset(transcript.byzantine))


def _honest(mapping, faults):
    bad = faults.faulty
    return {p: v for p, v in sorted(mapping.items()) if p not in bad}


def _premise(inputs, faults):
    return {p: v for p, v in sorted(inputs.items()) if p not in faults.byzantine}


def _js(v):
    return value_to_json(v)


# -- agreement-family checkers -------------------------------------------------

def check_agreement(outputs: dict, faults: FaultView = FaultView()) -> Verdict:
    honest = _honest(outputs, faults)
    items = list(honest.items())
    for p, v in items[1:]:
        if v != items[0][1]:
            q = items[0][0]
            return _fail("agreement", processors=[q, p], values=[_js(items[0][1]), _js(v)])
    return _pass("agreement")


def check_validity(inputs: dict, outputs: dict, faults: FaultView = FaultView(),
                   kind: str = "standard") -> Verdict:
    kind = kind.lower()
    name = "validity" if kind == "standard" else f"{kind}_validity"
    honest_in = _premise(inputs, faults)
    honest_out = _honest(outputs, faults)
    if kind == "strong":
        allowed = set(honest_in.values())
        for p, v in honest_out.items():
            if v not in allowed:
                return _fail(name, processor=p, value=_js(v), inputs=sorted(_js(x) for x in allowed))
        return _pass(name)
    if kind == "weak" and not faults.empty:
        return _pass(name)
    if kind not in ("standard", "weak"):
        raise ValueError(f"unknown validity kind {kind!r}")
    if len(set(honest_in.values())) != 1:
        return _pass(name)
    v = next(iter(honest_in.values()))
    bad = [p for p, out in honest_out.items() if out != v]
    if bad:
        return _fail(name, expected=_js(v), processors=bad, outputs=[_js(honest_out[p]) for p in bad])
    return _pass(name)


def check_gba(inputs: dict, outputs: dict, faults: FaultView = FaultView()) -> tuple[Verdict, Verdict]:
    honest_out = _honest(outputs, faults)
    consistency = _pass("gba_consistency")
    graded = [(p, o) for p, o in honest_out.items() if o.grade == 1]
    if graded:
        q, top = graded[0]
        for r, o in honest_out.items():
            if o.value != top.value:
                consistency = _fail("gba_consistency", processors=[q, r],
                                    outputs=[_js(top), _js(o)])
                break
    validity = _pass("gba_validity")
    honest_in = _premise(inputs, faults)
    if len(set(honest_in.values())) == 1:
        v = next(iter(honest_in.values()))
        bad = [p for p, o in honest_out.items() if o != GradedOutput(v, 1)]
        if bad:
            validity = _fail("gba_validity", expected=_js(GradedOutput(v, 1)), processors=bad,
                             outputs=[_js(honest_out[p]) for p in bad])
    return consistency, validity


def check_1_preference(transcript, outputs: dict, faults: FaultView | None = None) -> Verdict:
    """Every surviving processor that had a 1-valued message delivered to it
    (its own broadcasts included) outputs 1."""
    faults = faults or FaultView.of(transcript)
    honest_out = _honest(outputs, faults)
    for m in transcript.delivered_messages():
        if m.dst in honest_out and honest_out[m.dst] != 1 and 1 in carried_values(m.payload):
            return _fail("one_preference", processor=m.dst, output=_js(honest_out[m.dst]),
                         message={"round": m.round, "src": m.src})
    return _pass("one_preference")


def check_complexity(metrics, cfg: ProtocolConfig, n: int, fault_free: bool) -> Verdict:
    protocol = make_protocol(cfg, n)
    want_rounds, bound = protocol.total_rounds, protocol.awake_bound
    got = {"rounds": metrics.total_rounds, "max_awake": metrics.max_awake,
           "expected_rounds": want_rounds, "awake_bound": bound}
    if metrics.total_rounds != want_rounds:
        return _fail("complexity", **got)
    if fault_free and metrics.max_awake != bound:
        return _fail("complexity", **got)
    if not fault_free and metrics.max_awake > bound:
        return _fail("complexity", **got)
    return _pass("complexity")


def check_honest_confirm_uniqueness(transcript, faults: FaultView | None = None) -> Verdict:
    """At most one value is confirmed by processors running the protocol.

    Crashed processors follow the protocol until they stop, so only Byzantine
    senders are excluded.
    """
    faults = faults or FaultView.of(transcript)
    values = {}
    for m in transcript.messages():
        if type(m.payload) is Confirm and m.src not in faults.byzantine:
            values.setdefault(m.payload.value, m.src)
    if len(values) > 1:
        return _fail("confirm_uniqueness",
                     confirmed={str(_js(v)): p for v, p in values.items()})
    return _pass("confirm_uniqueness")


def check_termination(transcript, faults: FaultView | None = None) -> Verdict:
    faults = faults or FaultView.of(transcript)
    expected = set(range(1, transcript.n + 1)) - faults.faulty
    got = set(transcript.outputs)
    if got != expected or len(transcript.rounds) != transcript.total_rounds:
        return _fail("termination", missing=sorted(expected - got), unexpected=sorted(got - expected),
                     rounds=len(transcript.rounds))
    return _pass("termination")


def check_subset_decisions(transcript, blocks, faults: FaultView | None = None) -> Verdict:
    """Every survivor heard at least one decision from every full-size block."""
    faults = faults or FaultView.of(transcript)
    owner = {p: i for i, block in enumerate(blocks) for p in block}
    heard = {p: set() for p in transcript.outputs if p not in faults.faulty}
    for m in transcript.delivered_messages():
        if type(m.payload) is SubsetDecision and m.dst in heard and owner.get(m.src) == m.payload.index - 1:
            heard[m.dst].add(m.payload.index)
    want = set(range(1, len(blocks) + 1))
    for p, got in heard.items():
        if got != want:
            return _fail("subset_decisions", processor=p, missing=sorted(want - got))
    return _pass("subset_decisions")


# -- run-level evaluation -------------------------------------------------------

DEFAULT_PROPERTIES = {
    "base_ca": ("agreement", "validity", "termination", "complexity"),
    "rca": ("agreement", "validity", "termination", "complexity"),
    "rca1p": ("agreement", "validity", "termination", "complexity", "one_preference"),
    "opt_rca": ("agreement", "validity", "termination", "complexity", "subset_decisions"),
    "gba": ("gba_consistency", "gba_validity", "confirm_uniqueness", "termination", "complexity"),
}


def default_properties(protocol) -> tuple[str, ...]:
    return DEFAULT_PROPERTIES[protocol.name]


def evaluate(protocol, inputs: dict, result, properties=None) -> list[Verdict]:
    transcript, outputs, metrics = result
    faults = FaultView.of(transcript)
    properties = properties or default_properties(protocol)
    out = []
    gba_pair = None
    for name in properties:
        if name == "agreement":
            out.append(check_agreement(outputs, faults))
        elif name in ("validity", "weak_validity", "strong_validity"):
            kind = "standard" if name == "validity" else name.split("_")[0]
            out.append(check_validity(inputs, outputs, faults, kind))
        elif name in ("gba_consistency", "gba_validity"):
            gba_pair = gba_pair or check_gba(inputs, outputs, faults)
            out.append(gba_pair[0] if name == "gba_consistency" else gba_pair[1])
        elif name == "termination":
            out.append(check_termination(transcript, faults))
        elif name == "complexity":
            out.append(check_complexity(metrics, protocol.cfg, protocol.n, faults.empty))
        elif name == "one_preference":
            out.append(check_1_preference(transcript, outputs, faults))
        elif name == "confirm_uniqueness":
            out.append(check_honest_confirm_uniqueness(transcript, faults))
        elif name == "subset_decisions":
            out.append(check_subset_decisions(transcript, protocol.blocks, faults))
        else:
            raise ValueError(f"unknown property {name!r}")
    return out


@dataclass
class Summary:
    """Per-property pass/fail tallies plus replayable configs of failing runs."""

    label: str
    properties: tuple
    runs: int = 0
    passed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    max_failures: int = 20

    def __post_init__(self):
        for p in self.properties:
            self.passed.setdefault(p, 0)
            self.failed.setdefault(p, 0)

    @property
    def ok(self) -> bool:
        return not any(self.failed.values())

    def add(self, verdicts, replay: dict):
        self.runs += 1
        bad = []
        for v in verdicts:
            if v.ok:
                self.passed[v.name] += 1
            else:
                self.failed[v.name] += 1
                bad.append(v.to_json())
        if bad and len(self.failures) < self.max_failures:
            self.failures.append({"replay": replay, "verdicts": bad})

    def merge(self, other: "Summary"):
        self.runs += other.runs
        for p in other.properties:
            self.passed[p] = self.passed.get(p, 0) + other.passed[p]
            self.failed[p] = self.failed.get(p, 0) + other.failed[p]
        room = self.max_failures - len(self.failures)
        self.failures.extend(other.failures[:max(room, 0)])

    def lines(self) -> list[str]:
        rows = [json.dumps({"suite": self.label, "property": p, "runs": self.runs,
                            "pass": self.passed[p], "fail": self.failed[p],
                            "status": "PASS" if not self.failed[p] else "FAIL"}, sort_keys=True)
                for p in self.properties]
        rows += [json.dumps({"suite": self.label, "failure": f}, sort_keys=True) for f in self.failures]
        return rows

    def to_json(self) -> dict:
        return {"suite": self.label, "runs": self.runs, "ok": self.ok,
                "properties": {p: {"pass": self.passed[p], "fail": self.failed[p]} for p in self.properties},
                "failures": self.failures}


def replay_config(cfg: ProtocolConfig, n: int, inputs: dict, adversary: AdversarySpec) -> dict:
    return {"protocol": cfg.to_json(), "n": n,
            "inputs": [_js(inputs[p]) for p in sorted(inputs)], "adversary": adversary.to_json()}


def _static_calendar(protocol) -> bool:
    # recipients and sleep calendar independent of values and of crashes
    return protocol.name in ("base_ca", "rca", "rca1p", "opt_rca")


def crash_schedules_for(protocol, f: int, mode: str = "auto", cap: int | None = None,
                        sample_inputs: dict | None = None) -> list:
    if mode == "auto":
        mode = "effective" if _static_calendar(protocol) else "full"
    if mode == "full":
        return list(enumerate_crash_schedules(protocol.n, f, protocol.total_rounds, cap=cap))
    if mode == "effective":
        if not _static_calendar(protocol):
            raise ValueError(f"{protocol.name} has a value-dependent calendar; use mode='full'")
        inputs = sample_inputs or {p: 0 for p in protocol.members}
        probe = run_simulation(protocol.n, inputs, protocol).transcript
        return list(enumerate_effective_crash_schedules(probe, f, cap=cap))
    raise ValueError(f"unknown enumeration mode {mode!r}")


def exhaustive_verify(cfg: ProtocolConfig, n: int, f: int | None = None, domain=(0, 1),
                      properties=None, cap: int | None = None, mode: str = "auto",
                      label: str | None = None) -> Summary:
    """Run every (input vector, crash schedule) pair and tally verdicts.

    ``mode='full'`` enumerates every schedule literally; ``'effective'`` keeps
    one representative per class of schedules the survivors cannot tell apart.
    """
    protocol = make_protocol(cfg, n)
    f = cfg.f if f is None else f
    properties = tuple(properties or default_properties(protocol))
    vectors = list(itertools.product(domain, repeat=n))
    schedules = crash_schedules_for(protocol, f, mode, cap)
    total = len(vectors) * len(schedules)
    if cap is not None and total > cap:
        raise SizeLimit(f"{total} runs exceed cap {cap}")
    summary = Summary(label or f"exhaustive:{protocol.name}:n={n}:f={f}", properties)
    sim = SimConfig(f=f)
    for vec in vectors:
        inputs = dict(zip(range(1, n + 1), vec))
        for schedule in schedules:
            adv = AdversarySpec.crash(schedule)
            result = run_simulation(n, inputs, protocol, adv, sim)
            summary.add(evaluate(protocol, inputs, result, properties),
                        replay_config(cfg, n, inputs, adv))
    return summary


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:4], "big")


def random_inputs(seed, n: int, domain=(0, 1)) -> dict:
    rng = random.Random(seed)
    return {p: rng.choice(list(domain)) for p in range(1, n + 1)}


def adversary_for(mode: str, seed: int, protocol, f: int) -> AdversarySpec:
    """``none``, ``random-crash``, ``random-strategy`` or a built-in strategy name.

    Byzantine modes corrupt a seed-chosen set of ``f`` processors; the
    equivocators also get seed-chosen values and targets."""
    if mode == "none":
        return AdversarySpec.none()
    if mode == "random-crash":
        return AdversarySpec.crash(random_crash_schedule(seed, protocol.n, f, protocol.total_rounds))
    rng = random.Random(seed)
    corrupted = sorted(rng.sample(protocol.members, f))
    params = {"corrupted": corrupted}
    if mode == "random-strategy":
        return AdversarySpec.byzantine("RANDOM", {**params, "values": [0, 1]}, seed)
    if mode in ("VOTE_EQUIVOCATOR", "CONFIRM_EQUIVOCATOR"):
        v, v_alt = rng.sample([0, 1], 2)
        params.update(v=v, v_alt=v_alt, targets=[p for p in protocol.members if rng.random() < 0.5])
        honest = [p for p in protocol.members if p not in corrupted]
        if mode == "CONFIRM_EQUIVOCATOR":
            q, r = rng.sample(honest, 2) if len(honest) > 1 else (honest[0], honest[0])
            params.update(q=q, r=r)
    return AdversarySpec.byzantine(mode, params, seed)


def randomized_verify(cfg: ProtocolConfig, n: int, trials: int, seed: int = 1,
                      adversary: str = "random-crash", domain=(0, 1), properties=None,
                      label: str | None = None, cycle_inputs: bool = False) -> Summary:
    """Seeded fuzzing.  With ``cycle_inputs`` trial ``i`` uses the ``i``-th
    vector of ``domain^n`` (wrapping around) instead of a random one, so enough
    trials cover every input vector."""
    protocol = make_protocol(cfg, n)
    f = cfg.f
    properties = tuple(properties or default_properties(protocol))
    summary = Summary(label or f"randomized:{protocol.name}:n={n}:f={f}:{adversary}", properties)
    sim = SimConfig(f=f)
    vectors = itertools.cycle(itertools.product(domain, repeat=n)) if cycle_inputs else None
    for trial in range(trials):
        s = derive_seed(seed, protocol.name, n, f, trial)
        inputs = dict(zip(range(1, n + 1), next(vectors))) if vectors else random_inputs(s, n, domain)
        adv = adversary_for(adversary, s, protocol, f)
        result = run_simulation(n, inputs, protocol, adv, sim)
        summary.add(evaluate(protocol, inputs, result, properties), replay_config(cfg, n, inputs, adv))
    return summary
