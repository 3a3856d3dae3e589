"""Fault behaviours: crash schedules, their enumeration, and Byzantine strategies.

A crash of processor ``p`` at round ``t`` delivers the round-``t`` messages of
``p`` only to the destinations listed in ``delivered``; afterwards ``p`` is
silent.  Byzantine strategies are rushing: in each round they see every
honest message sent in that round before emitting their own.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Mapping

from .errors import SizeLimit, UnknownStrategy
from .model import Confirm, Vote, value_from_json, value_to_json


@dataclass(frozen=True)
class Crash:
    round: int
    delivered: frozenset = frozenset()


@dataclass(frozen=True)
class CrashSchedule:
    crashes: Mapping[int, Crash] = field(default_factory=dict)

    def __hash__(self):
        return hash(tuple(sorted(self.crashes.items())))

    def __eq__(self, other):
        return isinstance(other, CrashSchedule) and dict(self.crashes) == dict(other.crashes)

    def to_json(self) -> list:
        return [
            {"pid": pid, "round": c.round, "delivered": sorted(c.delivered)}
            for pid, c in sorted(self.crashes.items())
        ]

    @classmethod
    def from_json(cls, items) -> "CrashSchedule":
        return cls({d["pid"]: Crash(d["round"], frozenset(d.get("delivered", ()))) for d in items})


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = "none"                       # none | crash | byzantine
    schedule: CrashSchedule | None = None
    name: str | None = None
    params: dict = field(default_factory=dict, hash=False)
    seed: int | None = None

    @classmethod
    def none(cls) -> "AdversarySpec":
        return cls()

    @classmethod
    def crash(cls, schedule: CrashSchedule | Mapping[int, Crash]) -> "AdversarySpec":
        if not isinstance(schedule, CrashSchedule):
            schedule = CrashSchedule(dict(schedule))
        return cls(kind="crash", schedule=schedule)

    @classmethod
    def byzantine(cls, name: str, params: dict | None = None, seed: int | None = None) -> "AdversarySpec":
        return cls(kind="byzantine", name=name, params=dict(params or {}), seed=seed)

    def strategy(self, n: int, f: int, default_seed: int = 0) -> "ByzantineStrategy":
        seed = self.seed if self.seed is not None else default_seed
        return builtin_strategy(self.name, self.params, n=n, f=f, seed=seed)

    def to_json(self) -> dict:
        if self.kind == "crash":
            return {"kind": "crash", "crashes": self.schedule.to_json()}
        if self.kind == "byzantine":
            return {"kind": "byzantine", "name": self.name,
                    "params": _params_to_json(self.params), "seed": self.seed}
        return {"kind": "none"}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "AdversarySpec":
        kind = d.get("kind", "none")
        if kind == "none":
            return cls.none()
        if kind == "crash":
            return cls.crash(CrashSchedule.from_json(d.get("crashes", [])))
        if kind == "byzantine":
            return cls.byzantine(d["name"], _params_from_json(d.get("params", {})), d.get("seed"))
        raise ValueError(f"unknown adversary kind {kind!r}")


def _params_to_json(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (list, tuple, set, frozenset)):
            out[k] = [value_to_json(x) for x in (sorted(v) if isinstance(v, (set, frozenset)) else v)]
        else:
            out[k] = value_to_json(v)
    return out


def _params_from_json(params: dict) -> dict:
    return {k: ([value_from_json(x) for x in v] if isinstance(v, list) else value_from_json(v))
            for k, v in params.items()}


def validate(spec: AdversarySpec, n: int, f: int, horizon: int | None = None) -> str | None:
    """Return None when ``spec`` is legal for ``n`` processors and budget ``f``,
    otherwise a description of the first broken constraint."""
    if spec.kind == "none":
        return None
    if spec.kind == "crash":
        crashes = spec.schedule.crashes if spec.schedule else {}
        if len(crashes) > f:
            return f"budget exceeded: {len(crashes)} crashes with f={f}"
        for pid, c in crashes.items():
            if not 1 <= pid <= n:
                return f"unknown processor {pid}"
            if c.round < 1 or (horizon is not None and c.round > horizon):
                return f"round out of range: processor {pid} crashes at round {c.round}"
            bad = [d for d in c.delivered if not 1 <= d <= n]
            if bad:
                return f"unknown destination(s) {sorted(bad)} for processor {pid}"
        return None
    if spec.kind == "byzantine":
        if spec.name not in STRATEGIES:
            return f"unknown strategy {spec.name!r}"
        corrupted = corrupted_set(spec.params, n, f)
        if len(corrupted) > f:
            return f"budget exceeded: {len(corrupted)} Byzantine processors with f={f}"
        bad = [p for p in corrupted if not 1 <= p <= n]
        if bad:
            return f"unknown processor(s) {sorted(bad)}"
        return None
    return f"unknown adversary kind {spec.kind!r}"


# -- crash schedule enumeration -------------------------------------------------

def _subsets(items) -> list[frozenset]:
    items = sorted(items)
    return [frozenset(c) for k in range(len(items) + 1) for c in itertools.combinations(items, k)]


def count_crash_schedules(n: int, f: int, horizon: int, participants=None) -> int:
    participants = range(1, n + 1) if participants is None else participants
    per_crash = horizon * 2 ** (n - 1)
    k_max = min(f, len(set(participants)))
    return sum(comb(len(set(participants)), k) * per_crash ** k for k in range(k_max + 1))


def _product_schedules(options: dict, f: int) -> Iterator[CrashSchedule]:
    pids = sorted(options)
    for k in range(min(f, len(pids)) + 1):
        for chosen in itertools.combinations(pids, k):
            for picks in itertools.product(*(options[p] for p in chosen)):
                yield CrashSchedule(dict(zip(chosen, picks)))


def enumerate_crash_schedules(n: int, f: int, horizon: int, participants=None,
                              cap: int | None = None) -> Iterator[CrashSchedule]:
    """Every schedule crashing at most ``f`` of ``participants``, each at some
    round in ``[1, horizon]`` with any subset of the other processors as
    recipients of its final-round messages."""
    participants = sorted(set(range(1, n + 1) if participants is None else participants))
    total = count_crash_schedules(n, f, horizon, participants)
    if cap is not None and total > cap:
        raise SizeLimit(f"{total} crash schedules exceed cap {cap}")
    everyone = range(1, n + 1)
    options = {
        p: [Crash(t, d) for t in range(1, horizon + 1) for d in _subsets(q for q in everyone if q != p)]
        for p in participants
    }
    return _product_schedules(options, f)


def effective_crash_options(transcript) -> dict[int, list[Crash]]:
    """Crash choices per processor that are pairwise distinguishable by the
    surviving processors, derived from a fault-free transcript.

    Only valid for protocols whose sleep calendar and recipient lists do not
    depend on values or on other processors' crashes.  Equivalences used:
    crashing while asleep equals crashing at the next awake round with nothing
    delivered (or at the last awake round with everything delivered);
    recipients that are asleep never receive anyway; crashing at an awake round
    with nothing delivered equals crashing at the previous awake round with
    everything delivered.
    """
    awake_at: dict[int, set] = {p: set() for p in transcript.inputs}
    for rec in transcript.rounds:
        for p in rec.awake:
            awake_at[p].add(rec.round)
    options = {}
    for p in sorted(transcript.inputs):
        rounds = sorted(awake_at[p])
        opts = []
        for i, t in enumerate(rounds):
            rec = transcript.rounds[t - 1]
            recipients = {m.dst for m in rec.messages
                          if m.src == p and m.dst != p and m.dst in awake_at and t in awake_at[m.dst]}
            for d in _subsets(recipients):
                if i > 0 and not d:
                    continue
                opts.append(Crash(t, d))
        if not rounds:
            opts.append(Crash(1, frozenset()))
        options[p] = opts
    return options


def enumerate_effective_crash_schedules(transcript, f: int, cap: int | None = None) -> Iterator[CrashSchedule]:
    options = effective_crash_options(transcript)
    pids = sorted(options)
    total = 0
    for k in range(min(f, len(pids)) + 1):
        for chosen in itertools.combinations(pids, k):
            prod = 1
            for p in chosen:
                prod *= len(options[p])
            total += prod
    if cap is not None and total > cap:
        raise SizeLimit(f"{total} crash schedules exceed cap {cap}")
    return _product_schedules(options, f)


def random_crash_schedule(seed, n: int, f: int, horizon: int) -> CrashSchedule:
    rng = random.Random(seed)
    k = rng.randint(0, f)
    victims = sorted(rng.sample(range(1, n + 1), k))
    crashes = {}
    for p in victims:
        t = rng.randint(1, horizon)
        delivered = frozenset(q for q in range(1, n + 1) if q != p and rng.random() < 0.5)
        crashes[p] = Crash(t, delivered)
    return CrashSchedule(crashes)


# -- Byzantine strategies ------------------------------------------------------

def corrupted_set(params: dict, n: int, f: int) -> frozenset:
    if "corrupted" in params:
        return frozenset(params["corrupted"])
    # default: the last f processors
    return frozenset(range(n - f + 1, n + 1))


class ByzantineStrategy:
    """Base class.  ``decide`` returns ``(src, dst, payload)`` triples for the
    current round; every ``src`` must be corrupted."""

    def __init__(self, corrupted, n: int, f: int, params: dict, rng: random.Random):
        self.corrupted = frozenset(corrupted)
        self.n = n
        self.f = f
        self.params = params
        self.rng = rng

    @property
    def honest(self) -> list[int]:
        return [p for p in range(1, self.n + 1) if p not in self.corrupted]

    def decide(self, round: int, observed: list, history: list) -> list:
        raise NotImplementedError


class Silent(ByzantineStrategy):
    def decide(self, round, observed, history):
        return []


class RandomStrategy(ByzantineStrategy):
    """Each corrupted processor independently picks, per destination, to stay
    silent or to send a round-appropriate payload with a random value.  With
    ``malformed`` set the payload kind is also random."""

    def decide(self, round, observed, history):
        values = list(self.params.get("values", [0, 1]))
        malformed = bool(self.params.get("malformed", False))
        out = []
        for src in sorted(self.corrupted):
            for dst in range(1, self.n + 1):
                if self.rng.random() < 0.25:
                    continue
                if malformed:
                    kind = self.rng.choice([Vote, Confirm])
                else:
                    kind = Vote if round == 1 else Confirm
                out.append((src, dst, kind(self.rng.choice(values))))
        return out


class VoteEquivocator(ByzantineStrategy):
    """Round 1: VOTE(v) to ``targets``, VOTE(v_alt) to everybody else."""

    def votes(self):
        v, v_alt = self.params.get("v", 1), self.params.get("v_alt", 0)
        honest = self.honest
        targets = set(self.params.get("targets", honest[: len(honest) // 2]))
        return [(src, dst, Vote(v if dst in targets else v_alt))
                for src in sorted(self.corrupted) for dst in range(1, self.n + 1)]

    def decide(self, round, observed, history):
        return self.votes() if round == 1 else []


class ConfirmEquivocator(VoteEquivocator):
    """Vote equivocation, then round 2: CONFIRM(v) to ``q`` and CONFIRM(v_alt) to ``r``."""

    def decide(self, round, observed, history):
        if round == 1:
            return self.votes()
        if round == 2:
            v, v_alt = self.params.get("v", 1), self.params.get("v_alt", 0)
            honest = self.honest
            q = self.params.get("q", honest[0])
            r = self.params.get("r", honest[-1])
            return [m for src in sorted(self.corrupted)
                    for m in ((src, q, Confirm(v)), (src, r, Confirm(v_alt)))]
        return []


STRATEGIES = {
    "SILENT": Silent,
    "RANDOM": RandomStrategy,
    "VOTE_EQUIVOCATOR": VoteEquivocator,
    "CONFIRM_EQUIVOCATOR": ConfirmEquivocator,
}


def builtin_strategy(name: str, params: dict | None = None, *, n: int, f: int, seed=0) -> ByzantineStrategy:
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise UnknownStrategy(f"unknown strategy {name!r}; expected one of {sorted(STRATEGIES)}") from None
    params = dict(params or {})
    return cls(corrupted_set(params, n, f), n, f, params, random.Random(seed))
