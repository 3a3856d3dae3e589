"""Value, message, action and transcript types for the sleeping-model simulator.

Round indices are global and 1-based.  A program yields one action per round
it is responsible for: ``Send`` keeps the processor awake for the current
round, ``Sleep(until_round)`` puts it to sleep up to (not including)
``until_round``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator


class _Bottom:
    """The missing value.  Orders strictly below every other value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("sleepagree.BOTTOM")

    def __repr__(self):
        return "BOTTOM"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()


@dataclass(frozen=True, slots=True)
class GradedOutput:
    value: Any
    grade: int

    def __post_init__(self):
        if self.grade not in (0, 1):
            raise ValueError(f"grade must be 0 or 1, got {self.grade!r}")


# -- payloads -----------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Vote:
    value: Any


@dataclass(frozen=True, slots=True)
class Confirm:
    value: Any


@dataclass(frozen=True, slots=True)
class Dissem:
    value: Any


@dataclass(frozen=True, slots=True)
class Prelim:
    value: Any


@dataclass(frozen=True, slots=True)
class SubsetDecision:
    index: int
    value: Any


@dataclass(frozen=True, slots=True)
class Flood:
    values: frozenset

    def __post_init__(self):
        if not self.values or BOTTOM in self.values:
            raise ValueError("FLOOD carries a non-empty set of non-bottom values")


PAYLOAD_TAGS = {
    Vote: "VOTE",
    Confirm: "CONFIRM",
    Dissem: "DISSEM",
    Prelim: "PRELIM",
    SubsetDecision: "SUBSET_DECISION",
    Flood: "FLOOD",
}


def carried_values(payload) -> tuple:
    """All agreement values a payload carries."""
    if isinstance(payload, Flood):
        return tuple(payload.values)
    return (payload.value,)


def value_to_json(v):
    if v is BOTTOM:
        return None
    if isinstance(v, GradedOutput):
        return {"value": value_to_json(v.value), "grade": v.grade}
    return v


def value_from_json(v):
    if v is None:
        return BOTTOM
    if isinstance(v, dict) and set(v) == {"value", "grade"}:
        return GradedOutput(value_from_json(v["value"]), v["grade"])
    return v


def value_key(v):
    # mixed domains (ints and strs) still need a deterministic order in traces
    return (type(v).__name__, v)


def payload_to_json(payload) -> dict:
    tag = PAYLOAD_TAGS[type(payload)]
    if isinstance(payload, Flood):
        return {"type": tag, "values": [value_to_json(v) for v in sorted(payload.values, key=value_key)]}
    if isinstance(payload, SubsetDecision):
        return {"type": tag, "index": payload.index, "value": value_to_json(payload.value)}
    return {"type": tag, "value": value_to_json(payload.value)}


def payload_from_json(d: dict):
    tag = d["type"]
    if tag == "FLOOD":
        return Flood(frozenset(value_from_json(v) for v in d["values"]))
    if tag == "SUBSET_DECISION":
        return SubsetDecision(d["index"], value_from_json(d["value"]))
    cls = {t: c for c, t in PAYLOAD_TAGS.items()}[tag]
    return cls(value_from_json(d["value"]))


# -- messages and actions -----------------------------------------------------

@dataclass(frozen=True, slots=True)
class Message:
    mid: int
    src: int
    dst: int
    round: int
    payload: Any


@dataclass(frozen=True, slots=True)
class Send:
    """Stay awake this round and send ``(dst, payload)`` pairs (possibly none)."""

    messages: tuple = ()


@dataclass(frozen=True, slots=True)
class Sleep:
    until_round: int


class DropReason(str, Enum):
    DST_ASLEEP = "DST_ASLEEP"
    DST_CRASHED = "DST_CRASHED"
    SRC_CRASH_OMITTED = "SRC_CRASH_OMITTED"
    SRC_CRASHED_EARLIER = "SRC_CRASHED_EARLIER"


# -- transcript ---------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    awake: list = field(default_factory=list)
    sleeps: list = field(default_factory=list)        # (pid, until_round)
    messages: list = field(default_factory=list)      # Message, in send order
    delivered: list = field(default_factory=list)     # mid
    dropped: list = field(default_factory=list)       # (mid, DropReason)
    crashes: list = field(default_factory=list)       # (pid, frozenset delivered-to)


@dataclass
class Transcript:
    n: int
    total_rounds: int
    inputs: dict
    byzantine: frozenset = frozenset()
    rounds: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    @property
    def crashed(self) -> dict:
        """pid -> crash round."""
        return {pid: rec.round for rec in self.rounds for pid, _ in rec.crashes}

    def messages(self) -> Iterator[Message]:
        for rec in self.rounds:
            yield from rec.messages

    def delivered_messages(self) -> Iterator[Message]:
        for rec in self.rounds:
            by_id = {m.mid: m for m in rec.messages}
            for mid in rec.delivered:
                yield by_id[mid]

    def events(self) -> Iterator[dict]:
        """Flat event stream, one dict per event, in round order."""
        for pid in sorted(self.inputs):
            yield {"round": 0, "kind": "input", "pid": pid, "value": value_to_json(self.inputs[pid])}
        for pid in sorted(self.byzantine):
            yield {"round": 0, "kind": "byzantine", "pid": pid}
        for rec in self.rounds:
            t = rec.round
            for pid in rec.awake:
                yield {"round": t, "kind": "awake", "pid": pid}
            for pid, until in rec.sleeps:
                yield {"round": t, "kind": "sleep", "pid": pid, "until": until}
            by_id = {}
            for m in rec.messages:
                by_id[m.mid] = m
                yield {"round": t, "kind": "send", "id": m.mid, "src": m.src, "dst": m.dst,
                       "payload": payload_to_json(m.payload)}
            for mid in rec.delivered:
                m = by_id[mid]
                yield {"round": t, "kind": "deliver", "id": mid, "src": m.src, "dst": m.dst}
            for mid, reason in rec.dropped:
                m = by_id[mid]
                yield {"round": t, "kind": "drop", "id": mid, "src": m.src, "dst": m.dst,
                       "reason": reason.value}
            for pid, delivered in rec.crashes:
                yield {"round": t, "kind": "crash", "pid": pid, "delivered": sorted(delivered)}
        for pid in sorted(self.outputs):
            yield {"round": self.total_rounds, "kind": "output", "pid": pid,
                   "value": value_to_json(self.outputs[pid])}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events())


@dataclass
class Metrics:
    awake_rounds: dict
    total_rounds: int
    total_messages: int

    @property
    def max_awake(self) -> int:
        return max(self.awake_rounds.values(), default=0)

    def to_dict(self) -> dict:
        return {
            "rounds": self.total_rounds,
            "max_awake": self.max_awake,
            "total_messages": self.total_messages,
            "awake_rounds": {str(p): a for p, a in sorted(self.awake_rounds.items())},
        }


@dataclass(slots=True)
class Node:
    """Per-processor context handed to a program; ``round`` is the round whose
    action the program is currently choosing."""

    pid: int
    n: int
    round: int = 0
