"""Agreement protocols for the sleeping model, and the calendar arithmetic
every processor evaluates identically.

Programs are generators: each ``yield`` is the processor's action for one
global round and evaluates to the messages it received in that round (empty
after a sleep).  The generator's return value is the processor's output.
Composition is plain ``yield from``, so a recursive call occupies exactly the
rounds its calendar says it does.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Generator, Sequence

from .errors import ConfigInvalid, EmptySubgroup, NonBinaryValue
from .model import (BOTTOM, Confirm, Dissem, Flood, GradedOutput, Node, Prelim, Send, Sleep,
                    SubsetDecision, Vote, value_key)

Program = Generator


class Thresholds(str, Enum):
    PAPER = "paper"
    STRICT = "strict"


class BaseVariant(str, Enum):
    DECIDE_MIN = "min"
    DECIDE_MAX = "max"


PROTOCOL_NAMES = ("gba", "rca", "rca1p", "opt_rca", "base_ca")


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str = "rca"
    f: int = 0
    c: int = 2
    gba_thresholds: Thresholds = Thresholds.PAPER
    base_variant: BaseVariant | None = None
    one_preference: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOL_NAMES:
            raise ConfigInvalid(f"unknown protocol {self.protocol!r}")
        if self.c < 1:
            raise ConfigInvalid(f"base-case threshold c must be >= 1, got {self.c}")
        if self.f < 0:
            raise ConfigInvalid(f"f must be >= 0, got {self.f}")
        object.__setattr__(self, "gba_thresholds", Thresholds(self.gba_thresholds))
        one_pref = self.one_preference or self.protocol == "rca1p"
        variant = self.base_variant
        if variant is None:
            variant = BaseVariant.DECIDE_MAX if one_pref else BaseVariant.DECIDE_MIN
        variant = BaseVariant(variant)
        if one_pref and variant is not BaseVariant.DECIDE_MAX:
            raise ConfigInvalid("1-preference needs the decide-max base algorithm")
        object.__setattr__(self, "base_variant", variant)
        object.__setattr__(self, "one_preference", one_pref)

    def to_json(self) -> dict:
        d = asdict(self)
        d["gba_thresholds"] = self.gba_thresholds.value
        d["base_variant"] = self.base_variant.value
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "ProtocolConfig":
        known = {"protocol", "f", "c", "gba_thresholds", "base_variant", "one_preference"}
        return cls(**{k: v for k, v in d.items() if k in known})


# -- calendar arithmetic -----------------------------------------------------

def split(members: Sequence[int]) -> tuple[tuple, tuple]:
    """First ceil(m/2) members, last floor(m/2) members."""
    k = (len(members) + 1) // 2
    return tuple(members[:k]), tuple(members[k:])


def subgroup(w: int, n_or_members) -> tuple[int, ...]:
    """Members of the heap-indexed subgroup ``w`` (1 is everybody)."""
    if isinstance(n_or_members, int):
        members = tuple(range(1, n_or_members + 1))
    else:
        members = tuple(n_or_members)
    if w < 1:
        raise EmptySubgroup(f"subgroup index must be >= 1, got {w}")
    for bit in bin(w)[3:]:
        left, right = split(members)
        members = right if bit == "1" else left
        if not members:
            raise EmptySubgroup(f"subgroup {w} is empty")
    if not members:
        raise EmptySubgroup(f"subgroup {w} is empty")
    return members


@lru_cache(maxsize=None)
def _duration(m: int, c: int, one_pref: bool) -> int:
    if m <= c:
        return m
    lead = 1 if one_pref else 0
    return lead + _duration((m + 1) // 2, c, one_pref) + 1 + _duration(m // 2, c, one_pref)


@lru_cache(maxsize=None)
def _awake(m: int, c: int, one_pref: bool) -> int:
    if m <= c:
        return m
    return _awake((m + 1) // 2, c, one_pref) + (2 if one_pref else 1)


def duration(m: int, cfg: ProtocolConfig) -> int:
    """Rounds taken by the recursive crash agreement on ``m`` processors."""
    if m < 1:
        raise ValueError(f"subgroup size must be >= 1, got {m}")
    return _duration(m, cfg.c, cfg.one_preference)


def awake_bound(m: int, cfg: ProtocolConfig) -> int:
    """Largest number of awake rounds of any processor in a fault-free run."""
    if m < 1:
        raise ValueError(f"subgroup size must be >= 1, got {m}")
    return _awake(m, cfg.c, cfg.one_preference)


def partition_opt(n: int, f: int) -> tuple[list[tuple[int, ...]], tuple[int, ...]]:
    """Contiguous blocks of size f+1, plus the leftover block (maybe empty)."""
    if not 0 <= f < n:
        raise ConfigInvalid(f"need 0 <= f < n, got n={n}, f={f}")
    size = f + 1
    s = n // size
    blocks = [tuple(range(i * size + 1, (i + 1) * size + 1)) for i in range(s)]
    return blocks, tuple(range(s * size + 1, n + 1))


# -- programs ----------------------------------------------------------------

def sleep(node: Node, rounds: int):
    if rounds > 0:
        yield Sleep(node.round + rounds)


def broadcast(members, payload) -> Send:
    return Send(tuple((q, payload) for q in members))


def floodset(node: Node, members: Sequence[int], v_in, variant: BaseVariant) -> Program:
    """FloodSet over ``members`` for len(members) rounds; tolerates any number
    of crashes short of all of them."""
    member_set = frozenset(members)
    known = {v_in}
    for _ in range(len(members)):
        inbox = yield broadcast(members, Flood(frozenset(known)))
        for m in inbox:
            if type(m.payload) is Flood and m.src in member_set:
                known |= m.payload.values
    return min(known) if variant is BaseVariant.DECIDE_MIN else max(known)


def _tally(inbox, kind, senders) -> Counter:
    # one vote per sender; an equivocating sender only gets its first message counted
    seen = set()
    counts = Counter()
    for m in inbox:
        if type(m.payload) is kind and m.src in senders and m.src not in seen:
            seen.add(m.src)
            counts[m.payload.value] += 1
    return counts


def _best(counts: Counter, at_least: int):
    ranked = sorted((v for v, k in counts.items() if k >= at_least),
                    key=lambda v: (-counts[v], value_key(v)))
    return ranked[0] if ranked else None


def decide_gba(v_in, confirms: Counter, n: int, f: int, thresholds: Thresholds) -> GradedOutput:
    """End-of-round-2 decision from the confirmation tally."""
    if thresholds is Thresholds.STRICT:
        v = _best(confirms, n - f)
        if v is not None:
            return GradedOutput(v, 1)
        v = _best(confirms, f + 1)
        return GradedOutput(v, 0) if v is not None else GradedOutput(v_in, 0)
    v = _best(confirms, f + 1)
    if v is not None:
        return GradedOutput(v, 1)
    v = _best(confirms, 1)
    return GradedOutput(v, 0) if v is not None else GradedOutput(v_in, 0)


def gba(node: Node, members: Sequence[int], v_in, f: int, thresholds: Thresholds) -> Program:
    member_set = frozenset(members)
    n = len(members)
    inbox = yield broadcast(members, Vote(v_in))
    votes = _tally(inbox, Vote, member_set)
    confirmed = _best(votes, n - f)
    inbox = yield broadcast(members, Confirm(confirmed)) if confirmed is not None else Send()
    return decide_gba(v_in, _tally(inbox, Confirm, member_set), n, f, thresholds)


def rca(node: Node, w: int, members: Sequence[int], v_in, cfg: ProtocolConfig) -> Program:
    """Recursive crash agreement on subgroup ``w`` whose members are ``members``."""
    if len(members) <= cfg.c:
        return (yield from floodset(node, members, v_in, cfg.base_variant))
    left, right = split(members)
    me = node.pid
    if cfg.one_preference:
        inbox = yield broadcast(left, Prelim(v_in)) if me in right else Send()
        if me in left:
            right_set = frozenset(right)
            if any(type(m.payload) is Prelim and m.src in right_set and m.payload.value == 1
                   for m in inbox):
                v_in = 1
    if me in left:
        v = yield from rca(node, 2 * w, left, v_in, cfg)
        yield broadcast(members, Dissem(v))
        yield from sleep(node, duration(len(right), cfg))
        return v
    yield from sleep(node, duration(len(left), cfg))
    inbox = yield Send()
    left_set = frozenset(left)
    received = [m.payload.value for m in inbox if type(m.payload) is Dissem and m.src in left_set]
    if received:
        v_in = received[0]
    return (yield from rca(node, 2 * w + 1, right, v_in, cfg))


def collect_subset_decisions(inbox, blocks) -> list:
    """Slot i holds the first value received from a member of block i, else BOTTOM."""
    slots = [BOTTOM] * len(blocks)
    owner = {p: i for i, block in enumerate(blocks) for p in block}
    for m in inbox:
        if type(m.payload) is SubsetDecision:
            i = owner.get(m.src)
            if i is not None and m.payload.index == i + 1 and slots[i] is BOTTOM:
                slots[i] = m.payload.value
    return slots


def optimized_rca(node: Node, n: int, v_in, cfg: ProtocolConfig) -> Program:
    blocks, _rest = partition_opt(n, cfg.f)
    size = cfg.f + 1
    idx = (node.pid - 1) // size
    if idx < len(blocks):
        v = yield from rca(node, 1, blocks[idx], v_in, cfg)
        inbox = yield broadcast(range(1, n + 1), SubsetDecision(idx + 1, v))
    else:
        yield from sleep(node, duration(size, cfg))
        inbox = yield Send()
    present = [v for v in collect_subset_decisions(inbox, blocks) if v is not BOTTOM]
    return max(present) if present else BOTTOM


# -- protocol instances ------------------------------------------------------

class Protocol:
    """A protocol bound to ``n`` processors: a fixed calendar plus one program
    per processor."""

    name = ""

    def __init__(self, cfg: ProtocolConfig, n: int):
        if n < 1:
            raise ConfigInvalid(f"need n >= 1, got {n}")
        self.cfg = cfg
        self.n = n
        self.check()

    @property
    def f(self) -> int:
        return self.cfg.f

    def check(self):
        if self.cfg.f >= self.n:
            raise ConfigInvalid(f"need f < n, got n={self.n}, f={self.cfg.f}")

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, cfg={self.cfg})"


class BaseCA(Protocol):
    name = "base_ca"

    @property
    def total_rounds(self):
        return self.n

    @property
    def awake_bound(self):
        return self.n

    def program(self, node, v_in):
        return floodset(node, self.members, v_in, self.cfg.base_variant)


class GBA(Protocol):
    name = "gba"
    total_rounds = 2
    awake_bound = 2

    def check(self):
        if 3 * self.cfg.f >= self.n:
            raise ConfigInvalid(f"graded agreement needs f < n/3, got n={self.n}, f={self.cfg.f}")

    def program(self, node, v_in):
        return gba(node, self.members, v_in, self.cfg.f, self.cfg.gba_thresholds)


class RCA(Protocol):
    name = "rca"

    @property
    def total_rounds(self):
        return duration(self.n, self.cfg)

    @property
    def awake_bound(self):
        return awake_bound(self.n, self.cfg)

    def program(self, node, v_in):
        if self.cfg.one_preference and v_in not in (0, 1):
            raise NonBinaryValue(f"1-preference agreement is binary; processor {node.pid} has input {v_in!r}")
        return rca(node, 1, self.members, v_in, self.cfg)


class RCA1Pref(RCA):
    name = "rca1p"


class OptimizedRCA(Protocol):
    name = "opt_rca"

    @property
    def total_rounds(self):
        return duration(self.cfg.f + 1, self.cfg) + 1

    @property
    def awake_bound(self):
        return awake_bound(self.cfg.f + 1, self.cfg) + 1

    @property
    def blocks(self):
        return partition_opt(self.n, self.cfg.f)[0]

    def program(self, node, v_in):
        if self.cfg.one_preference and v_in not in (0, 1):
            raise NonBinaryValue(f"1-preference agreement is binary; processor {node.pid} has input {v_in!r}")
        return optimized_rca(node, self.n, v_in, self.cfg)


_CLASSES = {"base_ca": BaseCA, "gba": GBA, "rca": RCA, "rca1p": RCA1Pref, "opt_rca": OptimizedRCA}


def make_protocol(cfg: ProtocolConfig, n: int) -> Protocol:
    name = "rca1p" if cfg.protocol == "rca" and cfg.one_preference else cfg.protocol
    return _CLASSES[name](cfg, n)
