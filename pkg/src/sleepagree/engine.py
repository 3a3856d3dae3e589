"""Lockstep round engine for the synchronous sleeping model.

Each round: awake honest processors choose actions, the rushing Byzantine
strategy (if any) adds its messages, the crash schedule filters the messages
of processors crashing this round, messages to sleeping or crashed
destinations are dropped, and the rest are delivered.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .adversary import AdversarySpec, validate
from .errors import ConfigInvalid, ProtocolStuck
from .model import (BOTTOM, DropReason, Message, Metrics, Node, RoundRecord, Send, Sleep,
                    Transcript)


@dataclass(frozen=True)
class SimConfig:
    f: int | None = None      # corruption budget; defaults to the protocol's f
    seed: int = 0             # fallback seed for randomized Byzantine strategies


@dataclass
class SimResult:
    transcript: Transcript
    outputs: dict
    metrics: Metrics

    def __iter__(self):
        return iter((self.transcript, self.outputs, self.metrics))


def _check_inputs(n: int, inputs: dict):
    if set(inputs) != set(range(1, n + 1)):
        missing = sorted(set(range(1, n + 1)) - set(inputs))
        extra = sorted(set(inputs) - set(range(1, n + 1)))
        raise ConfigInvalid(f"inputs must cover processors 1..{n}; missing {missing}, unexpected {extra}")
    for pid, v in inputs.items():
        if v is BOTTOM or v is None:
            raise ConfigInvalid(f"processor {pid} has no input value")


def run_simulation(n: int, inputs: dict, protocol, adversary: AdversarySpec | None = None,
                   config: SimConfig | None = None) -> SimResult:
    config = config or SimConfig()
    adversary = adversary or AdversarySpec.none()
    f = protocol.f if config.f is None else config.f
    inputs = dict(inputs)
    _check_inputs(n, inputs)
    T = protocol.total_rounds
    problem = validate(adversary, n, f, horizon=T)
    if problem:
        raise ConfigInvalid(problem)

    crashes = dict(adversary.schedule.crashes) if adversary.kind == "crash" else {}
    strategy = adversary.strategy(n, f, config.seed) if adversary.kind == "byzantine" else None
    byzantine = strategy.corrupted if strategy else frozenset()

    transcript = Transcript(n=n, total_rounds=T, inputs=inputs, byzantine=byzantine)
    nodes = {p: Node(p, n) for p in range(1, n + 1) if p not in byzantine}
    programs = {p: protocol.program(nodes[p], inputs[p]) for p in nodes}
    started = set()
    wake_at = {p: 1 for p in nodes}
    pending = {p: [] for p in nodes}
    alive = set(nodes)
    dead = set()
    mid = 0

    def resume(p, t):
        nodes[p].round = t
        inbox, pending[p] = pending[p], []
        if p in started:
            return programs[p].send(inbox)
        started.add(p)
        return next(programs[p])

    for t in range(1, T + 1):
        rec = RoundRecord(t)
        awake = set(byzantine)
        outgoing = []
        for p in sorted(alive):
            if wake_at[p] > t:
                continue
            try:
                action = resume(p, t)
            except StopIteration:
                raise ProtocolStuck(f"processor {p} returned before round {t} of {T}") from None
            if type(action) is Sleep:
                if action.until_round <= t:
                    raise ProtocolStuck(f"processor {p} asked to sleep until round {action.until_round} at round {t}")
                if action.until_round > T + 1:
                    raise ProtocolStuck(f"processor {p} sleeps past the end of the {T}-round calendar")
                wake_at[p] = action.until_round
                rec.sleeps.append((p, action.until_round))
            elif type(action) is Send:
                wake_at[p] = t + 1
                awake.add(p)
                for dst, payload in action.messages:
                    if not 1 <= dst <= n:
                        raise ProtocolStuck(f"processor {p} addressed unknown processor {dst}")
                    outgoing.append((p, dst, payload))
            else:
                raise ProtocolStuck(f"processor {p} produced {action!r} instead of an action at round {t}")
        rec.awake = sorted(awake)

        if strategy is not None:
            observed = [Message(-1, s, d, t, pl) for s, d, pl in outgoing]
            for src, dst, payload in strategy.decide(t, observed, transcript.rounds):
                if src not in byzantine:
                    raise ConfigInvalid(f"Byzantine strategy tried to send as honest processor {src}")
                if not 1 <= dst <= n:
                    raise ConfigInvalid(f"Byzantine strategy addressed unknown processor {dst}")
                outgoing.append((src, dst, payload))

        crashing = {p: crashes[p].delivered for p in alive if p in crashes and crashes[p].round == t}
        inboxes = {}
        for src, dst, payload in outgoing:
            mid += 1
            msg = Message(mid, src, dst, t, payload)
            rec.messages.append(msg)
            if src in dead:
                rec.dropped.append((mid, DropReason.SRC_CRASHED_EARLIER))
            elif src in crashing and dst not in crashing[src]:
                rec.dropped.append((mid, DropReason.SRC_CRASH_OMITTED))
            elif dst in dead or dst in crashing:
                rec.dropped.append((mid, DropReason.DST_CRASHED))
            elif dst not in awake:
                rec.dropped.append((mid, DropReason.DST_ASLEEP))
            else:
                rec.delivered.append(mid)
                inboxes.setdefault(dst, []).append(msg)
        for p in sorted(crashing):
            rec.crashes.append((p, frozenset(crashing[p])))
            alive.discard(p)
            dead.add(p)
            programs[p].close()
        for p, inbox in inboxes.items():
            if p in alive:
                inbox.sort(key=lambda m: (m.src, m.mid))
                pending[p] = inbox
        transcript.rounds.append(rec)

    outputs = {}
    for p in sorted(alive):
        if wake_at[p] != T + 1:
            raise ProtocolStuck(f"processor {p} wants round {wake_at[p]} beyond the {T}-round calendar")
        try:
            action = resume(p, T + 1)
        except StopIteration as stop:
            outputs[p] = stop.value
        else:
            raise ProtocolStuck(f"processor {p} produced {action!r} after the final round {T}")
    transcript.outputs = outputs
    return SimResult(transcript, dict(outputs), metrics_of(transcript))


def metrics_of(transcript: Transcript) -> Metrics:
    awake = {p: 0 for p in range(1, transcript.n + 1)}
    total = 0
    for rec in transcript.rounds:
        for p in rec.awake:
            awake[p] += 1
        total += len(rec.messages)
    return Metrics(awake_rounds=awake, total_rounds=len(transcript.rounds), total_messages=total)


def canonical_lines(transcript: Transcript) -> list[str]:
    """Event lines with message ids stripped and each round's events sorted."""
    by_round: dict[int, list[str]] = {}
    for e in transcript.events():
        e = {k: v for k, v in e.items() if k != "id"}
        by_round.setdefault(e["round"], []).append(json.dumps(e, sort_keys=True, separators=(",", ":")))
    return [line for r in sorted(by_round) for line in sorted(by_round[r])]


def replay_hash(transcript: Transcript) -> str:
    h = hashlib.sha256()
    for line in canonical_lines(transcript):
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()
