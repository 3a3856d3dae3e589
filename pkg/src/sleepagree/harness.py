"""Run, sweep and check drivers behind the command line.

Everything here is callable as a library; ``cli`` only parses flags and maps
outcomes to exit codes.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from .adversary import AdversarySpec, random_crash_schedule
from .engine import SimConfig, replay_hash, run_simulation
from .errors import ConfigInvalid
from .model import value_to_json
from .protocols import ProtocolConfig, Thresholds, make_protocol
from .verify import (Summary, adversary_for, derive_seed, evaluate, exhaustive_verify,
                     randomized_verify)


def default_f(protocol: str, n: int) -> int:
    return (n - 1) // 3 if protocol == "gba" else n - 1


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_inputs(spec, n: int) -> dict:
    """``unanimous:v``, ``random:seed[:k]`` (values 0..k-1, k defaults to 2),
    a comma-separated list, or a list."""
    if isinstance(spec, (list, tuple)):
        values = list(spec)
    elif spec.startswith("unanimous:"):
        values = [_parse_value(spec.split(":", 1)[1])] * n
    elif spec.startswith("random:"):
        parts = spec.split(":")
        k = int(parts[2]) if len(parts) > 2 else 2
        rng = random.Random(int(parts[1]))
        values = [rng.randrange(k) for _ in range(n)]
    else:
        values = [_parse_value(x.strip()) for x in spec.strip("[]").split(",") if x.strip()]
    if len(values) != n:
        raise ConfigInvalid(f"expected {n} inputs, got {len(values)}")
    return dict(zip(range(1, n + 1), values))


def load_adversary(text) -> AdversarySpec:
    """Inline JSON, ``@path`` to a JSON file, ``none``, or an already-decoded dict."""
    if text is None:
        return AdversarySpec.none()
    if isinstance(text, dict):
        return AdversarySpec.from_json(text)
    if text.strip() == "none":
        return AdversarySpec.none()
    if text.startswith("@"):
        with open(text[1:]) as fh:
            text = fh.read()
    try:
        return AdversarySpec.from_json(json.loads(text))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigInvalid(f"bad adversary spec: {exc}") from exc


@dataclass
class RunConfig:
    protocol: str
    n: int
    f: int | None = None
    c: int = 2
    thresholds: str = "paper"
    base_variant: str | None = None
    one_preference: bool = False
    inputs: object = "unanimous:0"
    adversary: dict | None = None
    seed: int = 0
    properties: list | None = None

    def protocol_config(self) -> ProtocolConfig:
        f = default_f(self.protocol, self.n) if self.f is None else self.f
        return ProtocolConfig(self.protocol, f=f, c=self.c, gba_thresholds=self.thresholds,
                              base_variant=self.base_variant, one_preference=self.one_preference)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown run config field(s) {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunOutcome:
    config: RunConfig
    result: object
    verdicts: list
    digest: str

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "outputs": {str(p): value_to_json(v) for p, v in sorted(self.result.outputs.items())},
            "metrics": self.result.metrics.to_dict(),
            "verdicts": [v.to_json() for v in self.verdicts],
            "replay_hash": self.digest,
            "ok": self.ok,
        }


def execute(rc: RunConfig) -> RunOutcome:
    if rc.n < 1:
        raise ConfigInvalid(f"need n >= 1, got {rc.n}")
    cfg = rc.protocol_config()
    protocol = make_protocol(cfg, rc.n)
    inputs = parse_inputs(rc.inputs, rc.n)
    adversary = load_adversary(rc.adversary)
    result = run_simulation(rc.n, inputs, protocol, adversary, SimConfig(f=cfg.f, seed=rc.seed))
    verdicts = evaluate(protocol, inputs, result, rc.properties)
    return RunOutcome(rc, result, verdicts, replay_hash(result.transcript))


def trace_lines(outcome: RunOutcome) -> list[str]:
    lines = [json.dumps(e, sort_keys=True) for e in outcome.result.transcript.events()]
    lines.append(json.dumps({"kind": "replay_hash", "digest": outcome.digest}))
    return lines


# -- sweeps ------------------------------------------------------------------

SWEEP_COLUMNS = ["protocol", "n", "f", "trial", "seed", "rounds", "max_awake",
                 "total_messages", "agreement", "validity"]


@dataclass
class SweepConfig:
    protocol: str
    ns: list
    fs: list | None = None          # None: the protocol's largest legal f per n
    adversary: str = "none"         # none | random-crash[:k] | random-strategy | strategy name
    trials: int = 1
    seed: int = 0
    c: int = 2
    thresholds: str = "paper"
    jobs: int = 1

    def cells(self) -> list[tuple[int, int]]:
        out = []
        for n in self.ns:
            for f in (self.fs if self.fs is not None else [default_f(self.protocol, n)]):
                cfg = ProtocolConfig(self.protocol, f=f, c=self.c, gba_thresholds=self.thresholds)
                make_protocol(cfg, n)   # raises ConfigInvalid on an illegal cell
                out.append((n, f))
        return out


def _sweep_adversary(mode: str, seed: int, protocol, f: int) -> AdversarySpec:
    if mode.startswith("random-crash"):
        k = int(mode.split(":")[1]) if ":" in mode else f
        return AdversarySpec.crash(random_crash_schedule(seed, protocol.n, min(k, f), protocol.total_rounds))
    return adversary_for(mode, seed, protocol, f)


def _sweep_cell(args) -> list[dict]:
    sc, n, f = args
    cfg = ProtocolConfig(sc.protocol, f=f, c=sc.c, gba_thresholds=sc.thresholds)
    protocol = make_protocol(cfg, n)
    names = ("gba_consistency", "gba_validity") if protocol.name == "gba" else ("agreement", "validity")
    rows = []
    for trial in range(sc.trials):
        seed = derive_seed(sc.seed, sc.protocol, n, f, trial)
        rng = random.Random(seed)
        inputs = {p: rng.randrange(2) for p in range(1, n + 1)}
        adversary = _sweep_adversary(sc.adversary, seed, protocol, f)
        result = run_simulation(n, inputs, protocol, adversary, SimConfig(f=f, seed=seed))
        agreement, validity = evaluate(protocol, inputs, result, names)
        rows.append({"protocol": sc.protocol, "n": n, "f": f, "trial": trial, "seed": seed,
                     "rounds": result.metrics.total_rounds, "max_awake": result.metrics.max_awake,
                     "total_messages": result.metrics.total_messages,
                     "agreement": agreement.status, "validity": validity.status})
    return rows


def sweep(sc: SweepConfig) -> list[dict]:
    work = [(sc, n, f) for n, f in sc.cells()]
    if sc.jobs > 1:
        with ProcessPoolExecutor(max_workers=sc.jobs) as ex:
            chunks = list(ex.map(_sweep_cell, work))
    else:
        chunks = [_sweep_cell(w) for w in work]
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- check suites ------------------------------------------------------------

def scripted_confirm_equivocation(thresholds) -> RunOutcome:
    """n=7, f=2: honest 1..5 with inputs (1,1,1,1,0); Byzantine 6 and 7 send
    their 1-votes only to processor 1, then CONFIRM(1) to processor 1 and
    CONFIRM(0) to processor 2."""
    rc = RunConfig(
        protocol="gba", n=7, f=2, thresholds=Thresholds(thresholds).value,
        inputs=[1, 1, 1, 1, 0, 0, 0],
        adversary={"kind": "byzantine", "name": "CONFIRM_EQUIVOCATOR",
                   "params": {"v": 1, "v_alt": 0, "targets": [1], "q": 1, "r": 2}, "seed": 0},
    )
    return execute(rc)


def _vote_equivocator_runs(thresholds) -> Summary:
    """n=4, f=1, honest inputs (0,0,1), Byzantine 4 splitting its votes over
    every target subset."""
    cfg = ProtocolConfig("gba", f=1, gba_thresholds=thresholds)
    protocol = make_protocol(cfg, 4)
    props = ("gba_consistency", "gba_validity", "confirm_uniqueness")
    summary = Summary(f"vote-equivocator:n=4:{Thresholds(thresholds).value}", props)
    inputs = {1: 0, 2: 0, 3: 1, 4: 0}
    for k in range(5):
        for targets in itertools.combinations(range(1, 5), k):
            adv = AdversarySpec.byzantine("VOTE_EQUIVOCATOR", {"v": 0, "v_alt": 1, "targets": list(targets)})
            result = run_simulation(4, inputs, protocol, adv, SimConfig(f=1))
            summary.add(evaluate(protocol, inputs, result, props),
                        {"inputs": [0, 0, 1, 0], "adversary": adv.to_json()})
    return summary


def check_scripted_attacks() -> dict:
    views = {}
    for mode in ("paper", "strict"):
        outcome = scripted_confirm_equivocation(mode)
        verdicts = {v.name: v.to_json() for v in outcome.verdicts}
        views[mode] = {
            "outputs": {str(p): value_to_json(o) for p, o in sorted(outcome.result.outputs.items())},
            "consistency": verdicts["gba_consistency"],
            "validity": verdicts["gba_validity"],
            "confirm_uniqueness": verdicts["confirm_uniqueness"],
        }
    equivocation = {m: _vote_equivocator_runs(m).to_json() for m in ("paper", "strict")}
    ok = (views["strict"]["consistency"]["status"] == "PASS"
          and views["strict"]["confirm_uniqueness"]["status"] == "PASS"
          and views["paper"]["confirm_uniqueness"]["status"] == "PASS"
          and equivocation["strict"]["ok"])
    return {
        "suite": "scripted-attacks",
        "paper_mode_consistency": views["paper"]["consistency"]["status"],
        "strict_mode_consistency": views["strict"]["consistency"]["status"],
        "confirm_equivocation": views,
        "vote_equivocation": equivocation,
        "ok": ok,
    }


def check_small_exhaustive(gba_n7_trials: int = 10_000, seed: int = 1) -> dict:
    summaries = []
    for n in (1, 2, 3):
        for variant in ("min", "max"):
            cfg = ProtocolConfig("base_ca", f=n - 1, base_variant=variant)
            summaries.append(exhaustive_verify(cfg, n, mode="full",
                                               label=f"base_ca:{variant}:n={n}:f={n - 1}"))
    summaries.append(exhaustive_verify(ProtocolConfig("rca", f=3), 4, label="rca:n=4:f=3"))
    summaries.append(exhaustive_verify(ProtocolConfig("rca1p", f=3), 4, label="rca1p:n=4:f=3"))
    for mode in ("paper", "strict"):
        summaries.append(exhaustive_verify(ProtocolConfig("gba", f=1, gba_thresholds=mode), 4,
                                           mode="full", label=f"gba:{mode}:n=4:f=1"))
        summaries.append(randomized_verify(ProtocolConfig("gba", f=2, gba_thresholds=mode), 7,
                                           gba_n7_trials, seed, "random-crash",
                                           label=f"gba:{mode}:n=7:f=2:random-crash", cycle_inputs=True))
    return {"suite": "small-exhaustive", "summaries": [s.to_json() for s in summaries],
            "ok": all(s.ok for s in summaries)}


def randomized_matrix() -> list[tuple[ProtocolConfig, int, str]]:
    cells = [
        (ProtocolConfig("opt_rca", f=3), 16, "random-crash"),
        (ProtocolConfig("rca", f=7), 8, "random-crash"),
        (ProtocolConfig("rca1p", f=7), 8, "random-crash"),
        (ProtocolConfig("opt_rca", f=7), 20, "random-crash"),
    ]
    for n in (4, 7, 10):
        f = (n - 1) // 3
        cells.append((ProtocolConfig("gba", f=f, gba_thresholds="strict"), n, "random-strategy"))
        for name in ("SILENT", "VOTE_EQUIVOCATOR"):
            cells.append((ProtocolConfig("gba", f=f, gba_thresholds="strict"), n, name))
    return cells


def check_randomized(seed: int = 1, trials: int = 1000, cells=None) -> dict:
    cells = cells or randomized_matrix()
    summaries = [randomized_verify(cfg, n, trials, seed, adv) for cfg, n, adv in cells]
    return {"suite": "randomized", "seed": seed, "trials": trials,
            "summaries": [s.to_json() for s in summaries], "ok": all(s.ok for s in summaries)}
