import json

import pytest

from oracles import brute_force_schedule_count
from sleepagree import (AdversarySpec, Crash, CrashSchedule, ProtocolConfig, SimConfig, make_protocol,
                        run_simulation)
from sleepagree.adversary import (STRATEGIES, builtin_strategy, count_crash_schedules,
                                  effective_crash_options, enumerate_crash_schedules,
                                  enumerate_effective_crash_schedules, random_crash_schedule, validate)
from sleepagree.errors import SizeLimit, UnknownStrategy
from sleepagree.harness import scripted_confirm_equivocation
from sleepagree.model import Confirm, GradedOutput, carried_values


def test_validate_examples():
    assert validate(AdversarySpec.none(), 5, 0) is None
    over = AdversarySpec.crash({1: Crash(1), 2: Crash(2)})
    assert "budget exceeded" in validate(over, 3, 1)
    assert "round out of range" in validate(AdversarySpec.crash({1: Crash(0)}), 3, 1)
    assert "round out of range" in validate(AdversarySpec.crash({1: Crash(9)}), 3, 1, horizon=4)
    assert validate(AdversarySpec.crash({5: Crash(1)}), 3, 1) is not None
    assert validate(AdversarySpec.byzantine("SILENT", {"corrupted": [1, 2]}), 4, 1).startswith("budget")
    assert validate(AdversarySpec.byzantine("NOPE"), 4, 1) is not None


def test_two_processor_single_round_count():
    schedules = list(enumerate_crash_schedules(2, 1, 1))
    assert len(schedules) == 5
    assert CrashSchedule({}) in schedules
    assert CrashSchedule({2: Crash(1, frozenset({1}))}) in schedules


def test_no_budget_means_only_the_empty_schedule():
    assert list(enumerate_crash_schedules(4, 0, 7)) == [CrashSchedule({})]


@pytest.mark.parametrize("n,f,h", [(2, 1, 1), (2, 1, 2), (3, 2, 1), (3, 1, 2), (3, 2, 2), (4, 2, 1)])
def test_counts_match_brute_force(n, f, h):
    expected = brute_force_schedule_count(n, f, h, range(1, n + 1))
    assert count_crash_schedules(n, f, h) == expected
    schedules = list(enumerate_crash_schedules(n, f, h))
    assert len(schedules) == expected
    assert len(set(schedules)) == expected


def test_participants_restrict_the_victims():
    schedules = list(enumerate_crash_schedules(3, 2, 1, participants={2}))
    assert len(schedules) == brute_force_schedule_count(3, 2, 1, [2]) == 5
    assert all(set(s.crashes) <= {2} for s in schedules)


def test_cap_is_enforced_before_streaming():
    with pytest.raises(SizeLimit):
        enumerate_crash_schedules(4, 3, 5, cap=1000)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_schedule_is_reproducible(seed):
    a = random_crash_schedule(seed, 8, 3, 11)
    assert a == random_crash_schedule(seed, 8, 3, 11)
    assert validate(AdversarySpec.crash(a), 8, 3, horizon=11) is None


def test_random_schedules_vary_with_seed():
    assert len({random_crash_schedule(s, 8, 3, 11) for s in range(20)}) > 1


def test_adversary_json_round_trip():
    specs = [
        AdversarySpec.none(),
        AdversarySpec.crash({1: Crash(2, frozenset({3, 4})), 4: Crash(1)}),
        AdversarySpec.byzantine("CONFIRM_EQUIVOCATOR", {"v": 1, "v_alt": 0, "targets": [1]}, 5),
    ]
    for spec in specs:
        assert AdversarySpec.from_json(json.loads(spec.dumps())) == spec


def test_unknown_strategy():
    with pytest.raises(UnknownStrategy):
        builtin_strategy("WHATEVER", n=4, f=1)


def _gba(n, f, thresholds="strict"):
    return make_protocol(ProtocolConfig("gba", f=f, gba_thresholds=thresholds), n)


@pytest.mark.parametrize("n", [4, 7, 10])
def test_silent_byzantine_keeps_unanimous_grade_one(n):
    p = _gba(n, (n - 1) // 3, "paper")
    _, outputs, _ = run_simulation(n, {i: 3 for i in range(1, n + 1)}, p, AdversarySpec.byzantine("SILENT"))
    assert set(outputs.values()) == {GradedOutput(3, 1)}
    assert len(outputs) == n - p.f


def test_scripted_confirm_equivocation_views():
    outcome = scripted_confirm_equivocation("paper")
    confirms = {}
    for m in outcome.result.transcript.delivered_messages():
        if isinstance(m.payload, Confirm):
            confirms.setdefault(m.dst, []).append(m.payload.value)
    # the targeted processor sees f+1 confirmations for 1; processor 2 sees two for 0, one for 1
    assert sorted(confirms[1]) == [1, 1, 1]
    assert sorted(confirms[2]) == [0, 0, 1]
    assert outcome.result.outputs[1] == GradedOutput(1, 1)
    assert outcome.result.outputs[2].value == 0
    strict = scripted_confirm_equivocation("strict")
    assert strict.result.outputs[2].value == 1


def test_vote_equivocator_is_rushing_free_of_forgery():
    p = _gba(4, 1)
    adv = AdversarySpec.byzantine("VOTE_EQUIVOCATOR", {"v": 0, "v_alt": 1, "targets": [1]})
    transcript, _, _ = run_simulation(4, {1: 0, 2: 0, 3: 1, 4: 0}, p, adv)
    byz = [m for m in transcript.messages() if m.src == 4]
    assert {m.dst: carried_values(m.payload) for m in byz if m.round == 1} == {1: (0,), 2: (1,), 3: (1,), 4: (1,)}


def test_random_strategy_depends_only_on_seed():
    p = _gba(7, 2)
    adv = AdversarySpec.byzantine("RANDOM", {"values": [0, 1], "malformed": True}, 42)
    a = run_simulation(7, {i: 1 for i in range(1, 8)}, p, adv)
    b = run_simulation(7, {i: 1 for i in range(1, 8)}, p, adv)
    assert a.transcript.to_jsonl() == b.transcript.to_jsonl()


def test_all_builtin_names_construct():
    for name in STRATEGIES:
        s = builtin_strategy(name, {}, n=7, f=2, seed=0)
        assert s.corrupted == frozenset({6, 7})


# -- the reduced enumeration loses no observable behaviour -------------------

def _observation(transcript, outputs):
    ones = frozenset(m.dst for m in transcript.delivered_messages() if 1 in carried_values(m.payload))
    return frozenset(outputs.items()), frozenset(transcript.crashed), ones & frozenset(outputs)


def _outcomes(protocol, n, inputs, schedules):
    seen = set()
    for s in schedules:
        t, out, _ = run_simulation(n, inputs, protocol, AdversarySpec.crash(s), SimConfig())
        seen.add(_observation(t, out))
    return seen


@pytest.mark.parametrize("name", ["base_ca", "rca", "rca1p"])
@pytest.mark.parametrize("vec", [(0, 1, 1), (1, 0, 0), (0, 0, 1)])
def test_effective_enumeration_matches_full_at_n3(name, vec):
    p = make_protocol(ProtocolConfig(name, f=2), 3)
    inputs = dict(zip((1, 2, 3), vec))
    full = _outcomes(p, 3, inputs, enumerate_crash_schedules(3, 2, p.total_rounds))
    clean, _, _ = run_simulation(3, inputs, p)
    reduced = _outcomes(p, 3, inputs, enumerate_effective_crash_schedules(clean, 2))
    assert reduced == full


def test_effective_options_shape():
    p = make_protocol(ProtocolConfig("rca", f=3), 4)
    clean, _, _ = run_simulation(4, {i: 0 for i in range(1, 5)}, p)
    options = effective_crash_options(clean)
    # processor 1 is awake in rounds 1, 2 (flood with 2) and 3 (dissem to 2, 3, 4)
    assert sorted({c.round for c in options[1]}) == [1, 2, 3]
    assert Crash(1, frozenset()) in options[1]
    assert Crash(2, frozenset()) not in options[1]
    assert len(options[1]) == 2 + 1 + 7
