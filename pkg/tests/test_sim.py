import random

import pytest

from reokit import automata as A
from reokit import dsl
from reokit import sim
from reokit.circuit import boundary_ports

from util import ALPHABET, LOSSY_TEXT, MERGER_TEXT, MINIMAL_SYNC_TEXT, random_circuit


def compiled(text):
    c = dsl.parse_circuit(text)
    ins, outs = boundary_ports(c)
    return (
        c,
        A.compile_circuit(c),
        frozenset(p.name for p in ins),
        frozenset(p.name for p in outs),
    )


def env_lines(text, circuit=None):
    return dsl.parse_env(text, circuit)


def test_enabled_sync_requires_offer_and_ready():
    _, auto, _, _ = compiled(MINIMAL_SYNC_TEXT)
    pairs = sim.enabled(auto, auto.initial, {"a": "ok"}, frozenset({"b"}))
    assert len(pairs) == 1
    _, assignment = pairs[0]
    assert assignment == {"a": "ok", "b": "ok"}
    assert sim.enabled(auto, auto.initial, {"a": "ok"}, frozenset()) == []
    assert sim.enabled(auto, auto.initial, {}, frozenset({"b"})) == []


def test_step_stall_and_singleton():
    _, auto, _, _ = compiled(MINIMAL_SYNC_TEXT)
    rng = random.Random(0)
    outcome = sim.step(auto, auto.initial, 1, {}, frozenset(), rng)
    assert isinstance(outcome, sim.Stall)
    for seed in range(10):
        outcome = sim.step(
            auto, auto.initial, 1, {"a": "ok"}, frozenset({"b"}), sim.round_rng(seed, 1)
        )
        assert isinstance(outcome, sim.Firing)
        assert outcome.sync == frozenset({"a", "b"})


def test_step_uniform_tie_break_on_lossy():
    _, auto, _, _ = compiled(LOSSY_TEXT)
    passes = 0
    for seed in range(100):
        outcome = sim.step(
            auto, auto.initial, 1, {"a": "ok"}, frozenset({"b"}), sim.round_rng(seed, 1)
        )
        assert isinstance(outcome, sim.Firing)
        if "b" in outcome.sync:
            passes += 1
    assert 35 <= passes <= 65  # 0.5 +/- 0.15


def test_merger_sees_both_alternatives():
    _, auto, _, _ = compiled(MERGER_TEXT)
    seen = set()
    for seed in range(40):
        outcome = sim.step(
            auto,
            auto.initial,
            1,
            {"a1": "ok", "a2": "ok"},
            frozenset({"b"}),
            sim.round_rng(seed, 1),
        )
        seen.add(tuple(sorted(outcome.sync)))
    assert seen == {("a1", "b"), ("a2", "b")}


def test_simulate_three_rounds_and_empty():
    c, auto, ins, outs = compiled(MINIMAL_SYNC_TEXT)
    env = env_lines(
        "round 1: offer a=ok\nround 2: offer a=ok\nround 3: offer a=ok", c
    )
    trace = sim.simulate(auto, env, sim.SimConfig(seed=1), ins, outs, c.name)
    assert len(trace.steps) == 3
    assert all(isinstance(s, sim.Firing) for s in trace.steps)
    assert all(s.sync == frozenset({"a", "b"}) for s in trace.steps)
    empty = sim.simulate(
        auto, env, sim.SimConfig(seed=1, max_rounds=0), ins, outs, c.name
    )
    assert empty.steps == []


def test_simulate_records_stalls_in_place():
    c, auto, ins, outs = compiled(MINIMAL_SYNC_TEXT)
    env = env_lines("round 1: offer a=ok\nround 3: offer a=ok", c)
    trace = sim.simulate(auto, env, sim.SimConfig(seed=0), ins, outs, c.name)
    kinds = [type(s).__name__ for s in trace.steps]
    assert kinds == ["Firing", "Stall", "Firing"]
    assert trace.steps[1].round == 2


def test_simulate_unknown_port_rejected_before_round_one():
    c, auto, ins, outs = compiled(MINIMAL_SYNC_TEXT)
    env = sim.EnvScript(rounds=((1, sim.Round(offers=(("zz", "ok"),))),))
    with pytest.raises(sim.EnvMismatchError):
        sim.simulate(auto, env, sim.SimConfig(), ins, outs, c.name)
    backwards = sim.EnvScript(rounds=((1, sim.Round(offers=(("b", "ok"),))),))
    with pytest.raises(sim.EnvMismatchError):
        sim.simulate(auto, env=backwards, cfg=sim.SimConfig(), inputs=ins, outputs=outs)


def test_simulate_deterministic_across_runs():
    # 20 seeds x 5 circuits, byte-identical traces on repeat
    rng = random.Random(1234)
    subjects = [dsl.parse_circuit(LOSSY_TEXT)]
    subjects += [random_circuit(rng, max_extra=2) for _ in range(4)]
    for c in subjects:
        ins, outs = boundary_ports(c)
        ins = frozenset(p.name for p in ins)
        outs = frozenset(p.name for p in outs)
        auto = A.compile_circuit(c)
        offers = ", ".join(f"{p}=ok" for p in sorted(ins))
        env = env_lines("\n".join(f"round {n}: offer {offers}" for n in range(1, 9)), c)
        for seed in range(20):
            t1 = sim.simulate(auto, env, sim.SimConfig(seed=seed), ins, outs, c.name)
            t2 = sim.simulate(auto, env, sim.SimConfig(seed=seed), ins, outs, c.name)
            assert t1.to_json(auto) == t2.to_json(auto)


def test_firings_are_sound_and_chain():
    c, auto, ins, outs = compiled(LOSSY_TEXT)
    env = env_lines("\n".join(f"round {n}: offer a=ok" for n in range(1, 9)), c)
    trace = sim.simulate(auto, env, sim.SimConfig(seed=3), ins, outs, c.name)
    state = auto.initial
    for stp in trace.steps:
        if isinstance(stp, sim.Stall):
            continue
        assert stp.state_before == state
        offers, ready = env.round(stp.round, outs)
        options = sim.enabled(auto, state, offers, ready)
        assert (stp.sync, dict(stp.assignment)) in [
            (t.sync, a) for t, a in options
        ]
        state = stp.state_after


def test_trace_json_roundtrip():
    c, auto, ins, outs = compiled(MINIMAL_SYNC_TEXT)
    env = env_lines("round 1: offer a=ok\nround 3: offer a=ok", c)
    trace = sim.simulate(auto, env, sim.SimConfig(seed=0), ins, outs, c.name)
    text = trace.to_json(auto)
    back = sim.trace_from_json(text)
    assert back.circuit == c.name
    assert [type(s).__name__ for s in back.steps] == [
        type(s).__name__ for s in trace.steps
    ]
    fir = back.firings()[0]
    assert fir.sync == frozenset({"a", "b"})
    assert dict(fir.assignment) == {"a": "ok", "b": "ok"}
