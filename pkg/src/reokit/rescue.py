"""The built-in rescue scenario: circuit, rulebase, event map, end-to-end run.

This module wires the two halves of the toolkit together: a compiled
coordination circuit is simulated against an environment script, the
boundary firings are mapped to compliance atoms, and the compliance
engine judges the resulting event stream. The circuit, rulebase,
environment and map all ship as DSL text under ``reokit/data/``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from . import dsl
from .analysis import AnalysisReport, analyze
from .automata import ConstraintAutomaton, compile_circuit
from .circuit import PORT_IN, PORT_OUT, Circuit
from .dsl import EventMap, EventScript
from .semlog import (
    Atom,
    ComplianceEngine,
    Event,
    ORIGIN_SCRIPT,
    ORIGIN_TRACE,
    RuleBase,
    Verdict,
    pretty,
)
from .sim import EnvScript, SimConfig, Trace, simulate


def _data(name: str) -> str:
    return resources.files("reokit").joinpath(f"data/{name}").read_text()


def builtin_circuit() -> Circuit:
    """The rescue circuit, parsed from the shipped DSL text."""
    return dsl.parse_circuit(_data("rescue.circuit"))


def builtin_rules() -> RuleBase:
    """The compliance program; counting rules r10/r11 are engine built-ins."""
    return dsl.parse_rulebase(_data("rescue.rules"))


def builtin_env() -> EnvScript:
    return dsl.parse_env(_data("rescue.env"), builtin_circuit())


def builtin_map() -> EventMap:
    return dsl.parse_map(_data("rescue.map"), builtin_circuit())


def map_trace(trace: Trace, mapping: EventMap) -> list[Event]:
    """Map boundary firings to compliance events, in round order.

    Within one firing, ports are scanned in sorted order; a specific
    (port, data) association wins over a port-only one; ports without
    any association emit nothing.
    """
    events = []
    for firing in trace.firings():
        data = firing.data()
        for port in sorted(firing.sync):
            atom = mapping.lookup(port, data[port])
            if atom is not None:
                events.append(Event(len(events) + 1, Atom(atom), ORIGIN_TRACE))
    return events


@dataclass
class ScenarioReport:
    trace: Trace
    events: list[Event]
    verdict: Verdict
    analysis: AnalysisReport
    automaton: ConstraintAutomaton

    def to_json(self) -> str:
        doc = {
            "trace": json.loads(self.trace.to_json(self.automaton)),
            "events": [
                {"index": e.index, "term": pretty(e.term), "origin": e.origin}
                for e in self.events
            ],
            "verdict": self.verdict.to_dict(),
            "analysis": json.loads(self.analysis.to_json()),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_rescue(
    seed: int = 0,
    rounds: int = 12,
    env: EnvScript | None = None,
    mapping: EventMap | None = None,
    extra_events: EventScript | None = None,
    max_depth: int = 8,
    circuit: Circuit | None = None,
    automaton: ConstraintAutomaton | None = None,
) -> ScenarioReport:
    """compile -> simulate -> map -> ingest+saturate -> verdict.

    Defaults to the canned 12-round environment and the shipped map.
    ``extra_events`` are scripted compliance events ingested after the
    trace-mapped ones (the helicopter-mission demo uses this hook).
    A pre-compiled automaton can be passed to skip recompilation.
    """
    c = circuit if circuit is not None else builtin_circuit()
    auto = automaton if automaton is not None else compile_circuit(c)
    env = env if env is not None else builtin_env()
    mapping = mapping if mapping is not None else builtin_map()
    ins = frozenset(p.name for p in c.ports if p.kind == PORT_IN)
    outs = frozenset(p.name for p in c.ports if p.kind == PORT_OUT)
    trace = simulate(
        auto,
        env,
        SimConfig(seed=seed, max_rounds=rounds),
        inputs=ins,
        outputs=outs,
        circuit_name=c.name,
    )
    events = map_trace(trace, mapping)
    engine = ComplianceEngine(builtin_rules(), max_depth=max_depth)
    for event in events:
        engine.ingest(event, origin=ORIGIN_TRACE)
    if extra_events is not None:
        for term in extra_events.terms():
            engine.ingest(term, origin=ORIGIN_SCRIPT)
    verdict = engine.verdict()
    return ScenarioReport(
        trace=trace,
        events=engine.events,
        verdict=verdict,
        analysis=analyze(auto),
        automaton=auto,
    )
