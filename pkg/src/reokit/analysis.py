"""Verification passes over constraint automata.

Everything here works by finite-domain expansion: a step label is the
pair (sync-set, total data assignment on it), so trace comparison and
bisimulation are exact without any symbolic reasoning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .automata import ConstraintAutomaton, sat_assignments

# A step is (sorted sync tuple, sorted (name, item) pairs); a word is a
# tuple of steps. Plain tuples keep everything orderable and hashable.
Step = tuple[tuple[str, ...], tuple[tuple[str, str], ...]]
Word = tuple[Step, ...]


def _step(sync, assignment: dict[str, str]) -> Step:
    return (tuple(sorted(sync)), tuple(sorted(assignment.items())))


def expanded_steps(a: ConstraintAutomaton, state: int) -> list[tuple[Step, int]]:
    """All (label, successor) pairs from a state, fully expanded and sorted."""
    out = []
    for t in a.outgoing(state):
        for assignment in sat_assignments(t.guard, t.sync, a.alphabet):
            out.append((_step(t.sync, assignment), t.dst))
    out.sort()
    return out


def reachable(a: ConstraintAutomaton) -> set[int]:
    """States reachable from the initial over satisfiable transitions."""
    seen = {a.initial}
    stack = [a.initial]
    while stack:
        s = stack.pop()
        for t in a.outgoing(s):
            if t.dst not in seen and sat_assignments(t.guard, t.sync, a.alphabet):
                seen.add(t.dst)
                stack.append(t.dst)
    return seen


def deadlocks(a: ConstraintAutomaton) -> list[int]:
    """Reachable states with no satisfiable outgoing transition."""
    dead = []
    for s in sorted(reachable(a)):
        if not any(
            sat_assignments(t.guard, t.sync, a.alphabet) for t in a.outgoing(s)
        ):
            dead.append(s)
    return dead


def traces_upto(a: ConstraintAutomaton, k: int) -> list[Word]:
    """Every word of length <= k labeling a path from the initial state."""
    if k < 0:
        raise ValueError("depth must be >= 0")
    words: set[Word] = {()}
    frontier: list[tuple[int, Word]] = [(a.initial, ())]
    for _ in range(k):
        nxt: list[tuple[int, Word]] = []
        for state, word in frontier:
            for step, dst in expanded_steps(a, state):
                extended = word + (step,)
                if extended not in words:
                    words.add(extended)
                nxt.append((dst, extended))
        frontier = nxt
    return sorted(words)


def observable_traces(a: ConstraintAutomaton, visible, k: int) -> list[Word]:
    """Words over ``visible`` names of length <= k, ignoring silent steps.

    Steps are projected onto the visible names (data included); a step
    whose projection is empty advances the state without consuming depth.
    This enumerator is independent of hide(), which makes it usable as an
    oracle for hiding correctness: for any automaton A,
    observable_traces(A, V, k) == traces_upto(hide(A, names - V), k).
    """
    visible = frozenset(visible)
    words: set[Word] = set()
    seen: set[tuple[int, Word]] = set()
    frontier: list[tuple[int, Word]] = [(a.initial, ())]
    while frontier:
        nxt: list[tuple[int, Word]] = []
        for state, word in frontier:
            if (state, word) in seen:
                continue
            seen.add((state, word))
            words.add(word)
            for step, dst in expanded_steps(a, state):
                sync, data = step
                proj_sync = tuple(n for n in sync if n in visible)
                proj_data = tuple((n, v) for n, v in data if n in visible)
                if proj_sync:
                    if len(word) < k:
                        nxt.append((dst, word + ((proj_sync, proj_data),)))
                else:
                    nxt.append((dst, word))
        frontier = nxt
    return sorted(words)


def bisimilar(a: ConstraintAutomaton, b: ConstraintAutomaton) -> bool:
    """Strong bisimilarity of the initial states.

    Labels are fully expanded (sync-set, assignment) pairs; the check is
    plain partition refinement on the disjoint union of the state sets.
    """
    if a.names != b.names:
        raise ValueError(
            f"name sets differ: {sorted(a.names)} vs {sorted(b.names)}"
        )
    states = [(0, s) for s in range(a.n_states)] + [(1, s) for s in range(b.n_states)]
    succ: dict[tuple[int, int], list[tuple[Step, tuple[int, int]]]] = {}
    for side, auto in ((0, a), (1, b)):
        for s in range(auto.n_states):
            succ[(side, s)] = [
                (step, (side, dst)) for step, dst in expanded_steps(auto, s)
            ]
    block = {s: 0 for s in states}
    while True:
        signatures = {}
        for s in states:
            signatures[s] = (
                block[s],
                frozenset((step, block[dst]) for step, dst in succ[s]),
            )
        remap: dict = {}
        new_block = {}
        for s in states:  # deterministic: states list order fixes ids
            sig = signatures[s]
            if sig not in remap:
                remap[sig] = len(remap)
            new_block[s] = remap[sig]
        if new_block == block:
            break
        block = new_block
    return block[(0, a.initial)] == block[(1, b.initial)]


@dataclass
class AnalysisReport:
    reachable_count: int
    deadlock_states: list[str]
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "reachable": self.reachable_count,
            "deadlocks": self.deadlock_states,
            "notes": self.notes,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        lines = [f"reachable states: {self.reachable_count}"]
        if self.deadlock_states:
            lines.append(f"deadlock states: {', '.join(self.deadlock_states)}")
        else:
            lines.append("no deadlocks")
        lines.extend(self.notes)
        return "\n".join(lines)


def analyze(a: ConstraintAutomaton) -> AnalysisReport:
    reach = reachable(a)
    dead = deadlocks(a)
    return AnalysisReport(
        reachable_count=len(reach),
        deadlock_states=[a.labels[s] for s in dead],
    )
