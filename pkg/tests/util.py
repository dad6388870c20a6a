"""Shared generators, fixtures text, and oracles for the test suite."""

from __future__ import annotations

import itertools
import random

from reokit import automata as A
from reokit import circuit as C

ALPHABET = frozenset({"ok", "bad"})

SEQ3_TEXT = """
circuit seq3 {
  data { tick }
  ports { out s1; out s2; out s3; }
  fifo1(n3, n1, init=tick);
  fifo1(n1, n2);
  fifo1(n2, n3);
  sync(n1, s1);
  sync(n2, s2);
  sync(n3, s3);
}
"""

# fifo1 and syncdrain between the same two nodes: the drain demands both
# fifo ends fire together, which a fifo1 never does, so nothing can move.
BLOCKER_TEXT = """
circuit blocker {
  data { ok }
  ports { in a; }
  fifo1(a, b);
  syncdrain(a, b);
}
"""

MINIMAL_SYNC_TEXT = "circuit mini { data { ok, bad } ports { in a; out b; } sync(a, b) }"

LOSSY_TEXT = "circuit lossy { data { ok, bad } ports { in a; out b; } lossysync(a, b) }"

MERGER_TEXT = """
circuit merger {
  data { ok }
  ports { in a1; in a2; out b; }
  sync(a1, m);
  sync(a2, m);
  sync(m, b);
}
"""


def random_guard(rng: random.Random, sync: list[str], alphabet=ALPHABET) -> A.Constraint:
    values = sorted(alphabet)
    kind = rng.randrange(4)
    if kind == 0:
        return A.TRUE
    if kind == 1 and len(sync) >= 2:
        a, b = rng.sample(sync, 2)
        return A.eq(a, b)
    if kind == 2:
        return A.const(rng.choice(sync), rng.choice(values))
    subset = rng.sample(values, rng.randint(1, len(values)))
    return A.member(rng.choice(sync), subset)


def random_automaton(rng: random.Random, alphabet=ALPHABET) -> A.ConstraintAutomaton:
    """Small automaton: <= 3 states, <= 2 names, <= 4 transitions."""
    names = ["a", "b"][: rng.randint(0, 2)]
    n_states = rng.randint(1, 3)
    labels = [f"q{i}" for i in range(n_states)]
    transitions = []
    if names:
        for _ in range(rng.randint(0, 4)):
            sync = rng.sample(names, rng.randint(1, len(names)))
            transitions.append(
                (
                    labels[rng.randrange(n_states)],
                    set(sync),
                    random_guard(rng, sync, alphabet),
                    labels[rng.randrange(n_states)],
                )
            )
    return A.build_automaton(names, labels, labels[0], transitions, alphabet)


_DIRECTED = ("sync", "lossysync", "fifo1", "filter", "transform")


def _make_channel(rng: random.Random, cid: str, kind: str, a: str, b: str) -> C.Channel:
    values = sorted(ALPHABET)
    init = accept = transform = None
    if kind == "fifo1" and rng.random() < 0.5:
        init = rng.choice(values)
    if kind == "filter":
        accept = frozenset(rng.sample(values, rng.randint(1, len(values))))
    if kind == "transform":
        shuffled = list(values)
        rng.shuffle(shuffled)
        transform = tuple(sorted(zip(values, shuffled)))
    return C.Channel(cid, kind, a, b, init=init, accept=accept, transform=transform)


def random_circuit(rng: random.Random, max_extra: int = 3, max_ins: int = 2) -> C.Circuit:
    """A small circuit that always passes validation.

    Boundary-in nodes only source channels; directed channels never end
    at a boundary-in node; the single out port always has an incoming
    channel. Drains may land anywhere internal.
    """
    ins = [f"i{k}" for k in range(rng.randint(1, max_ins))]
    outs = ["o0"]
    internal = [f"x{k}" for k in range(rng.randint(1, 2))]
    counter = itertools.count(1)
    channels: list[C.Channel] = []

    def add(kind: str, a: str, b: str) -> None:
        channels.append(_make_channel(rng, f"c{next(counter)}", kind, a, b))

    for ip in ins:
        add(rng.choice(_DIRECTED), ip, rng.choice(internal + outs))
    if not any(ch.end_b == "o0" and ch.kind in _DIRECTED for ch in channels):
        add(rng.choice(_DIRECTED), rng.choice(internal), "o0")
    for _ in range(rng.randint(0, max_extra)):
        kind = rng.choice(_DIRECTED + ("syncdrain", "asyncdrain"))
        if kind in ("syncdrain", "asyncdrain"):
            add(kind, rng.choice(internal + ins), rng.choice(internal))
        else:
            add(kind, rng.choice(internal + ins), rng.choice(internal + outs))
    ports = tuple(
        [C.PortId(ip, C.PORT_IN) for ip in ins] + [C.PortId("o0", C.PORT_OUT)]
    )
    return C.Circuit("rnd", ALPHABET, ports, tuple(channels))


def random_tame_circuit(rng: random.Random, max_branching: int = 4):
    """A random circuit whose compiled automaton branches modestly.

    Depth-6 trace-language comparisons are exponential in the per-state
    branching factor, so circuits above the bound are resampled; the
    draw stays deterministic for a seeded rng.
    """
    from reokit import analysis as AN  # local import to avoid cycles at load

    for _ in range(200):
        c = random_circuit(rng, max_extra=1, max_ins=1)
        auto = A.compile_circuit(c)
        widths = [
            len(AN.expanded_steps(auto, s)) for s in range(auto.n_states)
        ]
        if max(widths, default=0) <= max_branching:
            return c, auto
    raise AssertionError("no tame circuit found in 200 draws")


def circuit_signature(c: C.Circuit):
    """Structure up to channel-id renaming: for isomorphism checks."""

    def params(ch):
        accept = None if ch.accept is None else tuple(sorted(ch.accept))
        return (ch.init, accept, ch.transform)

    return (
        c.alphabet,
        frozenset((p.name, p.kind) for p in c.ports),
        tuple(
            sorted(
                (ch.kind, ch.end_a, ch.end_b, repr(params(ch))) for ch in c.channels
            )
        ),
    )


def brute_product(a: A.ConstraintAutomaton, b: A.ConstraintAutomaton):
    """Definition-faithful product oracle, no reachability pruning.

    Returns (all state pairs, set of ((p,q), sync, guard-key, (p',q'))
    for satisfiable combined transitions, reachable pair set).
    Independent of join(): a plain double loop over the definition.
    """
    pairs = [(p, q) for p in range(a.n_states) for q in range(b.n_states)]
    transitions = set()
    for p, q in pairs:
        for ta in [t for t in a.transitions if t.src == p]:
            if not (ta.sync & b.names):
                transitions.add(((p, q), ta.sync, ta.guard.sort_key(), (ta.dst, q)))
            for tb in [t for t in b.transitions if t.src == q]:
                if ta.sync & b.names == tb.sync & a.names:
                    sync = ta.sync | tb.sync
                    norm = A.project(ta.guard.conj(tb.guard), sync, sync, a.alphabet)
                    if norm is not None:
                        transitions.add(
                            ((p, q), sync, norm.sort_key(), (ta.dst, tb.dst))
                        )
        for tb in [t for t in b.transitions if t.src == q]:
            if not (tb.sync & a.names):
                transitions.add(((p, q), tb.sync, tb.guard.sort_key(), (p, tb.dst)))
    start = (a.initial, b.initial)
    reach = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for pq in frontier:
            for src, _, _, dst in transitions:
                if src == pq and dst not in reach:
                    reach.add(dst)
                    nxt.append(dst)
        frontier = nxt
    return pairs, transitions, reach
