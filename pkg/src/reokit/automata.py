"""Constraint-automata semantics for coordination circuits.

A constraint automaton steps by firing a non-empty set of port names
("sync-set") together under a data constraint. Constraints here are
conjunctions of atoms over a finite alphabet:

    true, d(n)=d(m), d(n)=v, d(n) in S

which is closed under conjunction and, because equality is the only
inter-name atom, also closed under existential elimination of names.
Satisfiability is decided by finite-domain enumeration; no solver.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass

from .circuit import (
    ASYNC_DRAIN,
    FIFO1,
    FILTER,
    LOSSY_SYNC,
    PORT_IN,
    PORT_OUT,
    SYNC,
    SYNC_DRAIN,
    TRANSFORM,
    Channel,
    Circuit,
    InvalidCircuitError,
    Node,
    validate_circuit,
)

EQ = "eq"
CONST = "const"
MEMBER = "in"


class UnknownNameError(ValueError):
    pass


class EmptyNodeError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    """A conjunction of data atoms; the empty conjunction is true.

    Atoms are tuples: ("eq", n, m) with n < m, ("const", n, v), and
    ("in", n, items) with items a sorted tuple.
    """

    atoms: frozenset[tuple]

    def names(self) -> frozenset[str]:
        out = set()
        for atom in self.atoms:
            out.add(atom[1])
            if atom[0] == EQ:
                out.add(atom[2])
        return frozenset(out)

    def holds(self, assignment: dict[str, str]) -> bool:
        for atom in self.atoms:
            tag = atom[0]
            if tag == EQ:
                if assignment[atom[1]] != assignment[atom[2]]:
                    return False
            elif tag == CONST:
                if assignment[atom[1]] != atom[2]:
                    return False
            else:
                if assignment[atom[1]] not in atom[2]:
                    return False
        return True

    def conj(self, other: "Constraint") -> "Constraint":
        return Constraint(self.atoms | other.atoms)

    def sort_key(self) -> tuple:
        return tuple(sorted(self.atoms))

    def pretty(self) -> str:
        if not self.atoms:
            return "true"
        parts = []
        for atom in sorted(self.atoms):
            if atom[0] == EQ:
                parts.append(f"d({atom[1]})=d({atom[2]})")
            elif atom[0] == CONST:
                parts.append(f"d({atom[1]})={atom[2]}")
            else:
                parts.append(f"d({atom[1]}) in {{{','.join(atom[2])}}}")
        return " & ".join(parts)


TRUE = Constraint(frozenset())


def eq(a: str, b: str) -> Constraint:
    if a == b:
        return TRUE
    lo, hi = sorted((a, b))
    return Constraint(frozenset({(EQ, lo, hi)}))


def const(n: str, v: str) -> Constraint:
    return Constraint(frozenset({(CONST, n, v)}))


def member(n: str, items) -> Constraint:
    return Constraint(frozenset({(MEMBER, n, tuple(sorted(items)))}))


def conj(*constraints: Constraint) -> Constraint:
    atoms: frozenset[tuple] = frozenset()
    for c in constraints:
        atoms |= c.atoms
    return Constraint(atoms)


def project(
    g: Constraint, keep: frozenset[str], names: frozenset[str], alphabet: frozenset[str]
) -> Constraint | None:
    """Existentially eliminate every name outside ``keep``.

    Returns the projected constraint in canonical form, or None when ``g``
    is unsatisfiable over ``alphabet``. With ``keep == names`` this is a
    canonicalizer-plus-satisfiability check. Join and hide ask for the
    same few projections over and over, hence the cache.
    """
    return _project_cached(g.atoms, keep, names, alphabet)


@functools.lru_cache(maxsize=1 << 18)
def _project_cached(
    atoms: frozenset, keep: frozenset[str], names: frozenset[str], alphabet: frozenset[str]
) -> Constraint | None:
    g = Constraint(atoms)
    parent: dict[str, str] = {n: n for n in names}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    allowed: dict[str, frozenset[str]] = {n: alphabet for n in names}
    for atom in g.atoms:
        if atom[0] == EQ:
            ra, rb = find(atom[1]), find(atom[2])
            if ra != rb:
                parent[ra] = rb
    for atom in g.atoms:
        if atom[0] == CONST:
            r = find(atom[1])
            allowed[r] = allowed[r] & {atom[2]}
        elif atom[0] == MEMBER:
            r = find(atom[1])
            allowed[r] = allowed[r] & frozenset(atom[2])
    # fold per-member restrictions into class roots
    classes: dict[str, list[str]] = {}
    for n in names:
        classes.setdefault(find(n), []).append(n)
    out = TRUE
    for root, members in classes.items():
        vals = allowed[root]
        if not vals:
            return None
        visible = sorted(m for m in members if m in keep)
        if not visible:
            continue
        for a, b in zip(visible, visible[1:]):
            out = out.conj(eq(a, b))
        if vals != alphabet:
            if len(vals) == 1:
                out = out.conj(const(visible[0], next(iter(vals))))
            else:
                out = out.conj(member(visible[0], vals))
    return out


def sat_assignments(
    g: Constraint, sync: frozenset[str], alphabet: frozenset[str]
) -> list[dict[str, str]]:
    """All total assignments on the sync-set satisfying ``g``, sorted.

    Conjunctions only relate names through equality, so the satisfying
    set factors over equality classes: enumerate one value per class
    from its allowed set instead of the full alphabet^|sync| product.
    """
    extra = g.names() - sync
    if extra:
        raise UnknownNameError(f"constraint names {sorted(extra)} outside sync-set")
    ports = sorted(sync)
    parent = {p: p for p in ports}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for atom in g.atoms:
        if atom[0] == EQ:
            ra, rb = find(atom[1]), find(atom[2])
            if ra != rb:
                parent[ra] = rb
    allowed: dict[str, frozenset[str]] = {p: alphabet for p in ports}
    for atom in g.atoms:
        if atom[0] == CONST:
            r = find(atom[1])
            allowed[r] = allowed[r] & {atom[2]}
        elif atom[0] == MEMBER:
            r = find(atom[1])
            allowed[r] = allowed[r] & frozenset(atom[2])
    roots = sorted({find(p) for p in ports})
    choices = [sorted(allowed[r]) for r in roots]
    if any(not c for c in choices):
        return []
    result = []
    for combo in itertools.product(*choices):
        value = dict(zip(roots, combo))
        result.append({p: value[find(p)] for p in ports})
    result.sort(key=lambda a: tuple(sorted(a.items())))
    return result


@dataclass(frozen=True)
class Transition:
    src: int
    sync: frozenset[str]
    guard: Constraint
    dst: int

    def sort_key(self) -> tuple:
        return (self.src, tuple(sorted(self.sync)), self.guard.sort_key(), self.dst)


@dataclass(frozen=True)
class ConstraintAutomaton:
    """States are dense ints; ``labels[i]`` keeps a debug name for state i."""

    names: frozenset[str]
    labels: tuple[str, ...]
    initial: int
    transitions: tuple[Transition, ...]
    alphabet: frozenset[str]

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def outgoing(self, state: int) -> list[Transition]:
        return [t for t in self.transitions if t.src == state]


def build_automaton(
    names,
    state_labels,
    initial_label,
    transitions,
    alphabet,
) -> ConstraintAutomaton:
    """Assemble an automaton from labeled parts.

    ``transitions`` is an iterable of (src_label, sync, guard, dst_label).
    Guards are canonicalized; unsatisfiable or empty-sync transitions are
    rejected, duplicates collapse, and the result is deterministically
    sorted.
    """
    names = frozenset(names)
    alphabet = frozenset(alphabet)
    labels = tuple(state_labels)
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise ValueError("duplicate state labels")
    canonical: set[Transition] = set()
    for src, sync, guard, dst in transitions:
        sync = frozenset(sync)
        if not sync:
            raise ValueError("transition sync-set may not be empty")
        if not sync <= names:
            raise UnknownNameError(f"sync-set {sorted(sync)} not within {sorted(names)}")
        if not guard.names() <= sync:
            raise UnknownNameError(
                f"guard references {sorted(guard.names() - sync)} outside sync-set"
            )
        norm = project(guard, sync, sync, alphabet)
        if norm is None:
            continue  # unsatisfiable: prune
        canonical.add(Transition(index[src], sync, norm, index[dst]))
    return ConstraintAutomaton(
        names=names,
        labels=labels,
        initial=index[initial_label],
        transitions=tuple(sorted(canonical, key=Transition.sort_key)),
        alphabet=alphabet,
    )


def identity_automaton(alphabet) -> ConstraintAutomaton:
    """The neutral element of join: no names, one state, no transitions."""
    return ConstraintAutomaton(
        names=frozenset(),
        labels=("q",),
        initial=0,
        transitions=(),
        alphabet=frozenset(alphabet),
    )


def ca_of_channel(ch: Channel, alphabet) -> ConstraintAutomaton:
    """The per-primitive automaton over the channel's two end names."""
    alphabet = frozenset(alphabet)
    a, b = ch.name_a, ch.name_b
    one = ["q"]
    if ch.kind == SYNC:
        trans = [("q", {a, b}, eq(a, b), "q")]
        return build_automaton({a, b}, one, "q", trans, alphabet)
    if ch.kind == LOSSY_SYNC:
        trans = [
            ("q", {a, b}, eq(a, b), "q"),
            ("q", {a}, TRUE, "q"),
        ]
        return build_automaton({a, b}, one, "q", trans, alphabet)
    if ch.kind == SYNC_DRAIN:
        return build_automaton({a, b}, one, "q", [("q", {a, b}, TRUE, "q")], alphabet)
    if ch.kind == ASYNC_DRAIN:
        trans = [("q", {a}, TRUE, "q"), ("q", {b}, TRUE, "q")]
        return build_automaton({a, b}, one, "q", trans, alphabet)
    if ch.kind == FILTER:
        accept = frozenset(ch.accept or ())
        trans = [
            ("q", {a, b}, conj(eq(a, b), member(a, accept)), "q"),
            ("q", {a}, member(a, alphabet - accept), "q"),
        ]
        return build_automaton({a, b}, one, "q", trans, alphabet)
    if ch.kind == TRANSFORM:
        f = ch.transform_map()
        trans = [
            ("q", {a, b}, conj(const(a, v), const(b, f[v])), "q")
            for v in sorted(alphabet)
        ]
        return build_automaton({a, b}, one, "q", trans, alphabet)
    if ch.kind == FIFO1:
        states = ["empty"] + [f"full({v})" for v in sorted(alphabet)]
        trans = []
        for v in sorted(alphabet):
            trans.append(("empty", {a}, const(a, v), f"full({v})"))
            trans.append((f"full({v})", {b}, const(b, v), "empty"))
        init = f"full({ch.init})" if ch.init is not None else "empty"
        return build_automaton({a, b}, states, init, trans, alphabet)
    raise ValueError(f"unknown channel kind {ch.kind!r}")


def ca_of_node(node: Node, alphabet) -> ConstraintAutomaton:
    """Merger-replicator behavior: one transition per input source, firing
    that input synchronously with every output, all carrying equal data."""
    inputs = sorted(node.incoming)
    outputs = sorted(node.outgoing)
    if node.port is not None:
        if node.port.kind == PORT_IN:
            inputs.append(node.port.name)
        elif node.port.kind == PORT_OUT:
            outputs.append(node.port.name)
    if not inputs and not outputs:
        raise EmptyNodeError(f"node {node.name} has no channel ends and no port")
    names = frozenset(inputs) | frozenset(outputs)
    trans = []
    for i in sorted(inputs):
        sync = {i, *outputs}
        guard = conj(*(eq(i, o) for o in outputs))
        trans.append(("q", sync, guard, "q"))
    return build_automaton(names, ["q"], "q", trans, frozenset(alphabet))


def join(a: ConstraintAutomaton, b: ConstraintAutomaton) -> ConstraintAutomaton:
    """Synchronized product: shared names fire together.

    Two transitions combine when they agree on the other side's names
    (N1 & B.names == N2 & A.names); a transition whose sync-set avoids the
    other automaton's names entirely may also fire alone. Only state pairs
    reachable from the joint initial are kept.
    """
    if a.alphabet != b.alphabet:
        raise ValueError("join requires a common alphabet")
    names = a.names | b.names
    a_out = {s: [] for s in range(a.n_states)}
    for t in a.transitions:
        a_out[t.src].append(t)
    b_out = {s: [] for s in range(b.n_states)}
    for t in b.transitions:
        b_out[t.src].append(t)

    # group B's transitions by their footprint on A's names, so each A
    # transition only meets compatible partners
    b_by_shared: dict[int, dict[frozenset, list[Transition]]] = {}
    for q in range(b.n_states):
        groups: dict[frozenset, list[Transition]] = {}
        for tb in b_out[q]:
            groups.setdefault(tb.sync & a.names, []).append(tb)
        b_by_shared[q] = groups

    start = (a.initial, b.initial)
    order: list[tuple[int, int]] = [start]
    seen = {start}
    raw: list[tuple[tuple[int, int], frozenset, Constraint, tuple[int, int]]] = []
    frontier = [start]
    while frontier:
        nxt: list[tuple[int, int]] = []
        for p, q in frontier:
            candidates = []
            for ta in a_out[p]:
                shared = ta.sync & b.names
                if not shared:
                    candidates.append((ta.sync, ta.guard, (ta.dst, q)))
                for tb in b_by_shared[q].get(shared, ()):
                    candidates.append(
                        (ta.sync | tb.sync, ta.guard.conj(tb.guard), (ta.dst, tb.dst))
                    )
            for tb in b_by_shared[q].get(frozenset(), ()):
                candidates.append((tb.sync, tb.guard, (p, tb.dst)))
            for sync, guard, dst in candidates:
                norm = project(guard, sync, sync, a.alphabet)
                if norm is None:
                    continue
                raw.append(((p, q), sync, norm, dst))
                if dst not in seen:
                    seen.add(dst)
                    nxt.append(dst)
        nxt.sort()
        order.extend(nxt)
        frontier = nxt

    labels = tuple(f"{a.labels[p]}|{b.labels[q]}" for p, q in order)
    index = {pq: i for i, pq in enumerate(order)}
    transitions = {
        Transition(index[src], sync, guard, index[dst])
        for src, sync, guard, dst in raw
        if dst in index
    }
    return ConstraintAutomaton(
        names=names,
        labels=labels,
        initial=0,
        transitions=tuple(sorted(transitions, key=Transition.sort_key)),
        alphabet=a.alphabet,
    )


def hide(a: ConstraintAutomaton, hidden) -> ConstraintAutomaton:
    """Drop ``hidden`` names from observability.

    Constraints are existentially eliminated over the hidden names;
    transitions whose sync-set empties become internal moves and are
    collapsed by epsilon-closure into their successors. Unreachable
    states are pruned and the rest re-indexed.
    """
    hidden = frozenset(hidden)
    if not hidden <= a.names:
        raise UnknownNameError(
            f"cannot hide {sorted(hidden - a.names)}: not names of the automaton"
        )
    keep = a.names - hidden
    observable: dict[int, list[tuple[frozenset, Constraint, int]]] = {
        s: [] for s in range(a.n_states)
    }
    silent: dict[int, set[int]] = {s: set() for s in range(a.n_states)}
    for t in a.transitions:
        sync = t.sync - hidden
        guard = project(t.guard, sync, t.sync, a.alphabet)
        if guard is None:
            continue
        if sync:
            observable[t.src].append((sync, guard, t.dst))
        else:
            silent[t.src].add(t.dst)

    def closure(state: int) -> list[int]:
        out = {state}
        stack = [state]
        while stack:
            s = stack.pop()
            for nxt in silent[s]:
                if nxt not in out:
                    out.add(nxt)
                    stack.append(nxt)
        return sorted(out)

    merged: dict[int, set[tuple[frozenset, Constraint, int]]] = {}
    for s in range(a.n_states):
        steps: set[tuple[frozenset, Constraint, int]] = set()
        for c in closure(s):
            steps.update(observable[c])
        merged[s] = steps

    order = [a.initial]
    seen = {a.initial}
    frontier = [a.initial]
    while frontier:
        nxt = []
        for s in frontier:
            for _, _, dst in sorted(merged[s], key=lambda e: (tuple(sorted(e[0])), e[2])):
                if dst not in seen:
                    seen.add(dst)
                    nxt.append(dst)
        nxt.sort()
        order.extend(nxt)
        frontier = nxt

    index = {s: i for i, s in enumerate(order)}
    transitions = {
        Transition(index[s], sync, guard, index[dst])
        for s in order
        for sync, guard, dst in merged[s]
        if dst in index
    }
    return ConstraintAutomaton(
        names=keep,
        labels=tuple(a.labels[s] for s in order),
        initial=0,
        transitions=tuple(sorted(transitions, key=Transition.sort_key)),
        alphabet=a.alphabet,
    )


def circuit_automata(c: Circuit) -> list[tuple[str, ConstraintAutomaton]]:
    """Per-primitive automata for every channel and node, keyed for ordering."""
    autos: list[tuple[str, ConstraintAutomaton]] = []
    for ch in c.channels:
        autos.append((f"ch:{ch.id}", ca_of_channel(ch, c.alphabet)))
    for node in c.nodes():
        autos.append((f"nd:{node.name}", ca_of_node(node, c.alphabet)))
    return autos


def _flow_order(c: Circuit) -> list[str]:
    """Interleave nodes with their channels, breadth-first along the flow.

    Starting from the boundary-in ports in declaration order keeps data
    restrictions (filters, fifo contents) in the product early, so the
    intermediate state spaces stay close to the final reachable one.
    Channels are visited in id order at each node.
    """
    nodes = {n.name: n for n in c.nodes()}
    by_end: dict[str, list[Channel]] = {}
    for ch in c.channels:
        by_end.setdefault(ch.end_a, []).append(ch)
        by_end.setdefault(ch.end_b, []).append(ch)
    starts = [p.name for p in c.ports if p.kind == PORT_IN]
    remaining = set(nodes)
    order: list[str] = []
    added_channels: set[str] = set()
    queue: list[str] = []
    while remaining:
        if not queue:
            seed = next((s for s in starts if s in remaining), min(remaining))
            queue.append(seed)
            remaining.discard(seed)
        name = queue.pop(0)
        order.append(f"nd:{name}")
        for ch in sorted(by_end.get(name, ()), key=lambda ch: ch.id):
            if ch.id not in added_channels:
                added_channels.add(ch.id)
                order.append(f"ch:{ch.id}")
            for other in (ch.end_a, ch.end_b):
                if other in remaining:
                    remaining.discard(other)
                    queue.append(other)
    return order


def join_many(
    autos: list[tuple[str, ConstraintAutomaton]],
    order: list[str] | None = None,
    keep_names: frozenset[str] | None = None,
) -> ConstraintAutomaton:
    """Fold join over the automata, compacting labels after each step.

    With ``keep_names`` given, names outside it are hidden as soon as no
    pending automaton mentions them (hide-early); this is behavior-
    preserving because a name shared with nothing can never synchronize
    again, and it keeps intermediate products small.
    """
    if not autos:
        raise ValueError("nothing to join")
    pool = dict(autos)
    if order is None:
        order = [key for key, _ in autos]
    full_order = list(order) + sorted(k for k in pool if k not in set(order))
    uses: dict[str, int] = {}
    for _, auto in autos:
        for name in auto.names:
            uses[name] = uses.get(name, 0) + 1
    result: ConstraintAutomaton | None = None
    for key in full_order:
        nxt = pool.pop(key)
        result = nxt if result is None else _compact(join(result, nxt))
        for name in nxt.names:
            uses[name] -= 1
        if keep_names is not None:
            done = frozenset(
                n for n in result.names if uses[n] == 0 and n not in keep_names
            )
            if done:
                result = _compact(hide(result, done))
    return result


def _compact(a: ConstraintAutomaton) -> ConstraintAutomaton:
    """Shorten state labels to dense indices (pair labels grow fast)."""
    return ConstraintAutomaton(
        names=a.names,
        labels=tuple(str(i) for i in range(a.n_states)),
        initial=a.initial,
        transitions=a.transitions,
        alphabet=a.alphabet,
    )


def compile_circuit(c: Circuit) -> ConstraintAutomaton:
    """Full pipeline: join every primitive automaton, then hide internals.

    The result's names are exactly the declared boundary ports; states are
    relabeled s0..sN in discovery order.
    """
    report = validate_circuit(c)
    if not report.ok:
        raise InvalidCircuitError(report)
    autos = circuit_automata(c)
    if not autos:
        return identity_automaton(c.alphabet)
    port_names = frozenset(p.name for p in c.ports)
    joined = join_many(autos, _flow_order(c), keep_names=port_names)
    result = hide(joined, joined.names - port_names)
    return ConstraintAutomaton(
        names=result.names,
        labels=tuple(f"s{i}" for i in range(result.n_states)),
        initial=result.initial,
        transitions=result.transitions,
        alphabet=result.alphabet,
    )


def automaton_to_json(a: ConstraintAutomaton) -> str:
    doc = {
        "names": sorted(a.names),
        "states": list(a.labels),
        "initial": a.initial,
        "transitions": [
            {
                "from": t.src,
                "sync": sorted(t.sync),
                "constraint": t.guard.pretty(),
                "to": t.dst,
            }
            for t in a.transitions
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def automaton_to_dot(a: ConstraintAutomaton) -> str:
    def q(s: str) -> str:
        return '"' + s.replace('"', '\\"') + '"'

    out = ["digraph automaton {", "  rankdir=LR;"]
    out.append('  __start [shape=none label=""];')
    for i, label in enumerate(a.labels):
        out.append(f"  {q(f's{i}')} [label={q(label)} shape=circle];")
    out.append(f"  __start -> {q(f's{a.initial}')};")
    for t in a.transitions:
        label = "{" + ",".join(sorted(t.sync)) + "} " + t.guard.pretty()
        out.append(f"  {q(f's{t.src}')} -> {q(f's{t.dst}')} [label={q(label)}];")
    out.append("}")
    return "\n".join(out) + "\n"
