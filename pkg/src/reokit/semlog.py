"""Semantic-logic compliance engine.

Facts are ground terms over a small modal vocabulary: permission P,
intensity Very, the statuses Forbidden / Warning / Failure / Resolved /
DoubleCheck, occurrence counters (k)A, and reified implications (A=>B).
Events stream in one occurrence at a time; occurrence counting and
event-implication rules run at ingest, everything else saturates to a
least fixpoint afterwards.

Two counting rules are engine built-ins rather than rulebase patterns:
set-based fact storage cannot observe "A AND A", so "A => (1)A" and
"A AND (I)A => (I+1)A" are applied per ingested occurrence instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

P_OP = "P"
VERY_OP = "Very"
FORBIDDEN_OP = "Forbidden"
WARNING_OP = "Warning"
FAILURE_OP = "Failure"
RESOLVED_OP = "Resolved"
DOUBLECHECK_OP = "DoubleCheck"

UNARY_OPS = (
    P_OP,
    VERY_OP,
    FORBIDDEN_OP,
    WARNING_OP,
    FAILURE_OP,
    RESOLVED_OP,
    DOUBLECHECK_OP,
)

# Heads that denote a state or judgement rather than an occurrence; terms
# headed by these never feed occurrence counting.
STATUS_OPS = frozenset(UNARY_OPS) - {VERY_OP}

BUILTIN_RULE_NAMES = ("r10", "r11")

ORIGIN_SCRIPT = "script"
ORIGIN_TRACE = "trace-mapped"
ORIGIN_DERIVED = "derived-event"

_CASCADE_LIMIT = 1000


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Atom(Term):
    name: str


@dataclass(frozen=True)
class Var(Term):
    """A pattern variable; never appears in stored facts."""

    name: str


@dataclass(frozen=True)
class Op(Term):
    op: str
    arg: Term


@dataclass(frozen=True)
class Count(Term):
    index: object  # int >= 1, or Var in rule patterns
    arg: Term


@dataclass(frozen=True)
class Implies(Term):
    lhs: Term
    rhs: Term


def P(t: Term) -> Term:
    return Op(P_OP, t)


def Very(t: Term) -> Term:
    return Op(VERY_OP, t)


def Forbidden(t: Term) -> Term:
    return Op(FORBIDDEN_OP, t)


def Warning(t: Term) -> Term:
    return Op(WARNING_OP, t)


def Failure(t: Term) -> Term:
    return Op(FAILURE_OP, t)


def Resolved(t: Term) -> Term:
    return Op(RESOLVED_OP, t)


def DoubleCheck(t: Term) -> Term:
    return Op(DOUBLECHECK_OP, t)


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Atom):
        return True
    if isinstance(t, Op):
        return is_ground(t.arg)
    if isinstance(t, Count):
        return isinstance(t.index, int) and is_ground(t.arg)
    if isinstance(t, Implies):
        return is_ground(t.lhs) and is_ground(t.rhs)
    raise TypeError(t)


def depth(t: Term) -> int:
    if isinstance(t, (Atom, Var)):
        return 1
    if isinstance(t, Op):
        return 1 + depth(t.arg)
    if isinstance(t, Count):
        return 1 + depth(t.arg)
    if isinstance(t, Implies):
        return 1 + max(depth(t.lhs), depth(t.rhs))
    raise TypeError(t)


_OP_RANK = {op: i + 1 for i, op in enumerate(UNARY_OPS)}


def term_key(t: Term) -> tuple:
    """Total structural ordering: operator rank, then payload, then children."""
    if isinstance(t, Atom):
        return (0, t.name, ())
    if isinstance(t, Op):
        return (_OP_RANK[t.op], "", (term_key(t.arg),))
    if isinstance(t, Count):
        if isinstance(t.index, int):
            payload = f"{t.index:09d}"
        else:
            payload = "~" + t.index.name
        return (8, payload, (term_key(t.arg),))
    if isinstance(t, Implies):
        return (9, "", (term_key(t.lhs), term_key(t.rhs)))
    if isinstance(t, Var):
        return (10, t.name, ())
    raise TypeError(t)


def pretty(t: Term) -> str:
    if isinstance(t, Atom):
        return t.name
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Op):
        if t.op == VERY_OP:
            return f"(Very){pretty(t.arg)}"
        return f"{t.op}({pretty(t.arg)})"
    if isinstance(t, Count):
        idx = t.index if isinstance(t.index, int) else t.index.name
        return f"({idx}){pretty(t.arg)}"
    if isinstance(t, Implies):
        return f"({pretty(t.lhs)}=>{pretty(t.rhs)})"
    raise TypeError(t)


def variables(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Atom):
        return set()
    if isinstance(t, Op):
        return variables(t.arg)
    if isinstance(t, Count):
        out = variables(t.arg)
        if isinstance(t.index, Var):
            out.add(t.index.name)
        return out
    if isinstance(t, Implies):
        return variables(t.lhs) | variables(t.rhs)
    raise TypeError(t)


def match(pattern: Term, term: Term, binding: dict) -> dict | None:
    """Extend ``binding`` so that pattern matches term, or return None.

    Bindings map variable names to Terms, or to ints for count indices.
    """
    if isinstance(pattern, Var):
        bound = binding.get(pattern.name)
        if bound is None:
            out = dict(binding)
            out[pattern.name] = term
            return out
        return binding if bound == term else None
    if isinstance(pattern, Atom):
        return binding if pattern == term else None
    if isinstance(pattern, Op):
        if isinstance(term, Op) and term.op == pattern.op:
            return match(pattern.arg, term.arg, binding)
        return None
    if isinstance(pattern, Count):
        if not isinstance(term, Count):
            return None
        if isinstance(pattern.index, Var):
            bound = binding.get(pattern.index.name)
            if bound is None:
                binding = dict(binding)
                binding[pattern.index.name] = term.index
            elif bound != term.index:
                return None
        elif pattern.index != term.index:
            return None
        return match(pattern.arg, term.arg, binding)
    if isinstance(pattern, Implies):
        if not isinstance(term, Implies):
            return None
        b = match(pattern.lhs, term.lhs, binding)
        if b is None:
            return None
        return match(pattern.rhs, term.rhs, b)
    raise TypeError(pattern)


def substitute(pattern: Term, binding: dict) -> Term:
    if isinstance(pattern, Var):
        value = binding[pattern.name]
        if not isinstance(value, Term):
            raise ValueError(f"variable {pattern.name} bound to count {value!r}")
        return value
    if isinstance(pattern, Atom):
        return pattern
    if isinstance(pattern, Op):
        return Op(pattern.op, substitute(pattern.arg, binding))
    if isinstance(pattern, Count):
        idx = pattern.index
        if isinstance(idx, Var):
            idx = binding[idx.name]
        return Count(idx, substitute(pattern.arg, binding))
    if isinstance(pattern, Implies):
        return Implies(substitute(pattern.lhs, binding), substitute(pattern.rhs, binding))
    raise TypeError(pattern)


def event_like(t: Term) -> bool:
    """Occurrence-shaped terms: atoms and intensity-modified terms.

    Status-headed terms (P, Forbidden, ...), counters, and implications
    denote states, so they are stored as facts but never counted.
    """
    return isinstance(t, Atom) or (isinstance(t, Op) and t.op == VERY_OP)


def _event_shaped_pattern(t: Term) -> bool:
    if isinstance(t, (Atom, Var)):
        return True
    if isinstance(t, Op) and t.op == VERY_OP:
        return _event_shaped_pattern(t.arg)
    return False


EVENT_IMPLICATION = "event-implication"
FACT_RULE = "fact-rule"

# Conclusions under these heads are judgements; a rule producing one is
# a fact-rule no matter how its premise is shaped.
_DIAGNOSTIC_OPS = frozenset({WARNING_OP, FAILURE_OP, RESOLVED_OP})


@dataclass(frozen=True)
class Guard:
    """The form ``I > bound`` over a count variable."""

    var: str
    bound: int


@dataclass(frozen=True)
class Rule:
    name: str
    premises: tuple[Term, ...]
    guards: tuple[Guard, ...]
    conclusion: Term

    @property
    def rule_class(self) -> str:
        if (
            len(self.premises) == 1
            and not self.guards
            and _event_shaped_pattern(self.premises[0])
            and not (
                isinstance(self.conclusion, Op)
                and self.conclusion.op in _DIAGNOSTIC_OPS
            )
        ):
            return EVENT_IMPLICATION
        return FACT_RULE


@dataclass(frozen=True)
class StandingFact:
    name: str | None
    term: Term


@dataclass(frozen=True)
class RuleBase:
    orders: tuple[tuple[str, ...], ...] = ()
    facts: tuple[StandingFact, ...] = ()
    rules: tuple[Rule, ...] = ()

    @property
    def declaration_count(self) -> int:
        return len(self.orders) + len(self.facts) + len(self.rules)

    @property
    def builtin_count(self) -> int:
        return len(BUILTIN_RULE_NAMES)

    @property
    def total_rule_count(self) -> int:
        return self.declaration_count + self.builtin_count

    def event_implications(self) -> list[Rule]:
        return [r for r in self.rules if r.rule_class == EVENT_IMPLICATION]

    def fact_rules(self) -> list[Rule]:
        return [r for r in self.rules if r.rule_class == FACT_RULE]


@dataclass(frozen=True)
class Event:
    index: int
    term: Term
    origin: str


@dataclass(frozen=True)
class Derivation:
    rule: str
    premises: tuple[Term, ...]
    depth: int


@dataclass
class SaturationResult:
    facts: list[Term]
    converged: bool
    passes: int
    diagnostics: list[str]


@dataclass(frozen=True)
class OrderViolation:
    order: tuple[str, ...]
    index: int
    atom: str
    expected: tuple[str, ...]


@dataclass
class Verdict:
    failures: list[tuple[Term, Derivation]]
    warnings: list[tuple[Term, Derivation]]
    resolved: list[tuple[Term, Derivation]]
    order_violations: list[OrderViolation]
    facts_total: int

    @property
    def clean(self) -> bool:
        return not (self.failures or self.warnings or self.order_violations)

    def resolved_warnings(self) -> list[Term]:
        """The Warning(...) terms that carry a matching Resolved fact."""
        return [t for t, _ in self.resolved]

    def to_dict(self) -> dict:
        resolved_terms = {pretty(t) for t in self.resolved_warnings()}
        return {
            "failures": [pretty(t) for t, _ in self.failures],
            "warnings": [
                {"term": pretty(t), "resolved": pretty(t) in resolved_terms}
                for t, _ in self.warnings
            ],
            "resolved": sorted(resolved_terms),
            "order_violations": [
                {
                    "order": " >> ".join(v.order),
                    "index": v.index,
                    "atom": v.atom,
                    "expected": list(v.expected),
                }
                for v in self.order_violations
            ],
            "facts_total": self.facts_total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _warned(t: Term) -> Term:
    return t.arg if isinstance(t, Op) and t.op == WARNING_OP else t


@dataclass
class DerivationNode:
    term: Term
    rule: str
    children: list["DerivationNode"]

    def render(self, indent: int = 0) -> str:
        pad = "  " * indent
        lines = [f"{pad}{pretty(self.term)}  [{self.rule}]"]
        for child in self.children:
            lines.append(child.render(indent + 1))
        return "\n".join(lines)


class NotConvergedError(RuntimeError):
    pass


class UnknownFactError(KeyError):
    pass


def check_sequence(
    events: list[Event], orders: tuple[tuple[str, ...], ...]
) -> list[OrderViolation]:
    """Prefix-discipline check of declared atom orderings.

    Restricted to each order's atoms, an occurrence is legal only when
    every predecessor atom has occurred at least once before it. Every
    occurrence, legal or not, counts as seen afterwards.
    """
    violations = []
    for order in orders:
        positions = {a: i for i, a in enumerate(order)}
        seen: set[str] = set()
        for ev in events:
            if not isinstance(ev.term, Atom) or ev.term.name not in positions:
                continue
            i = positions[ev.term.name]
            if any(a not in seen for a in order[:i]):
                expected = tuple(
                    a
                    for j, a in enumerate(order)
                    if all(p in seen for p in order[:j])
                )
                violations.append(
                    OrderViolation(order, ev.index, ev.term.name, expected)
                )
            seen.add(ev.term.name)
    return violations


class ComplianceEngine:
    """Single-writer fact store with ingest-time counting and saturation."""

    def __init__(self, rulebase: RuleBase, max_depth: int = 8, max_iterations: int = 10000):
        for rule in rulebase.rules:
            if rule.name in BUILTIN_RULE_NAMES:
                raise ValueError(
                    f"rule {rule.name} shadows a built-in counting rule"
                )
        self.rulebase = rulebase
        self.max_depth = max_depth
        self.max_iterations = max_iterations
        self.facts: set[Term] = set()
        self.derivations: dict[Term, Derivation] = {}
        self.events: list[Event] = []
        self.diagnostics: list[str] = []
        self._counts: dict[Term, int] = {}
        self._converged = True
        for sf in rulebase.facts:
            label = f"standing fact {sf.name}" if sf.name else "standing fact"
            self._add_fact(sf.term, Derivation(label, (), 0), set())
        for rule in rulebase.event_implications():
            if is_ground(rule.premises[0]) and is_ground(rule.conclusion):
                self._add_fact(
                    Implies(rule.premises[0], rule.conclusion),
                    Derivation(f"reified {rule.name}", (), 0),
                    set(),
                )

    # -- ingest -----------------------------------------------------------

    def ingest(self, item, origin: str = ORIGIN_SCRIPT) -> set[Term]:
        """Record one event occurrence; returns the facts it introduced.

        Event-implication rules run here: occurrence-shaped conclusions
        become derived events (queued, counted), deontic ones plain
        facts. A worklist bounds runaway implication cycles.
        """
        term = item.term if isinstance(item, Event) else item
        if not is_ground(term):
            raise ValueError(f"events must be ground terms: {pretty(term)}")
        new: set[Term] = set()
        queue: list[tuple[Term, str, tuple | None]] = [(term, origin, None)]
        processed = 0
        while queue:
            current, current_origin, via = queue.pop(0)
            processed += 1
            if processed > _CASCADE_LIMIT:
                self._diag(f"EVENT_CASCADE_LIMIT: dropped {pretty(current)}")
                break
            self._ingest_one(current, current_origin, via, new, queue)
        self._converged = False
        return new

    def _ingest_one(self, term, origin, via, new, queue):
        if depth(term) > self.max_depth:
            self._diag(f"DEPTH_LIMIT: dropped event {pretty(term)}")
            return
        event = Event(len(self.events) + 1, term, origin)
        self.events.append(event)
        if via is None:
            derivation = Derivation(f"event #{event.index}", (), 0)
        else:
            rule_name, premise = via
            derivation = Derivation(rule_name, (premise,), self._depth_after(premise))
        self._add_fact(term, derivation, new)
        if event_like(term):
            k = self._counts.get(term, 0) + 1
            self._counts[term] = k
            count_fact = Count(k, term)
            if depth(count_fact) > self.max_depth:
                self._diag(f"DEPTH_LIMIT: dropped {pretty(count_fact)}")
            else:
                premises = (term,) if k == 1 else (term, Count(k - 1, term))
                name = "r11" if k == 1 else "r10"
                self._add_fact(
                    count_fact,
                    Derivation(name, premises, self._depth_after(*premises)),
                    new,
                )
        for rule in self.rulebase.event_implications():
            binding = match(rule.premises[0], term, {})
            if binding is None:
                continue
            conclusion = substitute(rule.conclusion, binding)
            if event_like(conclusion):
                queue.append((conclusion, ORIGIN_DERIVED, (rule.name, term)))
            elif depth(conclusion) > self.max_depth:
                self._diag(f"DEPTH_LIMIT: dropped {pretty(conclusion)}")
            else:
                self._add_fact(
                    conclusion,
                    Derivation(rule.name, (term,), self._depth_after(term)),
                    new,
                )

    def add_fact(self, term: Term, label: str = "asserted") -> bool:
        """Directly assert a ground fact (no event, no counting)."""
        if not is_ground(term):
            raise ValueError("facts must be ground")
        new: set[Term] = set()
        self._add_fact(term, Derivation(label, (), 0), new)
        if new:
            self._converged = False
        return bool(new)

    def _add_fact(self, term, derivation, new) -> None:
        if term in self.facts:
            return
        self.facts.add(term)
        self.derivations[term] = derivation
        new.add(term)

    def _depth_after(self, *premises: Term) -> int:
        return 1 + max(
            (self.derivations[p].depth for p in premises if p in self.derivations),
            default=0,
        )

    def _diag(self, message: str) -> None:
        if message not in self.diagnostics:
            self.diagnostics.append(message)

    # -- saturation -------------------------------------------------------

    def saturate(self) -> SaturationResult:
        """Apply fact-rules to a least fixpoint, deterministically."""
        rules = self.rulebase.fact_rules()
        passes = 0
        converged = False
        while passes < self.max_iterations:
            passes += 1
            added = self._pass(rules)
            if not added:
                converged = True
                break
        if not converged:
            self._diag(f"NOT_CONVERGED: no fixpoint within {self.max_iterations} passes")
        self._converged = converged
        return SaturationResult(
            facts=sorted(self.facts, key=term_key),
            converged=converged,
            passes=passes,
            diagnostics=list(self.diagnostics),
        )

    def _pass(self, rules) -> bool:
        by_tag: dict = {}
        for fact in sorted(self.facts, key=term_key):
            by_tag.setdefault(self._tag(fact), []).append(fact)
        pending: list[tuple[Term, Derivation]] = []
        for rule in rules:
            for binding in self._bindings(rule.premises, {}, by_tag):
                if not all(self._guard_ok(g, binding) for g in rule.guards):
                    continue
                conclusion = substitute(rule.conclusion, binding)
                if conclusion in self.facts:
                    continue
                if depth(conclusion) > self.max_depth:
                    self._diag(f"DEPTH_LIMIT: dropped {pretty(conclusion)}")
                    continue
                premises = tuple(
                    substitute(p, binding) for p in rule.premises
                )
                pending.append(
                    (conclusion, Derivation(rule.name, premises, self._depth_after(*premises)))
                )
        added = False
        new: set[Term] = set()
        for conclusion, derivation in pending:
            before = len(self.facts)
            self._add_fact(conclusion, derivation, new)
            added = added or len(self.facts) > before
        return added

    @staticmethod
    def _tag(t: Term):
        if isinstance(t, Atom):
            return ("atom", t.name)
        if isinstance(t, Op):
            return ("op", t.op)
        if isinstance(t, Count):
            return ("count",)
        if isinstance(t, Implies):
            return ("implies",)
        raise TypeError(t)

    def _candidates(self, pattern: Term, by_tag) -> list[Term]:
        if isinstance(pattern, Var):
            return sorted(self.facts, key=term_key)
        if isinstance(pattern, Atom):
            return by_tag.get(("atom", pattern.name), [])
        if isinstance(pattern, Op):
            return by_tag.get(("op", pattern.op), [])
        if isinstance(pattern, Count):
            return by_tag.get(("count",), [])
        if isinstance(pattern, Implies):
            return by_tag.get(("implies",), [])
        raise TypeError(pattern)

    def _bindings(self, premises, binding, by_tag):
        if not premises:
            yield binding
            return
        head, rest = premises[0], premises[1:]
        for fact in self._candidates(head, by_tag):
            extended = match(head, fact, binding)
            if extended is not None:
                yield from self._bindings(rest, extended, by_tag)

    @staticmethod
    def _guard_ok(guard: Guard, binding: dict) -> bool:
        value = binding.get(guard.var)
        return isinstance(value, int) and value > guard.bound

    # -- reporting --------------------------------------------------------

    def verdict(self) -> Verdict:
        """Saturate if needed, then collect judgements with provenance."""
        if not self._converged:
            result = self.saturate()
            if not result.converged:
                raise NotConvergedError(
                    f"saturation did not converge within {self.max_iterations} passes"
                )
        failures = []
        warnings = []
        resolved = []
        for fact in sorted(self.facts, key=term_key):
            if not isinstance(fact, Op):
                continue
            item = (fact, self.derivations[fact])
            if fact.op == FAILURE_OP:
                failures.append(item)
            elif fact.op == WARNING_OP:
                warnings.append(item)
            elif fact.op == RESOLVED_OP:
                # store the warned Warning(...) term, provenance of the Resolved fact
                resolved.append((fact.arg, self.derivations[fact]))
        return Verdict(
            failures=failures,
            warnings=warnings,
            resolved=resolved,
            order_violations=check_sequence(self.events, self.rulebase.orders),
            facts_total=len(self.facts),
        )

    def explain(self, fact: Term) -> DerivationNode:
        if fact not in self.facts:
            raise UnknownFactError(pretty(fact))
        derivation = self.derivations[fact]
        children = [self.explain(p) for p in derivation.premises if p in self.facts]
        return DerivationNode(fact, derivation.rule, children)

    def sorted_facts(self) -> list[Term]:
        return sorted(self.facts, key=term_key)

    def max_count(self, term: Term) -> int:
        return self._counts.get(term, 0)
