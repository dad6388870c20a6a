"""Parsers and printers for the textual input formats.

Four languages plus one table: the circuit DSL, the rule DSL, event
scripts (one ground term per line), environment scripts (per-round
offers and readiness), and the event map (boundary firing -> atom).
All share one tokenizer; ``#`` comments run to end of line and
whitespace is insignificant except in the line-oriented formats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import semlog
from .circuit import (
    CHANNEL_KINDS,
    FIFO1,
    FILTER,
    PORT_IN,
    PORT_OUT,
    TRANSFORM,
    Channel,
    Circuit,
    PortId,
)
from .semlog import (
    Atom,
    Count,
    Guard,
    Implies,
    Op,
    Rule,
    RuleBase,
    StandingFact,
    Term,
    Var,
    VERY_OP,
)
from .sim import POLICY_ALL_READY, POLICY_CLOSED, EnvScript, Round


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    code: str
    message: str
    expected: frozenset[str] = frozenset()

    def render(self) -> str:
        return f"{self.span}: {self.code}: {self.message}"


class ParseFailure(Exception):
    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("; ".join(e.render() for e in errors))


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "sym" | "eof"
    text: str
    span: SourceSpan


_SYMBOLS = ("=>", "->", ">>", "{", "}", "(", ")", ",", ";", ":", "=", ">")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")


def _lex(text: str, first_line: int = 1) -> list[Token]:
    tokens: list[Token] = []
    line = first_line
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), SourceSpan(line, col, len(m.group()))))
            col += len(m.group())
            i = m.end()
            continue
        m = _INT_RE.match(text, i)
        if m:
            tokens.append(Token("int", m.group(), SourceSpan(line, col, len(m.group()))))
            col += len(m.group())
            i = m.end()
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("sym", sym, SourceSpan(line, col, len(sym))))
                col += len(sym)
                i += len(sym)
                break
        else:
            raise ParseFailure(
                [
                    ParseError(
                        SourceSpan(line, col, 1),
                        "LEX_ERROR",
                        f"unknown character {ch!r}",
                    )
                ]
            )
    tokens.append(Token("eof", "end of input", SourceSpan(line, col, 1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_sym(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "sym" and tok.text == text

    def at_ident(self, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and (text is None or tok.text == text)

    def fail(self, code: str, message: str, expected=()) -> "ParseFailure":
        tok = self.peek()
        return ParseFailure(
            [ParseError(tok.span, code, f"{message}, found {tok.text!r}", frozenset(expected))]
        )

    def fail_at(self, tok: Token, code: str, message: str) -> "ParseFailure":
        return ParseFailure([ParseError(tok.span, code, message)])

    def expect_sym(self, text: str) -> Token:
        if not self.at_sym(text):
            raise self.fail("SYNTAX", f"expected {text!r}", {text})
        return self.next()

    def expect_ident(self, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or (text is not None and tok.text != text):
            what = repr(text) if text else "identifier"
            raise self.fail("SYNTAX", f"expected {what}", {text or "identifier"})
        return self.next()

    def expect_int(self) -> Token:
        if self.peek().kind != "int":
            raise self.fail("SYNTAX", "expected integer", {"integer"})
        return self.next()

    def expect_eof(self) -> None:
        if self.peek().kind != "eof":
            raise self.fail("SYNTAX", "expected end of input", {"end of input"})


# --------------------------------------------------------------------------
# circuit DSL


class _CircuitParser(_Parser):
    def parse(self) -> Circuit:
        self.expect_ident("circuit")
        name = self.expect_ident().text
        self.expect_sym("{")
        alphabet = self._data_block()
        ports = self._ports_block()
        channels = []
        while not self.at_sym("}"):
            channels.append(self._channel(len(channels) + 1, alphabet))
        self.expect_sym("}")
        self.expect_eof()
        return Circuit(
            name=name,
            alphabet=frozenset(alphabet),
            ports=tuple(ports),
            channels=tuple(channels),
        )

    def _data_block(self) -> list[str]:
        self.expect_ident("data")
        self.expect_sym("{")
        items = [self.expect_ident().text]
        while self.at_sym(","):
            self.next()
            items.append(self.expect_ident().text)
        self.expect_sym("}")
        return items

    def _ports_block(self) -> list[PortId]:
        self.expect_ident("ports")
        self.expect_sym("{")
        ports: list[PortId] = []
        seen: set[str] = set()
        while not self.at_sym("}"):
            tok = self.peek()
            if tok.kind == "ident" and tok.text in ("in", "out"):
                kind = PORT_IN if self.next().text == "in" else PORT_OUT
            else:
                raise self.fail("SYNTAX", "expected 'in' or 'out'", {"in", "out"})
            name_tok = self.expect_ident()
            if name_tok.text in seen:
                raise self.fail_at(
                    name_tok, "DUPLICATE_PORT", f"port {name_tok.text!r} declared twice"
                )
            seen.add(name_tok.text)
            ports.append(PortId(name_tok.text, kind))
            self.expect_sym(";")
        self.expect_sym("}")
        return ports

    def _channel(self, number: int, alphabet: list[str]) -> Channel:
        kind_tok = self.expect_ident()
        if kind_tok.text not in CHANNEL_KINDS:
            raise self.fail_at(
                kind_tok,
                "UNKNOWN_KIND",
                f"unknown channel kind {kind_tok.text!r}",
            )
        kind = kind_tok.text
        self.expect_sym("(")
        end_a = self.expect_ident().text
        self.expect_sym(",")
        end_b = self.expect_ident().text
        init = None
        accept = None
        transform = None
        while self.at_sym(","):
            self.next()
            param_tok = self.expect_ident()
            self.expect_sym("=")
            if param_tok.text == "init":
                if kind != FIFO1 or init is not None:
                    raise self.fail_at(
                        param_tok, "BAD_PARAM", f"'init' not valid here on {kind}"
                    )
                init = self.expect_ident().text
            elif param_tok.text == "accept":
                if kind != FILTER or accept is not None:
                    raise self.fail_at(
                        param_tok, "BAD_PARAM", f"'accept' not valid here on {kind}"
                    )
                self.expect_sym("{")
                items = [self.expect_ident().text]
                while self.at_sym(","):
                    self.next()
                    items.append(self.expect_ident().text)
                self.expect_sym("}")
                accept = frozenset(items)
            elif param_tok.text == "map":
                if kind != TRANSFORM or transform is not None:
                    raise self.fail_at(
                        param_tok, "BAD_PARAM", f"'map' not valid here on {kind}"
                    )
                self.expect_sym("{")
                pairs = [self._map_pair()]
                while self.at_sym(","):
                    self.next()
                    pairs.append(self._map_pair())
                self.expect_sym("}")
                transform = tuple(sorted(pairs))
            else:
                raise self.fail_at(
                    param_tok, "BAD_PARAM", f"unknown parameter {param_tok.text!r}"
                )
        self.expect_sym(")")
        if self.at_sym(";"):
            self.next()
        return Channel(
            id=f"c{number}",
            kind=kind,
            end_a=end_a,
            end_b=end_b,
            init=init,
            accept=accept,
            transform=transform,
        )

    def _map_pair(self) -> tuple[str, str]:
        src = self.expect_ident().text
        self.expect_sym("->")
        dst = self.expect_ident().text
        return (src, dst)


def parse_circuit(text: str) -> Circuit:
    return _CircuitParser(_lex(text)).parse()


def print_circuit(c: Circuit) -> str:
    """Deterministic textual form; parse(print(c)) is isomorphic to c."""
    out = [f"circuit {c.name} {{"]
    out.append("  data { " + ", ".join(sorted(c.alphabet)) + " }")
    out.append("  ports {")
    for kind in (PORT_IN, PORT_OUT):
        for p in sorted(p for p in c.ports if p.kind == kind):
            out.append(f"    {kind} {p.name};")
    out.append("  }")
    for ch in c.channels:
        params = ""
        if ch.init is not None:
            params = f", init={ch.init}"
        if ch.accept is not None:
            params = ", accept={" + ", ".join(sorted(ch.accept)) + "}"
        if ch.transform is not None:
            pairs = ", ".join(f"{a}->{b}" for a, b in sorted(ch.transform))
            params = ", map={" + pairs + "}"
        out.append(f"  {ch.kind}({ch.end_a}, {ch.end_b}{params});")
    out.append("}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# compliance terms


_TERM_OPS = {
    "P": "P",
    "Forbidden": "Forbidden",
    "Warning": "Warning",
    "Failure": "Failure",
    "Resolved": "Resolved",
    "DoubleCheck": "DoubleCheck",
    "Very": VERY_OP,  # canonical surface form is (Very)X; Very(X) also accepted
}


class _TermParser(_Parser):
    """Recursive-descent parser for the compliance term language.

    With ``allow_vars`` set, single uppercase letters (A, B, I) are
    pattern variables; otherwise every identifier is an atom and the
    result must be ground.
    """

    def __init__(self, tokens, allow_vars: bool):
        super().__init__(tokens)
        self.allow_vars = allow_vars
        self.var_spans: list[tuple[str, SourceSpan]] = []

    def _starts_term(self) -> bool:
        tok = self.peek()
        return tok.kind == "ident" or (tok.kind == "sym" and tok.text == "(")

    def _ident_term(self, tok: Token) -> Term:
        if self.allow_vars and len(tok.text) == 1 and tok.text.isupper():
            self.var_spans.append((tok.text, tok.span))
            return Var(tok.text)
        return Atom(tok.text)

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text in _TERM_OPS and self.peek(1).kind == "sym" and self.peek(1).text == "(":
                self.next()
                self.expect_sym("(")
                arg = self.parse_term()
                self.expect_sym(")")
                return Op(_TERM_OPS[tok.text], arg)
            self.next()
            return self._ident_term(tok)
        if self.at_sym("("):
            self.next()
            if self.peek().kind == "int":
                count_tok = self.next()
                self.expect_sym(")")
                value = int(count_tok.text)
                if value < 1:
                    raise self.fail_at(count_tok, "BAD_COUNT", "counts start at 1")
                return Count(value, self.parse_term())
            inner = self.parse_term()
            if self.at_sym("=>"):
                self.next()
                rhs = self.parse_term()
                self.expect_sym(")")
                return Implies(inner, rhs)
            close = self.expect_sym(")")
            if self._starts_term():
                if inner == Atom("Very"):
                    return Op(VERY_OP, self.parse_term())
                if isinstance(inner, Var):
                    return Count(inner, self.parse_term())
                raise self.fail_at(
                    close,
                    "BAD_PREFIX",
                    "only (Very) or a count variable may prefix a term",
                )
            return inner
        raise self.fail("SYNTAX", "expected a term", {"identifier", "("})


def parse_term(text: str, allow_vars: bool = False) -> Term:
    p = _TermParser(_lex(text), allow_vars)
    term = p.parse_term()
    p.expect_eof()
    return term


# --------------------------------------------------------------------------
# rule DSL


class _RuleParser(_TermParser):
    def __init__(self, tokens):
        super().__init__(tokens, allow_vars=True)

    def parse(self) -> RuleBase:
        orders: list[tuple[str, ...]] = []
        facts: list[StandingFact] = []
        rules: list[Rule] = []
        while self.peek().kind != "eof":
            if self.at_ident("protocol"):
                orders.append(self._protocol())
            elif self.at_ident("fact"):
                facts.append(self._fact())
            elif self.at_ident("rule"):
                rules.append(self._rule())
            else:
                raise self.fail(
                    "SYNTAX",
                    "expected 'protocol', 'fact' or 'rule'",
                    {"protocol", "fact", "rule"},
                )
        return RuleBase(orders=tuple(orders), facts=tuple(facts), rules=tuple(rules))

    def _protocol(self) -> tuple[str, ...]:
        self.expect_ident("protocol")
        self.expect_sym("{")
        atoms = [self.expect_ident().text]
        self.expect_sym(">>")
        atoms.append(self.expect_ident().text)
        while self.at_sym(">>"):
            self.next()
            atoms.append(self.expect_ident().text)
        self.expect_sym("}")
        return tuple(atoms)

    def _fact(self) -> StandingFact:
        self.expect_ident("fact")
        name = None
        if self.peek().kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).text == ":":
            name = self.next().text
            self.next()
        self.allow_vars = False  # standing facts are ground
        try:
            term = self.parse_term()
        finally:
            self.allow_vars = True
        return StandingFact(name, term)

    def _rule(self) -> Rule:
        self.expect_ident("rule")
        name_tok = self.expect_ident()
        if name_tok.text in semlog.BUILTIN_RULE_NAMES:
            raise self.fail_at(
                name_tok,
                "BUILTIN_OVERRIDE",
                f"rule {name_tok.text!r} is an engine built-in and cannot be redefined",
            )
        self.expect_sym(":")
        premises: list[Term] = []
        guards: list[Guard] = []
        self.var_spans = []
        while True:
            if self._at_guard():
                guards.append(self._guard())
            else:
                premises.append(self.parse_term())
            if self.at_ident("AND"):
                self.next()
                continue
            break
        if self.at_ident("WHERE"):
            self.next()
            guards.append(self._guard())
        bound = set()
        for p in premises:
            bound |= semlog.variables(p)
        self.expect_sym("=>")
        self.var_spans = []
        conclusion = self.parse_term()
        for var, span in self.var_spans:
            if var not in bound:
                raise ParseFailure(
                    [
                        ParseError(
                            span,
                            "UNBOUND_VAR",
                            f"conclusion variable {var!r} is not bound by any premise",
                        )
                    ]
                )
        for g in guards:
            if g.var not in bound:
                raise self.fail_at(
                    name_tok,
                    "UNBOUND_VAR",
                    f"guard variable {g.var!r} is not bound by any premise",
                )
        return Rule(
            name=name_tok.text,
            premises=tuple(premises),
            guards=tuple(guards),
            conclusion=conclusion,
        )

    def _at_guard(self) -> bool:
        return (
            self.peek().kind == "ident"
            and self.peek(1).kind == "sym"
            and self.peek(1).text == ">"
        )

    def _guard(self) -> Guard:
        var = self.expect_ident().text
        self.expect_sym(">")
        bound = int(self.expect_int().text)
        return Guard(var, bound)


def parse_rulebase(text: str) -> RuleBase:
    return _RuleParser(_lex(text)).parse()


# --------------------------------------------------------------------------
# event script


@dataclass(frozen=True)
class ScriptedEvent:
    term: Term
    span: SourceSpan


@dataclass(frozen=True)
class EventScript:
    entries: tuple[ScriptedEvent, ...] = ()

    def terms(self) -> list[Term]:
        return [e.term for e in self.entries]


def parse_events(text: str) -> EventScript:
    """One ground term per line; blank lines and # comments are skipped."""
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        tokens = _lex(stripped, first_line=line_no)
        p = _TermParser(tokens, allow_vars=False)
        term = p.parse_term()
        p.expect_eof()
        entries.append(ScriptedEvent(term, SourceSpan(line_no, 1, len(stripped))))
    return EventScript(tuple(entries))


# --------------------------------------------------------------------------
# environment script


def parse_env(text: str, circuit: Circuit | None = None) -> EnvScript:
    """Per-round offers and readiness.

    Lines: ``policy closed|all-ready`` (at most once, first), then
    ``round N: offer p=tok[, ...]; ready p[, ...]`` with both clauses
    optional. With a circuit supplied, ports are cross-checked.
    """
    policy = POLICY_ALL_READY
    rounds: list[tuple[int, Round]] = []
    seen_rounds: set[int] = set()
    ins: set[str] | None = None
    outs: set[str] | None = None
    if circuit is not None:
        ins = {p.name for p in circuit.ports if p.kind == PORT_IN}
        outs = {p.name for p in circuit.ports if p.kind == PORT_OUT}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("policy"):
            value = stripped[len("policy"):].strip()
            if value not in (POLICY_CLOSED, POLICY_ALL_READY):
                raise ParseFailure(
                    [
                        ParseError(
                            SourceSpan(line_no, 1, len(stripped)),
                            "BAD_POLICY",
                            f"policy must be 'closed' or 'all-ready', found {value!r}",
                        )
                    ]
                )
            policy = value
            continue
        p = _Parser(_lex(stripped, first_line=line_no))
        p.expect_ident("round")
        number_tok = p.expect_int()
        number = int(number_tok.text)
        if number < 1:
            raise p.fail_at(number_tok, "BAD_ROUND", "rounds are numbered from 1")
        if number in seen_rounds:
            raise p.fail_at(number_tok, "DUP_ROUND", f"round {number} defined twice")
        seen_rounds.add(number)
        p.expect_sym(":")
        offers: list[tuple[str, str]] = []
        ready: set[str] = set()
        explicit_ready = False
        while p.peek().kind != "eof":
            if p.at_ident("offer"):
                p.next()
                while True:
                    port_tok = p.expect_ident()
                    p.expect_sym("=")
                    tok = p.expect_ident()
                    if ins is not None and port_tok.text not in ins:
                        raise p.fail_at(
                            port_tok,
                            "UNKNOWN_PORT",
                            f"{port_tok.text!r} is not a boundary-in port",
                        )
                    if circuit is not None and tok.text not in circuit.alphabet:
                        raise p.fail_at(
                            tok,
                            "UNKNOWN_TOKEN",
                            f"{tok.text!r} is not in the data alphabet",
                        )
                    offers.append((port_tok.text, tok.text))
                    if p.at_sym(","):
                        p.next()
                        continue
                    break
            elif p.at_ident("ready"):
                p.next()
                explicit_ready = True
                while True:
                    port_tok = p.expect_ident()
                    if outs is not None and port_tok.text not in outs:
                        raise p.fail_at(
                            port_tok,
                            "UNKNOWN_PORT",
                            f"{port_tok.text!r} is not a boundary-out port",
                        )
                    ready.add(port_tok.text)
                    if p.at_sym(","):
                        p.next()
                        continue
                    break
            else:
                raise p.fail("SYNTAX", "expected 'offer' or 'ready'", {"offer", "ready"})
            if p.at_sym(";"):
                p.next()
        rounds.append(
            (number, Round(tuple(offers), frozenset(ready), explicit_ready))
        )
    rounds.sort(key=lambda pair: pair[0])
    return EnvScript(rounds=tuple(rounds), default_policy=policy)


# --------------------------------------------------------------------------
# event map


@dataclass(frozen=True)
class EventMap:
    """Associations (boundary port, optional data item) -> atom name."""

    entries: tuple[tuple[str, str | None, str], ...] = ()

    def lookup(self, port: str, datum: str) -> str | None:
        specific = None
        fallback = None
        for p, d, atom in self.entries:
            if p != port:
                continue
            if d == datum:
                specific = atom
            elif d is None:
                fallback = atom
        return specific if specific is not None else fallback


def parse_map(text: str, circuit: Circuit | None = None) -> EventMap:
    """Lines of ``port[=tok] -> Atom``."""
    ports: set[str] | None = None
    if circuit is not None:
        ports = {p.name for p in circuit.ports}
    entries: list[tuple[str, str | None, str]] = []
    seen: set[tuple[str, str | None]] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        p = _Parser(_lex(stripped, first_line=line_no))
        port_tok = p.expect_ident()
        datum = None
        if p.at_sym("="):
            p.next()
            datum = p.expect_ident().text
        p.expect_sym("->")
        atom = p.expect_ident().text
        p.expect_eof()
        if ports is not None and port_tok.text not in ports:
            raise p.fail_at(
                port_tok, "UNKNOWN_PORT", f"{port_tok.text!r} is not a boundary port"
            )
        key = (port_tok.text, datum)
        if key in seen:
            raise p.fail_at(
                port_tok, "DUP_MAP_ENTRY", f"duplicate mapping for {key!r}"
            )
        seen.add(key)
        entries.append((port_tok.text, datum, atom))
    return EventMap(tuple(entries))
