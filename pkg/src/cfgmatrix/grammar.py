"""Context-free grammars: text format, validation and structural analysis.

Grammar files look like::

    # the language c, ab, acb, accb, ...
    S -> a A b | c ;
    A -> c A | eps ;

Identifiers starting with an uppercase letter are nonterminals, lowercase
ones are terminals.  ``eps`` (or ``ε``) denotes the empty right-hand side.
The left-hand side of the first rule is the axiom.
"""

from __future__ import annotations

import graphlib
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .errors import GrammarError, GrammarSyntaxError, RenamingCycle, UndefinedNonterminal

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"

EPS_KEYWORDS = ("eps", "ε")


@dataclass(frozen=True, order=True)
class Symbol:
    kind: str
    name: str

    def __post_init__(self):
        if not self.name:
            raise GrammarError("empty symbol name")
        if self.kind not in (TERMINAL, NONTERMINAL):
            raise GrammarError(f"unknown symbol kind {self.kind!r}")

    @property
    def is_terminal(self) -> bool:
        return self.kind == TERMINAL

    def __str__(self) -> str:
        return self.name


def T(name: str) -> Symbol:
    return Symbol(TERMINAL, name)


def N(name: str) -> Symbol:
    return Symbol(NONTERMINAL, name)


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]

    def __str__(self) -> str:
        body = " ".join(s.name for s in self.rhs) if self.rhs else "eps"
        return f"{self.lhs} -> {body}"


@dataclass(frozen=True)
class Grammar:
    """An immutable context-free grammar.

    ``nonterminals`` keeps definition order (the axiom first); ``terminals``
    is sorted by name.
    """

    nonterminals: tuple[str, ...]
    terminals: tuple[str, ...]
    axiom: str
    productions: tuple[Production, ...]
    _by_lhs: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.axiom not in self.nonterminals:
            raise GrammarError(f"axiom {self.axiom} is not a nonterminal")
        nts = set(self.nonterminals)
        ts = set(self.terminals)
        if nts & ts:
            raise GrammarError(f"symbols used as both kinds: {sorted(nts & ts)}")
        by_lhs: dict[str, list[tuple[Symbol, ...]]] = {nt: [] for nt in self.nonterminals}
        seen = set()
        for p in self.productions:
            if p.lhs not in nts:
                raise GrammarError(f"production for unknown nonterminal {p.lhs}")
            for s in p.rhs:
                pool = ts if s.is_terminal else nts
                if s.name not in pool:
                    if s.is_terminal:
                        raise GrammarError(f"terminal {s.name} missing from alphabet")
                    raise UndefinedNonterminal(s.name)
            if (p.lhs, p.rhs) in seen:
                raise GrammarError(f"duplicate production {p}")
            seen.add((p.lhs, p.rhs))
            by_lhs[p.lhs].append(p.rhs)
        for nt, alts in by_lhs.items():
            if not alts:
                raise UndefinedNonterminal(nt)
        object.__setattr__(self, "_by_lhs", {k: tuple(v) for k, v in by_lhs.items()})

    def alternatives(self, nonterminal: str) -> tuple[tuple[Symbol, ...], ...]:
        return self._by_lhs[nonterminal]

    @classmethod
    def from_productions(cls, productions: Iterable[tuple[str, Iterable[Union[Symbol, str]]]]):
        """Build a grammar from ``(lhs, rhs)`` pairs, naming symbols by case.

        The first lhs is the axiom.
        """
        prods = []
        for lhs, rhs in productions:
            prods.append(Production(lhs, tuple(_as_symbol(s) for s in rhs)))
        return _assemble(prods)

    def __str__(self) -> str:
        return format_grammar(self)


def _as_symbol(s: Union[Symbol, str]) -> Symbol:
    if isinstance(s, Symbol):
        return s
    return N(s) if s[:1].isupper() else T(s)


def _assemble(prods: list[Production]) -> Grammar:
    if not prods:
        raise GrammarError("empty grammar")
    nts: dict[str, None] = {}
    for p in prods:
        nts.setdefault(p.lhs, None)
    terms = sorted({s.name for p in prods for s in p.rhs if s.is_terminal})
    return Grammar(tuple(nts), tuple(terms), prods[0].lhs, tuple(prods))


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<arrow>->|→)|(?P<bar>\|)|(?P<semi>;)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<eps>ε)"
)


def _tokenize(text: str):
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            value = m.group()
            if kind == "ident" and value == "eps":
                kind = "eps"
            yield kind, value, line, col
        pos = m.end()
    yield "end", "", line, pos - line_start + 1


def parse_grammar(text: str) -> Grammar:
    """Parse grammar text; raise :class:`GrammarError` subclasses on bad input."""
    tokens = list(_tokenize(text))
    i = 0
    prods: list[Production] = []
    uses: dict[str, tuple[int, int]] = {}
    defined: set[str] = set()

    def expect(kind: str, what: str):
        nonlocal i
        k, v, ln, col = tokens[i]
        if k != kind:
            shown = repr(v) if v else "end of input"
            raise GrammarSyntaxError(f"expected {what}, found {shown}", ln, col)
        i += 1
        return v, ln, col

    if tokens[0][0] == "end":
        raise GrammarError("empty grammar")
    while tokens[i][0] != "end":
        lhs, ln, col = expect("ident", "nonterminal")
        if not lhs[0].isupper():
            raise GrammarSyntaxError(f"left-hand side {lhs!r} must be a nonterminal", ln, col)
        defined.add(lhs)
        expect("arrow", "'->'")
        while True:
            k, v, ln, col = tokens[i]
            if k == "eps":
                i += 1
                rhs: tuple[Symbol, ...] = ()
            else:
                syms = []
                while tokens[i][0] == "ident":
                    _, name, sl, sc = tokens[i]
                    sym = _as_symbol(name)
                    if not sym.is_terminal:
                        uses.setdefault(name, (sl, sc))
                    syms.append(sym)
                    i += 1
                if not syms:
                    shown = repr(v) if v else "end of input"
                    raise GrammarSyntaxError(f"expected symbol or 'eps', found {shown}", ln, col)
                if tokens[i][0] == "eps":
                    _, _, el, ec = tokens[i]
                    raise GrammarSyntaxError("'eps' must stand alone in an alternative", el, ec)
                rhs = tuple(syms)
            prods.append(Production(lhs, rhs))
            if tokens[i][0] == "bar":
                i += 1
                continue
            expect("semi", "'|' or ';'")
            break
    for name, (ln, col) in uses.items():
        if name not in defined:
            raise UndefinedNonterminal(name, ln, col)
    return _assemble(prods)


def format_grammar(g: Grammar) -> str:
    """Canonical text form; ``parse_grammar(format_grammar(g)) == g``."""
    lines = []
    for nt in g.nonterminals:
        alts = [" ".join(s.name for s in rhs) if rhs else "eps" for rhs in g.alternatives(nt)]
        lines.append(f"{nt} -> {' | '.join(alts)} ;")
    return "\n".join(lines) + "\n"


# -- structure -------------------------------------------------------------

@dataclass(frozen=True)
class StructureReport:
    nullable: frozenset[str]
    renaming_edges: frozenset[tuple[str, str]]
    renaming_cyclic: bool
    nbar: int
    has_unit_length_nt_words: bool


def renaming_order(edges: Iterable[tuple[str, str]], nodes: Iterable[str] = ()) -> list[str]:
    """Topological order of the renaming graph, targets before sources.

    Raises :class:`RenamingCycle` if the graph has a cycle.
    """
    graph: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edges:
        graph.setdefault(a, set()).add(b)
        graph.setdefault(b, set())
    try:
        return list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        raise RenamingCycle(exc.args[1]) from None


def analyze_structure(g: Grammar) -> StructureReport:
    nullable = set()
    edges = set()
    nbar = 0
    unit = False
    for p in g.productions:
        if not p.rhs:
            nullable.add(p.lhs)
            continue
        nt_count = sum(1 for s in p.rhs if not s.is_terminal)
        if len(p.rhs) == 1 and nt_count == 1:
            unit = True
            edges.add((p.lhs, p.rhs[0].name))
        else:
            nbar += nt_count
    try:
        renaming_order(edges)
        cyclic = False
    except RenamingCycle:
        cyclic = True
    return StructureReport(frozenset(nullable), frozenset(edges), cyclic, nbar, unit)


# -- scalar growth probe ---------------------------------------------------

@dataclass(frozen=True)
class Converged:
    values: dict[str, float]
    iterations: int


@dataclass(frozen=True)
class Diverged:
    iteration: int


def scalar_class_probe(
    g: Grammar, mu: float, max_iter: int = 10000, blowup: float = 1e6
) -> Union[Converged, Diverged]:
    """Iterate the grammar's equations with every terminal replaced by ``mu``.

    Starting from zero the iterates increase monotonically.  A finite limit
    is consistent with bounded (exponential) growth of the coefficients;
    leaving the ``blowup`` ball, or failing to settle within ``max_iter``
    steps, marks the grammar as second class.
    """
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    if analyze_structure(g).renaming_cyclic:
        raise RenamingCycle(renaming_cycle(g))
    nts = g.nonterminals
    idx = {nt: i for i, nt in enumerate(nts)}
    # each alternative becomes (mu ** terminal_count, [nonterminal indices])
    compiled = []
    for nt in nts:
        alts = []
        for rhs in g.alternatives(nt):
            tcount = sum(1 for s in rhs if s.is_terminal)
            alts.append((mu**tcount, [idx[s.name] for s in rhs if not s.is_terminal]))
        compiled.append(alts)
    x = [0.0] * len(nts)
    for k in range(1, max_iter + 1):
        new = []
        for alts in compiled:
            total = 0.0
            for coeff, refs in alts:
                term = coeff
                for r in refs:
                    term *= x[r]
                total += term
            new.append(total)
        if any(v > blowup or v != v for v in new):
            return Diverged(k)
        settled = all(abs(a - b) <= 1e-12 * max(1.0, abs(a)) for a, b in zip(new, x))
        x = new
        if settled:
            return Converged(dict(zip(nts, x)), k)
    return Diverged(max_iter)


def renaming_cycle(g: Grammar) -> tuple[str, ...]:
    try:
        renaming_order(analyze_structure(g).renaming_edges)
    except RenamingCycle as exc:
        return exc.cycle
    return ()
