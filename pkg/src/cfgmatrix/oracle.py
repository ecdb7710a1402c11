"""Exact truncated power series of grammars.

Two independent exact engines live here.

``series_slice`` iterates the grammar equations in the semiring of
integer-coefficient word polynomials cut off at a length bound.  It
materialises every word, so it is the enumerator behind ``enumerate`` and
the reference for small lengths.

``membership`` and ``min_distinguishing_word`` never list the language.
They take left derivatives of leftmost sentential forms: after reading a
prefix ``p`` a grammar is summarised by the weighted set of sentential
forms that remain, each headed by a terminal.  Prefixes that leave both
grammars in the same summary have the same continuations, so a breadth
first search over word length only keeps one of them.  This makes the
search cheap for pairs whose distinguishing words are long (``4**15``
candidate words) as long as the number of distinct summaries stays small.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .eqsystem import EquationSystem
from .errors import OracleBudgetExceeded, RenamingCycle, UnboundedAmbiguity
from .grammar import Grammar, renaming_cycle
from .solver import apply_linear_inverse

Word = tuple[str, ...]
Series = dict[Word, int]

DEFAULT_LEN_GUARD = 12
# Finite derivation counts of short words stay far below this; a coefficient
# past it belongs to a word with infinitely many derivations, and iterating
# further only squares ever larger integers.
COEFF_CEILING = 1 << 1024


def format_word(word: Iterable[str]) -> str:
    """Render a word; ``eps`` for the empty word.

    Single-character terminal names are concatenated, longer names are
    joined with ``.`` (which cannot occur in an identifier).
    """
    word = tuple(word)
    if not word:
        return "eps"
    if all(len(a) == 1 for a in word):
        return "".join(word)
    return ".".join(word)


def parse_word(text: str) -> Word:
    if text in ("", "eps", "ε"):
        return ()
    if "." in text:
        return tuple(text.split("."))
    return tuple(text)


def word_key(word: Word):
    return (len(word), word)


@dataclass(frozen=True)
class SeriesSlice:
    max_len: int
    coefficients: Mapping[Word, int]
    stabilized: bool
    iterations: int = 0

    def __getitem__(self, word: Word) -> int:
        return self.coefficients.get(tuple(word), 0)

    def words(self) -> list[Word]:
        return sorted(self.coefficients, key=word_key)

    def lines(self) -> list[str]:
        return [f"{format_word(w)}\t{self.coefficients[w]}" for w in self.words()]


@dataclass(frozen=True)
class WitnessReport:
    word: Word
    coeff_left: int
    coeff_right: int

    def __post_init__(self):
        if self.coeff_left == self.coeff_right:
            raise ValueError("a witness needs different coefficients")

    def to_json(self) -> dict:
        return {"word": format_word(self.word), "coeff_left": self.coeff_left, "coeff_right": self.coeff_right}


# -- truncated word semiring ----------------------------------------------

def _add(p: Series, q: Series) -> Series:
    out = dict(p)
    for w, c in q.items():
        out[w] = out.get(w, 0) + c
    return out


def _mul(p: Series, q: Series, max_len: int) -> Series:
    if not p or not q:
        return {}
    by_len = defaultdict(list)
    for w, c in q.items():
        by_len[len(w)].append((w, c))
    out: Series = defaultdict(int)
    for w1, c1 in p.items():
        room = max_len - len(w1)
        for n, items in by_len.items():
            if n <= room:
                for w2, c2 in items:
                    out[w1 + w2] += c1 * c2
    return dict(out)


def _default_cap(max_len: int, n_vars: int) -> int:
    return max_len * (1 + n_vars) * 4 + 4


def _check_len(max_len: int, guard: int | None):
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    if guard is not None and max_len > guard:
        raise ValueError(f"max_len {max_len} exceeds the enumeration guard {guard}")


def _kleene(variables, equations, max_len, iter_cap, post=None):
    """Iterate ``X <- equations(X)`` from zero until nothing changes."""
    x: dict[str, Series] = {v: {} for v in variables}
    for k in range(1, iter_cap + 1):
        new = equations(x)
        if post is not None:
            new = post(new)
        if new == x:
            return x, True, k
        x = new
        if any(c > COEFF_CEILING for series in x.values() for c in series.values()):
            return x, False, k
    return x, False, iter_cap


def _eval_monomial(m, x, max_len) -> Series:
    acc: Series = {(): 1}
    for s in m:
        factor = {(s.name,): 1} if s.is_terminal else x[s.name]
        acc = _mul(acc, factor, max_len)
        if not acc:
            break
    return acc


def series_slice(
    g: Grammar, max_len: int, iter_cap: int | None = None, guard: int | None = DEFAULT_LEN_GUARD
) -> SeriesSlice:
    """All words of length ``<= max_len`` with their derivation counts.

    ``stabilized`` is False when the iteration was still changing after
    ``iter_cap`` rounds, which happens when some word has infinitely many
    derivations.
    """
    _check_len(max_len, guard)
    cycle = renaming_cycle(g)
    if cycle:
        raise RenamingCycle(cycle)
    if iter_cap is None:
        iter_cap = _default_cap(max_len, len(g.nonterminals))

    def equations(x):
        out = {}
        for nt in g.nonterminals:
            total: Series = {}
            for rhs in g.alternatives(nt):
                total = _add(total, _eval_monomial(rhs, x, max_len))
            out[nt] = total
        return out

    x, ok, k = _kleene(g.nonterminals, equations, max_len, iter_cap)
    return SeriesSlice(max_len, x[g.axiom], ok, k)


def system_slice(
    sys: EquationSystem, max_len: int, iter_cap: int | None = None, guard: int | None = DEFAULT_LEN_GUARD
) -> SeriesSlice:
    """Truncated series of the axiom computed from a (transformed) system.

    Runs ``X <- (I - Lambda)^-1 F(X)`` in the word semiring and adds the
    empty word back for shifted variables, mirroring the matrix solver.
    """
    _check_len(max_len, guard)
    if iter_cap is None:
        iter_cap = _default_cap(max_len, len(sys.variables))
    order = sys.linear_order()

    def equations(x):
        f = {}
        for v in sys.variables:
            total: Series = {}
            for m in sys.rhs[v]:
                total = _add(total, _eval_monomial(m, x, max_len))
            f[v] = total
        return apply_linear_inverse(sys.linear_part, f, order, _add)

    x, ok, k = _kleene(sys.variables, equations, max_len, iter_cap)
    coeffs = dict(x[sys.axiom])
    if sys.axiom in sys.shifted:
        coeffs[()] = coeffs.get((), 0) + 1
    return SeriesSlice(max_len, coeffs, ok, k)


# -- left derivatives of sentential forms ----------------------------------

_INF = float("inf")


class Deriver:
    """Left derivatives of a grammar's series, represented by sentential forms.

    A form is a tuple of items: a terminal name, a nonterminal name (any
    yield, the empty one included) or ``"+A"`` (the nonempty yields of A).
    Splitting every nonterminal into its empty and nonempty parts keeps
    expansion chains short: without a cycle ``A =>+ A`` a chain of head
    expansions must raise the form's minimum yield length every
    ``len(nonterminals) + 1`` steps.
    """

    def __init__(self, g: Grammar):
        cycle = renaming_cycle(g)
        if cycle:
            raise RenamingCycle(cycle)
        self.grammar = g
        self.nts = set(g.nonterminals)
        self.alts = {nt: g.alternatives(nt) for nt in g.nonterminals}
        self.eps = self._epsilon_counts()
        self.ml = self._min_lengths()
        self._expansions = {nt: self._plus_expansions(nt) for nt in g.nonterminals}

    def _epsilon_counts(self) -> dict[str, int | None]:
        """Number of derivations of the empty word; None when infinite."""
        n = len(self.nts)
        e = {nt: 0 for nt in self.nts}

        def step(e):
            out = {}
            for nt, alts in self.alts.items():
                total = 0
                for rhs in alts:
                    term = 1
                    for s in rhs:
                        term = 0 if s.is_terminal else term * e[s.name]
                        if term == 0:
                            break
                    total += term
                out[nt] = total
            return out

        for _ in range(n + 1):
            e = step(e)
        settled = dict(e)
        for _ in range(n + 3):
            e = step(e)
        return {nt: (settled[nt] if e[nt] == settled[nt] else None) for nt in self.nts}

    def _min_lengths(self) -> dict[str, float]:
        ml: dict[str, float] = {nt: _INF for nt in self.nts}
        changed = True
        while changed:
            changed = False
            for nt, alts in self.alts.items():
                best = min(
                    (sum(1 if s.is_terminal else ml[s.name] for s in rhs) for rhs in alts),
                    default=_INF,
                )
                if best < ml[nt]:
                    ml[nt] = best
                    changed = True
        plus: dict[str, float] = {nt: _INF for nt in self.nts}
        changed = True
        while changed:
            changed = False
            for nt, alts in self.alts.items():
                best = _INF
                for rhs in alts:
                    for i, s in enumerate(rhs):
                        head = 1 if s.is_terminal else plus[s.name]
                        tail = sum(1 if t.is_terminal else ml[t.name] for t in rhs[i + 1:])
                        best = min(best, head + tail)
                        if s.is_terminal or ml[s.name] != 0:
                            break
                if best < plus[nt]:
                    plus[nt] = best
                    changed = True
        table: dict[str, float] = dict(ml)
        for nt, v in plus.items():
            table["+" + nt] = v
        return table

    def _plus_expansions(self, nt: str) -> list[tuple[tuple[str, ...], int | None]]:
        """Ways to start a nonempty yield of ``nt``: (new head items, weight).

        Alternative ``X1 .. Xk`` contributes one entry per position ``i``
        such that ``X1 .. X(i-1)`` vanish; the weight counts those empty
        derivations (None when infinite).
        """
        out = []
        for rhs in self.alts[nt]:
            weight: int | None = 1
            for i, s in enumerate(rhs):
                if s.is_terminal:
                    out.append((tuple(t.name for t in rhs[i:]), weight))
                    break
                items = ("+" + s.name,) + tuple(t.name for t in rhs[i + 1:])
                out.append((items, weight))
                if self.ml[s.name] != 0:
                    break
                e = self.eps[s.name]
                weight = None if (weight is None or e is None) else weight * e
        return out

    def _minlen(self, form) -> float:
        ml = self.ml
        return sum(ml.get(item, 1) for item in form)

    def close(self, forms: Mapping[tuple, int], budget: int) -> tuple[int, dict[tuple, int]]:
        """Expand head nonterminals until every form starts with a terminal.

        Returns the coefficient of the empty word and the terminal-headed
        forms whose minimum yield fits into ``budget``.
        """
        const = 0
        heads: dict[tuple, int] = defaultdict(int)
        frontier = {f: c for f, c in forms.items() if self._minlen(f) <= budget}
        cap = 2 * (len(self.nts) + 1) * (budget + 2) + 4
        depth = 0
        while frontier:
            depth += 1
            if depth > cap:
                raise UnboundedAmbiguity(
                    f"leftmost expansion does not terminate in grammar with axiom {self.grammar.axiom}"
                )
            nxt: dict[tuple, int] = defaultdict(int)
            for form, c in frontier.items():
                if not form:
                    const += c
                    continue
                head = form[0]
                rest = form[1:]
                if head[0] == "+":
                    base = self._minlen(rest)
                    for items, w in self._expansions[head[1:]]:
                        if base + self._minlen(items) > budget:
                            continue
                        if w is None:
                            raise UnboundedAmbiguity(f"{head[1:]} has infinitely many empty derivations")
                        if w:
                            nxt[items + rest] += c * w
                elif head in self.nts:
                    e = self.eps[head]
                    if e is None:
                        raise UnboundedAmbiguity(f"{head} has infinitely many empty derivations")
                    if e:
                        nxt[rest] += c * e
                    plus = ("+" + head,) + rest
                    if self._minlen(plus) <= budget:
                        nxt[plus] += c
                else:
                    heads[form] += c
            frontier = nxt
        return const, dict(heads)

    def start(self, budget: int) -> tuple[int, dict[tuple, int]]:
        return self.close({(self.grammar.axiom,): 1}, budget)

    def derive(self, heads: Mapping[tuple, int], letter: str, budget: int) -> tuple[int, dict[tuple, int]]:
        """Quotient by one more letter; ``budget`` is the length still allowed."""
        rests = {f[1:]: c for f, c in heads.items() if f[0] == letter}
        return self.close(rests, budget)


def _state_key(heads: Mapping[tuple, int]):
    return frozenset(heads.items())


def membership(g: Grammar, word: Iterable[str]) -> int:
    """Number of derivations of ``word``; 0 when it is not in the language."""
    word = tuple(word)
    d = Deriver(g)
    const, heads = d.start(len(word))
    for i, a in enumerate(word):
        if not heads:
            return 0
        const, heads = d.derive(heads, a, len(word) - i - 1)
    return const


def derivative_slice(g: Grammar, max_len: int) -> SeriesSlice:
    """The same slice as :func:`series_slice`, computed by derivatives."""
    d = Deriver(g)
    coeffs: dict[Word, int] = {}
    const, heads = d.start(max_len)
    if const:
        coeffs[()] = const
    stack = [((), heads)]
    while stack:
        prefix, heads = stack.pop()
        budget = max_len - len(prefix) - 1
        if budget < 0:
            continue
        for a in sorted({f[0] for f in heads}):
            c, h = d.derive(heads, a, budget)
            w = prefix + (a,)
            if c:
                coeffs[w] = c
            if h:
                stack.append((w, h))
    return SeriesSlice(max_len, coeffs, True)


def min_distinguishing_word(
    g1: Grammar, g2: Grammar, max_len: int, max_states: int | None = None
) -> WitnessReport | None:
    """Shortest, then lexicographically least, word with different coefficients.

    Returns None when the series agree on every word up to ``max_len``.
    Raises :class:`OracleBudgetExceeded` when a search layer holds more than
    ``max_states`` distinct state pairs, and :class:`UnboundedAmbiguity` when
    a coefficient on the way is infinite.
    """
    d1, d2 = Deriver(g1), Deriver(g2)
    c1, h1 = d1.start(max_len)
    c2, h2 = d2.start(max_len)
    if c1 != c2:
        return WitnessReport((), c1, c2)
    layer = [((), h1, h2)]
    for depth in range(1, max_len + 1):
        budget = max_len - depth
        nxt = []
        seen = set()
        for prefix, h1, h2 in layer:
            letters = sorted({f[0] for f in h1} | {f[0] for f in h2})
            for a in letters:
                c1, n1 = d1.derive(h1, a, budget)
                c2, n2 = d2.derive(h2, a, budget)
                word = prefix + (a,)
                if c1 != c2:
                    return WitnessReport(word, c1, c2)
                if not n1 and not n2:
                    continue
                key = (_state_key(n1), _state_key(n2))
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((word, n1, n2))
        if max_states is not None and len(nxt) > max_states:
            raise OracleBudgetExceeded(depth, len(nxt))
        layer = nxt
        if not layer:
            break
    return None
