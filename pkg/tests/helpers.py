"""Shared grammar fixtures and generators for the test suite."""

from __future__ import annotations

from pathlib import Path

from hypothesis import strategies as st

from cfgmatrix.grammar import Grammar, Production, Symbol, parse_grammar

DATA = Path(__file__).parent / "data"


def load(name: str) -> Grammar:
    return parse_grammar((DATA / name).read_text())


def word_product_pair(n: int) -> tuple[Grammar, Grammar]:
    """``S -> A S | B S | B`` with ``A`` one long word; the second grammar swaps its first two letters."""
    letters = [f"a{i}" for i in range(1, n + 1)]
    swapped = [letters[1], letters[0]] + letters[2:]

    def build(word):
        return parse_grammar(
            f"S -> A S | B S | B ;\nA -> {' '.join(word)} ;\nB -> {' | '.join(letters)} ;\n"
        )

    return build(letters), build(swapped)


EXAMPLES = ["intro.cfg", "nested.cfg", "answer.cfg", "answer_equiv.cfg", "answer_wrong.cfg", "answer_ambiguous.cfg", "eps_shift.cfg", "long_a.cfg", "long_b.cfg"]


@st.composite
def grammars(draw, max_nts: int = 3, terminals: str = "ab", max_alts: int = 3, max_rhs: int = 3, allow_eps: bool = False):
    """Small random grammars: every nonterminal gets at least one terminal-only alternative.

    Renaming productions are only drawn towards later nonterminals, so the
    renaming graph is acyclic by construction.
    """
    n = draw(st.integers(1, max_nts))
    names = ["S", "A", "B", "C", "D"][:n]
    prods = []
    for i, lhs in enumerate(names):
        alts = set()
        base = tuple(Symbol("terminal", t) for t in draw(st.text(terminals, min_size=1, max_size=2)))
        alts.add(base)
        for _ in range(draw(st.integers(0, max_alts - 1))):
            kind = draw(st.sampled_from(["mixed", "rename", "eps"] if allow_eps else ["mixed", "rename"]))
            if kind == "eps":
                alts.add(())
            elif kind == "rename":
                if i + 1 < n:
                    alts.add((Symbol("nonterminal", draw(st.sampled_from(names[i + 1:]))),))
            else:
                length = draw(st.integers(2, max_rhs))
                rhs = tuple(
                    draw(st.sampled_from(
                        [Symbol("terminal", t) for t in terminals] + [Symbol("nonterminal", m) for m in names]
                    ))
                    for _ in range(length)
                )
                alts.add(rhs)
        for rhs in sorted(alts):
            prods.append(Production(lhs, rhs))
    used = sorted({s.name for p in prods for s in p.rhs if s.is_terminal})
    return Grammar(tuple(names), tuple(used), "S", tuple(prods))


def ball_invariant(sys, delta: float) -> bool:
    """``sum of delta**len(m)`` over each right-hand side stays within ``delta``.

    With every terminal and variable of norm at most ``delta`` this keeps
    ``F`` inside the ball of radius ``delta``, the other half of the
    contraction argument.
    """
    return all(sum(delta ** len(m) for m in sys.rhs[v]) <= delta for v in sys.variables)


@st.composite
def contracting_grammars(draw):
    """Random grammars meeting the convergence hypotheses: no renaming, no eps,
    every right-hand side with a nonterminal has length >= 2."""
    n = draw(st.integers(1, 4))
    names = ["S", "A", "B", "C"][:n]
    terms = "abc"
    prods = []
    for lhs in names:
        alts = {tuple(Symbol("terminal", t) for t in draw(st.text(terms, min_size=1, max_size=3)))}
        for _ in range(draw(st.integers(0, 2))):
            length = draw(st.integers(2, 4))
            pool = [Symbol("terminal", t) for t in terms] + [Symbol("nonterminal", m) for m in names]
            alts.add(tuple(draw(st.sampled_from(pool)) for _ in range(length)))
        prods.extend(Production(lhs, rhs) for rhs in sorted(alts))
    used = sorted({s.name for p in prods for s in p.rhs if s.is_terminal})
    return Grammar(tuple(names), tuple(used), "S", tuple(prods))


# -- word sets ---------------------------------------------------------------

TWINS_2X2 = ("aabba,abaab,babaa", "aabab,abbaa,baaba")
EXCEPTIONAL_PAIR = ("aabca,abaac,bacaa", "aabac,abcaa,baaca")


def random_wordset_pair(rng, alphabet: str = "abc", max_len: int = 6, max_words: int = 4):
    """Two unequal word multisets of a common random length drawn from ``rng``."""
    from cfgmatrix.distinguish import WordSet

    while True:
        k = int(rng.integers(1, len(alphabet) + 1))
        letters = alphabet[:k]
        n = int(rng.integers(1, max_len + 1))

        def draw():
            count = int(rng.integers(1, max_words + 1))
            return WordSet(tuple("".join(rng.choice(list(letters), n)) for _ in range(count)))

        u, v = draw(), draw()
        if u != v:
            return u, v


@st.composite
def wordset_pairs(draw, alphabet: str = "ab", max_len: int = 4, max_words: int = 3):
    from cfgmatrix.distinguish import WordSet

    n = draw(st.integers(1, max_len))
    word = st.text(alphabet, min_size=n, max_size=n)
    u = draw(st.lists(word, min_size=1, max_size=max_words))
    v = draw(st.lists(word, min_size=1, max_size=max_words))
    return WordSet(tuple(u)), WordSet(tuple(v))
