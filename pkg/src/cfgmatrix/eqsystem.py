"""Polynomial equation systems compiled from grammars.

A grammar with productions ``X -> P1 | ... | Pk`` becomes the equation
``X = P1 + ... + Pk`` over noncommuting symbols.  Monomials are tuples of
:class:`~cfgmatrix.grammar.Symbol`; the empty tuple is the identity.  A
polynomial is a tuple of monomials in which repeats are meaningful: the
multiplicity of a term is the number of derivations it stands for.

Two rewrites bring a system into the form the fixed-point solver needs:

* :func:`split_linear` moves bare-nonterminal terms into ``linear_part`` so
  that the system reads ``X = F(X) + Lambda X``;
* :func:`epsilon_shift` replaces ``X`` by ``Y + I`` for every variable whose
  equation has an identity term, removing the constants.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping

from .errors import NonCancellingConstant, RenamingCycle
from .grammar import Grammar, Symbol, renaming_cycle, renaming_order

Monomial = tuple[Symbol, ...]
Polynomial = tuple[Monomial, ...]

IDENTITY: Monomial = ()


def is_bare(m: Monomial) -> bool:
    return len(m) == 1 and not m[0].is_terminal


def nonterminal_count(m: Monomial) -> int:
    return sum(1 for s in m if not s.is_terminal)


@dataclass(frozen=True)
class EquationSystem:
    variables: tuple[str, ...]
    rhs: Mapping[str, Polynomial]
    terminals: tuple[str, ...]
    axiom: str
    linear_part: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    shifted: frozenset[str] = frozenset()
    is_split: bool = False
    is_epsilon_shifted: bool = False

    def linear_order(self) -> list[str]:
        """Variables ordered so that linear dependencies come first."""
        edges = [(v, u) for v, us in self.linear_part.items() for u in us]
        renaming_order(edges, self.variables)  # raises on cycles
        # graphlib leaves ties in arbitrary order; keep it reproducible
        pos = {v: i for i, v in enumerate(self.variables)}
        return _stable_topo(self.variables, self.linear_part, pos)

    def __str__(self) -> str:
        return render_system(self)


def _stable_topo(variables, linear_part, pos) -> list[str]:
    done: set[str] = set()
    out: list[str] = []

    def visit(v):
        if v in done:
            return
        done.add(v)
        for u in sorted(set(linear_part.get(v, ())), key=pos.__getitem__):
            visit(u)
        out.append(v)

    for v in variables:
        visit(v)
    return out


def build_system(g: Grammar) -> EquationSystem:
    cycle = renaming_cycle(g)
    if cycle:
        raise RenamingCycle(cycle)
    rhs = {nt: tuple(g.alternatives(nt)) for nt in g.nonterminals}
    return EquationSystem(g.nonterminals, rhs, g.terminals, g.axiom)


def split_linear(sys: EquationSystem) -> EquationSystem:
    rhs = {}
    linear = {}
    for v in sys.variables:
        keep = []
        lin = list(sys.linear_part.get(v, ()))
        for m in sys.rhs[v]:
            if is_bare(m):
                lin.append(m[0].name)
            else:
                keep.append(m)
        rhs[v] = tuple(keep)
        if lin:
            linear[v] = tuple(lin)
    out = replace(sys, rhs=rhs, linear_part=linear, is_split=True)
    out.linear_order()  # raises RenamingCycle
    return out


def epsilon_shift(sys: EquationSystem) -> EquationSystem:
    """Substitute ``X = X' + I`` for variables whose equation holds ``I``.

    Products are expanded distributively; in every shifted equation the
    identity produced by the left-hand side must cancel exactly one
    identity term on the right, and unshifted equations must end with none.
    Anything else raises :class:`NonCancellingConstant`.
    """
    if not sys.is_split:
        sys = split_linear(sys)
    todo = {v for v in sys.variables if IDENTITY in sys.rhs[v]}
    if not todo:
        return replace(sys, is_epsilon_shifted=True)

    rhs = {}
    linear = {}
    for v in sys.variables:
        identities = 0
        terms: list[Monomial] = []
        lin: list[str] = []
        for m in sys.rhs[v]:
            choices = [((s,), ()) if (not s.is_terminal and s.name in todo) else ((s,),) for s in m]
            for combo in itertools.product(*choices):
                expanded = tuple(s for part in combo for s in part)
                if expanded == IDENTITY:
                    identities += 1
                elif is_bare(expanded):
                    lin.append(expanded[0].name)
                else:
                    terms.append(expanded)
        for u in sys.linear_part.get(v, ()):
            lin.append(u)
            if u in todo:
                identities += 1
        net = identities - (1 if v in todo else 0)
        if net != 0:
            raise NonCancellingConstant(v, net)
        rhs[v] = tuple(terms)
        if lin:
            linear[v] = tuple(lin)
    out = replace(
        sys,
        rhs=rhs,
        linear_part=linear,
        shifted=sys.shifted | frozenset(todo),
        is_epsilon_shifted=True,
    )
    out.linear_order()
    return out


def compile_grammar(g: Grammar) -> EquationSystem:
    """Build, split and shift: the form the solver works on."""
    return epsilon_shift(split_linear(build_system(g)))


def contraction_params(sys: EquationSystem, safety: float = 0.9) -> tuple[int, float]:
    """Return ``(nbar, delta_max)`` for the contraction bound ``nbar * delta < 1``.

    ``nbar`` counts nonterminal occurrences over right-hand-side terms that
    contain at least one nonterminal, renaming terms excluded.
    """
    nbar = sum(nonterminal_count(m) for p in sys.rhs.values() for m in p if not is_bare(m))
    if nbar == 0:
        return 0, 0.5
    return nbar, safety / nbar


# -- rendering -------------------------------------------------------------

def _name(sys: EquationSystem, s: Symbol) -> str:
    if not s.is_terminal and s.name in sys.shifted:
        return s.name + "'"
    return s.name


def render_monomial(sys: EquationSystem, m: Monomial) -> str:
    return " ".join(_name(sys, s) for s in m) if m else "I"


def render_system(sys: EquationSystem) -> str:
    """One equation per line; renaming terms appear in braces.

    Shifted variables are primed: ``A'`` stands for ``A - I``.
    """
    lines = []
    for v in sys.variables:
        parts = [render_monomial(sys, m) for m in sys.rhs[v]]
        for u in sys.linear_part.get(v, ()):
            parts.append("{" + (u + "'" if u in sys.shifted else u) + "}")
        lhs = v + "'" if v in sys.shifted else v
        lines.append(f"{lhs} = {' + '.join(parts) if parts else '0'}")
    return "\n".join(lines)
