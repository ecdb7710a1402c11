"""Fixed-point iteration for matrix equation systems.

Under a substitution every terminal becomes a matrix and the system
``X = F(X) + Lambda X`` becomes a nonlinear matrix system.  Because the
renaming graph is acyclic, ``(I - Lambda)`` is inverted exactly by
back-substitution, and the iteration is ``X <- (I - Lambda)^-1 F(X)``
from ``X = 0``.

The work is done by :func:`solve_batch`, which carries a leading trial axis
so that many substitutions are solved with the same numpy calls.  Each
trial stops updating at its own convergence or divergence step, so a batch
of one reproduces any member of a larger batch bit for bit.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .eqsystem import EquationSystem, Polynomial
from .grammar import renaming_order
from .linalg import Matrix, Substitution, identity

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 100_000
DEFAULT_BLOWUP = 1e6


class Status(str, Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITER = "MaxIterExceeded"


@dataclass
class Solution:
    assignment: dict[str, Matrix]
    iterations: int
    residual: float
    status: Status
    # Frobenius size of each step, max over variables; only when requested
    history: list[float] | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "residual": self.residual,
            "assignment": {k: m.tolist() for k, m in self.assignment.items()},
        }


def _image(symbol, sub: Substitution, assignment: Mapping[str, Matrix]) -> Matrix:
    try:
        return sub[symbol.name] if symbol.is_terminal else assignment[symbol.name]
    except KeyError:
        raise KeyError(f"no matrix for symbol {symbol.name}") from None


def evaluate_polynomial(p: Polynomial, sub: Substitution, assignment: Mapping[str, Matrix]) -> Matrix:
    """Sum of ordered matrix products; the identity monomial contributes ``I``."""
    total = np.zeros((sub.dim, sub.dim))
    for m in p:
        if not m:
            total = total + identity(sub.dim)
            continue
        prod = _image(m[0], sub, assignment)
        for s in m[1:]:
            prod = prod @ _image(s, sub, assignment)
        total = total + prod
    return total


def apply_linear_inverse(
    linear_part: Mapping[str, tuple[str, ...]],
    values: Mapping[str, object],
    order: list[str] | None = None,
    add: Callable = operator.add,
) -> dict:
    """Solve ``(I - Lambda) Y = values`` by back-substitution.

    ``Y[v] = values[v] + sum(Y[u] for u in linear_part[v])``, evaluated in
    topological order of the renaming graph.  ``add`` lets the same routine
    run over matrices, scalars or truncated word series.
    """
    if order is None:
        edges = [(v, u) for v, us in linear_part.items() for u in us]
        order = renaming_order(edges, values)
    out = {}
    for v in order:
        acc = values[v]
        for u in linear_part.get(v, ()):
            acc = add(acc, out[u])
        out[v] = acc
    return out


class _Compiled:
    """A system specialised to a batch of terminal matrices.

    Runs of consecutive terminals are multiplied once up front and
    terminal-only monomials are folded into a per-equation constant.
    """

    def __init__(self, sys: EquationSystem, mats: Mapping[str, np.ndarray]):
        missing = [t for t in sys.terminals if t not in mats]
        if missing:
            raise KeyError(f"substitution has no matrix for terminals {missing}")
        some = next(iter(mats.values()))
        self.batch, self.dim = some.shape[0], some.shape[1]
        self.variables = sys.variables
        index = {v: i for i, v in enumerate(sys.variables)}
        eye = np.broadcast_to(np.eye(self.dim), (self.batch, self.dim, self.dim))
        self.consts = []
        self.terms = []
        for v in sys.variables:
            const = np.zeros((self.batch, self.dim, self.dim))
            terms = []
            for m in sys.rhs[v]:
                factors: list = []
                run = None
                for s in m:
                    if s.is_terminal:
                        run = mats[s.name] if run is None else run @ mats[s.name]
                    else:
                        if run is not None:
                            factors.append(run)
                            run = None
                        factors.append(index[s.name])
                if run is not None:
                    factors.append(run)
                if not factors:
                    const = const + eye
                elif all(isinstance(f, np.ndarray) for f in factors):
                    const = const + factors[0]
                else:
                    terms.append(factors)
            self.consts.append(const)
            self.terms.append(terms)
        self.order = [index[v] for v in sys.linear_order()]
        self.linear = [[index[u] for u in sys.linear_part.get(v, ())] for v in sys.variables]
        self.shifted = [index[v] for v in sys.shifted]

    def step(self, x: np.ndarray) -> np.ndarray:
        """One application of the map to ``x`` of shape ``(variables, T, n, n)``."""
        f = []
        for const, terms in zip(self.consts, self.terms):
            acc = const
            for factors in terms:
                first = factors[0]
                prod = x[first] if isinstance(first, int) else first
                for fac in factors[1:]:
                    prod = prod @ (x[fac] if isinstance(fac, int) else fac)
                acc = acc + prod
            f.append(acc)
        out = np.empty_like(x)
        for i in self.order:
            acc = f[i]
            for j in self.linear[i]:
                acc = acc + out[j]
            out[i] = acc
        return out


@dataclass
class BatchResult:
    values: dict[str, np.ndarray]  # identity added back for shifted variables
    status: list[Status]
    iterations: np.ndarray
    residual: np.ndarray
    history: list[np.ndarray] | None = None


def solve_batch(
    sys: EquationSystem,
    mats: Mapping[str, np.ndarray],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    blowup: float = DEFAULT_BLOWUP,
    record_history: bool = False,
) -> BatchResult:
    """Iterate every trial of the batch ``mats[t].shape == (T, n, n)``."""
    comp = _Compiled(sys, mats)
    T, n = comp.batch, comp.dim
    x = np.zeros((len(sys.variables), T, n, n))
    active = np.ones(T, dtype=bool)
    status = np.full(T, 2, dtype=np.int8)  # 0 converged, 1 diverged, 2 max_iter
    iterations = np.zeros(T, dtype=np.int64)
    residual = np.full(T, np.inf)
    history = [] if record_history else None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, max_iter + 1):
            y = comp.step(x)
            delta = y - x
            step = np.abs(delta).max(axis=(0, 2, 3), initial=0.0)
            sizes = np.sqrt((y * y).sum(axis=(2, 3))).max(axis=0, initial=0.0)
            if record_history:
                fro = np.sqrt((delta * delta).sum(axis=(2, 3))).max(axis=0, initial=0.0)
                history.append(np.where(active, fro, np.nan))
            if active.all():
                x = y
            else:
                x = np.where(active[None, :, None, None], y, x)
            residual = np.where(active, step, residual)
            iterations = np.where(active, k, iterations)
            bad = active & ~(np.isfinite(sizes) & (sizes <= blowup))
            good = active & ~bad & (step < tol)
            status[bad] = 1
            status[good] = 0
            active &= ~(bad | good)
            if not active.any():
                break
    values = {v: x[i] for i, v in enumerate(sys.variables)}
    for i in comp.shifted:
        v = sys.variables[i]
        values[v] = values[v] + np.eye(n)
    names = [Status.CONVERGED, Status.DIVERGED, Status.MAX_ITER]
    return BatchResult(values, [names[s] for s in status], iterations, residual, history)


def iterate(
    sys: EquationSystem,
    sub: Substitution,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    blowup: float = DEFAULT_BLOWUP,
    record_history: bool = False,
) -> Solution:
    """Solve one system under one substitution, starting from zero."""
    mats = {t: sub[t][None] for t in sys.terminals}
    if not mats:
        mats = {"": np.zeros((1, sub.dim, sub.dim))}
    res = solve_batch(sys, mats, tol, max_iter, blowup, record_history)
    hist = [float(h[0]) for h in res.history] if record_history else None
    return Solution(
        {v: a[0] for v, a in res.values.items()},
        int(res.iterations[0]),
        float(res.residual[0]),
        res.status[0],
        hist,
    )


def unshift(sys: EquationSystem, assignment: Mapping[str, Matrix]) -> dict[str, Matrix]:
    """Map a returned assignment back to the solver's own coordinates."""
    out = dict(assignment)
    for v in sys.shifted:
        out[v] = out[v] - np.eye(out[v].shape[0])
    return out


def evaluate_rhs(sys: EquationSystem, sub: Substitution, assignment: Mapping[str, Matrix]) -> dict[str, Matrix]:
    """``F(X)`` without the renaming inverse, in solver coordinates."""
    return {v: evaluate_polynomial(sys.rhs[v], sub, assignment) for v in sys.variables}


def fixed_point_residual(sys: EquationSystem, sub: Substitution, assignment: Mapping[str, Matrix]) -> float:
    """``max |X - (I - Lambda)^-1 F(X)|`` at a returned assignment."""
    x = unshift(sys, assignment)
    y = apply_linear_inverse(sys.linear_part, evaluate_rhs(sys, sub, x), sys.linear_order())
    return max(float(np.max(np.abs(x[v] - y[v]))) for v in sys.variables)
