"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CfgMatrixError(Exception):
    """Base class for every error raised by this package."""


class GrammarError(CfgMatrixError, ValueError):
    """Invalid grammar text or structure."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndefinedNonterminal(GrammarError):
    def __init__(self, name: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"undefined nonterminal {name}{where}")
        self.name = name
        self.line = line
        self.column = column


class RenamingCycle(GrammarError):
    """Cycle among renaming terms: (I - Lambda) has no inverse, ambiguity is infinite."""

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("renaming cycle: " + " -> ".join(self.cycle))


class NonCancellingConstant(CfgMatrixError):
    """The identity shift left a net identity term in some equation."""

    def __init__(self, variable: str, count: int):
        self.variable = variable
        self.count = count
        super().__init__(
            f"equation for {variable} keeps a net identity term (coefficient {count}) "
            "after the epsilon shift; nonterminals that are nullable only through "
            "other nonterminals are not supported"
        )


class UnboundedAmbiguity(CfgMatrixError):
    """Some word has infinitely many derivations, so coefficients are undefined."""


class OracleBudgetExceeded(CfgMatrixError):
    def __init__(self, checked_len: int, states: int):
        self.checked_len = checked_len
        self.states = states
        super().__init__(
            f"oracle state budget exceeded ({states} states); "
            f"words up to length {checked_len} were fully checked"
        )


class SecondClassGrammar(CfgMatrixError):
    """Both grammars fail the scalar growth probe; matrix comparison does not apply."""


class EvidenceMismatch(CfgMatrixError):
    """Recorded evidence does not belong to the grammars given for replay."""
