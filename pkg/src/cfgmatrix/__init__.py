"""Compare context-free grammars through matrix substitutions into their series."""

from .errors import *  # noqa: F401,F403
from .grammar import Grammar, parse_grammar, format_grammar
from .eqsystem import EquationSystem, compile_grammar
from .linalg import Substitution, random_substitution, scalar_substitution
from .solver import Solution, Status, iterate

__version__ = "0.1.0"
