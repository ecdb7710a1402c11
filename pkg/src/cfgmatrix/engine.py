"""Grammar comparison pipeline.

``compare`` decides whether two grammars have the same power series by
solving both equation systems under random matrix substitutions, then
cross-checks short words with the exact oracle.

Random substitutions are drawn with norms up to the contraction bound
``delta``.  Words of length ``k`` then weigh about ``delta**k``, so series
that differ only on long words can look identical at the bound.  Each trial
therefore climbs a ladder of scales ``delta * factor**j`` as long as both
systems still converge quickly, and keeps the largest difference seen.  If
the base rung itself fails (possible with an explicit ``delta``) the ladder
descends instead.  Every rung is recorded, so a verdict can be replayed bit
for bit.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .eqsystem import EquationSystem, compile_grammar, contraction_params
from .errors import (
    CfgMatrixError,
    EvidenceMismatch,
    OracleBudgetExceeded,
    SecondClassGrammar,
    UnboundedAmbiguity,
)
from .grammar import Diverged, Grammar, Production, analyze_structure, format_grammar, scalar_class_probe
from .linalg import Substitution, random_substitution
from .oracle import WitnessReport, min_distinguishing_word
from .solver import DEFAULT_BLOWUP, DEFAULT_MAX_ITER, DEFAULT_TOL, Status, solve_batch


class Outcome(str, Enum):
    PROBABLY_EQUIVALENT = "ProbablyEquivalent"
    DIFFERENT = "Different"
    INCONCLUSIVE = "Inconclusive"
    CLASS_MISMATCH = "ClassMismatch"


EXIT_CODES = {
    Outcome.PROBABLY_EQUIVALENT: 0,
    Outcome.DIFFERENT: 1,
    Outcome.INCONCLUSIVE: 2,
    Outcome.CLASS_MISMATCH: 3,
}


@dataclass(frozen=True)
class CompareConfig:
    dims: tuple[int, ...] = (2, 3)
    trials_per_dim: int = 10
    seed: int = 0
    equal_tol: float = 1e-10
    different_tol: float = 1e-7
    oracle_len: int = 8
    delta_override: float | None = None
    # solver
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    blowup: float = DEFAULT_BLOWUP
    # scale ladder
    ladder_factor: float = 2.0
    ladder_up: int = 6
    ladder_down: int = 8
    rung_max_iter: int = 200
    # oracle
    oracle_max_states: int | None = 20000

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be a nonempty list of positive integers")
        if self.trials_per_dim < 1:
            raise ValueError("trials_per_dim must be at least 1")
        if not 0 < self.equal_tol < self.different_tol:
            raise ValueError("need 0 < equal_tol < different_tol")
        if self.delta_override is not None and not self.delta_override > 0:
            raise ValueError("delta must be positive")
        if self.oracle_len < 0:
            raise ValueError("oracle_len must be nonnegative")
        if self.ladder_factor <= 1:
            raise ValueError("ladder_factor must exceed 1")

    def to_json(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "CompareConfig":
        return cls(**{k: (tuple(v) if k == "dims" else v) for k, v in doc.items()})


@dataclass
class Rung:
    scale: float
    status: tuple[str, str]
    iterations: tuple[int, int]
    diff: float | None  # None when the rung was not accepted

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "status": list(self.status),
            "iterations": list(self.iterations),
            "diff": self.diff,
        }


@dataclass
class TrialRecord:
    dim: int
    trial: int
    seed: tuple[int, int, int]
    substitution: Substitution
    rungs: list[Rung]

    @property
    def accepted(self) -> bool:
        return any(r.diff is not None for r in self.rungs)

    @property
    def diff(self) -> float | None:
        diffs = [r.diff for r in self.rungs if r.diff is not None]
        return max(diffs) if diffs else None

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "trial": self.trial,
            "seed": list(self.seed),
            "diff": self.diff,
            "substitution": self.substitution.to_json(),
            "rungs": [r.to_json() for r in self.rungs],
        }


@dataclass
class OracleReport:
    requested_len: int
    checked_len: int
    witness: WitnessReport | None
    budget_exhausted: bool = False

    def to_json(self) -> dict:
        return {
            "requested_len": self.requested_len,
            "checked_len": self.checked_len,
            "witness": self.witness.to_json() if self.witness else None,
            "budget_exhausted": self.budget_exhausted,
        }


@dataclass
class Verdict:
    outcome: Outcome
    config: CompareConfig
    fingerprints: tuple[str, str]
    delta: float | None = None
    trials: list[TrialRecord] = field(default_factory=list)
    witness_trial: int | None = None  # index into trials of the separating trial
    oracle: OracleReport | None = None
    matrix_only: bool = False
    reason: str = ""
    probes: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]

    @property
    def trials_run(self) -> int:
        return len(self.trials)

    @property
    def witness(self) -> WitnessReport | None:
        return self.oracle.witness if self.oracle else None

    @property
    def diffs(self) -> list[float | None]:
        return [t.diff for t in self.trials]

    @property
    def witness_substitution(self) -> Substitution | None:
        if self.witness_trial is None:
            return None
        t = self.trials[self.witness_trial]
        best = max((r for r in t.rungs if r.diff is not None), key=lambda r: r.diff)
        return t.substitution.scaled(best.scale)

    def to_json(self, timestamp: bool = True) -> dict:
        doc = {
            "outcome": self.outcome.value,
            "exit_code": self.exit_code,
            "reason": self.reason,
            "config": self.config.to_json(),
            "grammars": {"left": self.fingerprints[0], "right": self.fingerprints[1]},
            "probes": self.probes,
            "delta": self.delta,
            "trials_run": self.trials_run,
            "max_diff": max((d for d in self.diffs if d is not None), default=None),
            "witness_trial": self.witness_trial,
            "matrix_only": self.matrix_only,
            "oracle": self.oracle.to_json() if self.oracle else None,
            "trials": [t.to_json() for t in self.trials],
        }
        if timestamp:
            doc["timing"] = {
                "wall_time": self.wall_time,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            }
        return doc


# -- helpers ---------------------------------------------------------------

def canonical_grammar(g: Grammar) -> Grammar:
    """Same grammar with a fixed order of nonterminals and alternatives.

    The axiom comes first, other nonterminals by name; alternatives are
    sorted.  Floating-point sums then do not depend on how the input was
    written, which makes verdicts invariant under reordering.
    """
    nts = (g.axiom,) + tuple(sorted(n for n in g.nonterminals if n != g.axiom))
    pos = {n: i for i, n in enumerate(nts)}
    prods = sorted(g.productions, key=lambda p: (pos[p.lhs], p.rhs))
    return Grammar(nts, g.terminals, g.axiom, tuple(Production(p.lhs, p.rhs) for p in prods))


def fingerprint(g: Grammar) -> str:
    return hashlib.sha256(format_grammar(canonical_grammar(g)).encode()).hexdigest()


def probe_mu(g: Grammar) -> float:
    rep = analyze_structure(g)
    return 0.9 / (max(rep.nbar, 1) * max(len(g.terminals), 1))


def trial_substitution(terminals: Sequence[str], dim: int, delta: float, seed: int, trial: int) -> Substitution:
    return random_substitution(terminals, dim, delta, (seed, dim, trial))


def _normalized_diffs(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """``max|S1 - S2| / max(1, |S1|_F, |S2|_F)`` per trial."""
    diff = np.abs(s1 - s2).max(axis=(1, 2))
    n1 = np.sqrt((s1 * s1).sum(axis=(1, 2)))
    n2 = np.sqrt((s2 * s2).sum(axis=(1, 2)))
    return diff / np.maximum(1.0, np.maximum(n1, n2))


def _solve_rung(sys1, sys2, base: dict[str, np.ndarray], scales: np.ndarray, cfg: CompareConfig, max_iter: int):
    mats = {t: m * scales[:, None, None] for t, m in base.items()}
    r1 = solve_batch(sys1, {t: mats[t] for t in sys1.terminals} or mats, cfg.tol, max_iter, cfg.blowup)
    r2 = solve_batch(sys2, {t: mats[t] for t in sys2.terminals} or mats, cfg.tol, max_iter, cfg.blowup)
    diffs = _normalized_diffs(r1.values[sys1.axiom], r2.values[sys2.axiom])
    return r1, r2, diffs


def _run_ladder(sys1, sys2, base: dict[str, np.ndarray], cfg: CompareConfig) -> list[list[Rung]]:
    """Climb (or descend) the scale ladder for a batch of trials."""
    T = next(iter(base.values())).shape[0]
    rungs: list[list[Rung]] = [[] for _ in range(T)]

    def record(idx, scale, r1, r2, diffs, limit):
        ok = []
        for pos, t in enumerate(idx):
            st = (r1.status[pos], r2.status[pos])
            its = (int(r1.iterations[pos]), int(r2.iterations[pos]))
            good = st == (Status.CONVERGED, Status.CONVERGED) and max(its) <= limit
            rungs[t].append(Rung(scale, (st[0].value, st[1].value), its, float(diffs[pos]) if good else None))
            ok.append(good)
        return np.array(ok, dtype=bool)

    idx = np.arange(T)
    r1, r2, diffs = _solve_rung(sys1, sys2, base, np.ones(T), cfg, cfg.max_iter)
    ok = record(idx, 1.0, r1, r2, diffs, cfg.max_iter)

    # descend for trials whose base rung failed
    down = idx[~ok]
    scale = 1.0
    for _ in range(cfg.ladder_down):
        if not down.size:
            break
        scale /= cfg.ladder_factor
        sub = {t: m[down] for t, m in base.items()}
        r1, r2, diffs = _solve_rung(sys1, sys2, sub, np.full(down.size, scale), cfg, cfg.max_iter)
        good = record(down, scale, r1, r2, diffs, cfg.max_iter)
        down = down[~good]

    # climb while both systems converge quickly and nothing separates yet
    up = idx[ok & (diffs <= cfg.different_tol)]
    scale = 1.0
    for _ in range(cfg.ladder_up):
        if not up.size:
            break
        scale *= cfg.ladder_factor
        sub = {t: m[up] for t, m in base.items()}
        r1, r2, diffs = _solve_rung(sys1, sys2, sub, np.full(up.size, scale), cfg, cfg.rung_max_iter)
        good = record(up, scale, r1, r2, diffs, cfg.rung_max_iter)
        up = up[good & (diffs <= cfg.different_tol)]
    return rungs


def _run_oracle(g1: Grammar, g2: Grammar, cfg: CompareConfig) -> OracleReport:
    try:
        w = min_distinguishing_word(g1, g2, cfg.oracle_len, cfg.oracle_max_states)
        return OracleReport(cfg.oracle_len, cfg.oracle_len, w)
    except OracleBudgetExceeded as exc:
        return OracleReport(cfg.oracle_len, exc.checked_len, None, True)
    except UnboundedAmbiguity as exc:
        raise UnboundedAmbiguity(f"oracle cross-check failed: {exc}") from exc


def _compile(g: Grammar, side: str) -> EquationSystem:
    try:
        return compile_grammar(g)
    except CfgMatrixError as exc:
        exc.args = (f"{side} grammar: {exc}",)
        raise


def _probe(g: Grammar) -> dict:
    mu = probe_mu(g)
    res = scalar_class_probe(g, mu)
    if isinstance(res, Diverged):
        return {"mu": mu, "result": "Diverged", "iteration": res.iteration}
    return {"mu": mu, "result": "Converged", "iteration": res.iterations}


# -- public operations -----------------------------------------------------

def compare(g1: Grammar, g2: Grammar, cfg: CompareConfig | None = None) -> Verdict:
    """Compare the power series of two grammars; see the module docstring."""
    cfg = cfg or CompareConfig()
    start = time.perf_counter()
    g1, g2 = canonical_grammar(g1), canonical_grammar(g2)
    fps = (fingerprint(g1), fingerprint(g2))

    probes = {"left": _probe(g1), "right": _probe(g2)}
    conv = [p["result"] == "Converged" for p in probes.values()]
    if not any(conv):
        raise SecondClassGrammar("both grammars fail the scalar growth probe")
    if not all(conv):
        return Verdict(
            Outcome.CLASS_MISMATCH, cfg, fps, probes=probes,
            reason="exactly one grammar fails the scalar growth probe",
            wall_time=time.perf_counter() - start,
        )

    sys1, sys2 = _compile(g1, "left"), _compile(g2, "right")
    delta = cfg.delta_override
    if delta is None:
        delta = min(contraction_params(sys1)[1], contraction_params(sys2)[1])
    terminals = sorted(set(g1.terminals) | set(g2.terminals))

    trials: list[TrialRecord] = []
    for dim in cfg.dims:
        subs = [trial_substitution(terminals, dim, delta, cfg.seed, k) for k in range(cfg.trials_per_dim)]
        if terminals:
            base = {t: np.stack([s[t] for s in subs]) for t in terminals}
        else:
            base = {"": np.zeros((len(subs), dim, dim))}
        for k, (sub, rungs) in enumerate(zip(subs, _run_ladder(sys1, sys2, base, cfg))):
            trials.append(TrialRecord(dim, k, (cfg.seed, dim, k), sub, rungs))

    verdict = Verdict(Outcome.INCONCLUSIVE, cfg, fps, delta, trials, probes=probes)
    separating = [i for i, t in enumerate(trials) if t.diff is not None and t.diff > cfg.different_tol]
    oracle = _run_oracle(g1, g2, cfg) if cfg.oracle_len > 0 else None
    verdict.oracle = oracle
    witness = oracle.witness if oracle else None

    if separating:
        verdict.outcome = Outcome.DIFFERENT
        verdict.witness_trial = separating[0]
        verdict.matrix_only = witness is None
        verdict.reason = "a matrix substitution separates the axiom solutions"
    elif witness is not None:
        verdict.outcome = Outcome.DIFFERENT
        verdict.reason = "the oracle found a word with different coefficients"
    elif all(t.diff is not None and t.diff < cfg.equal_tol for t in trials):
        verdict.outcome = Outcome.PROBABLY_EQUIVALENT
        verdict.reason = "all trials agree and the oracle found no witness"
    elif any(not t.accepted for t in trials):
        verdict.reason = "some trials did not converge at any scale"
    else:
        verdict.reason = "differences fall between the equal and different tolerances"
    verdict.wall_time = time.perf_counter() - start
    return verdict


def replay(evidence: dict, g1: Grammar, g2: Grammar) -> list[float | None]:
    """Recompute every recorded rung and return the per-trial differences.

    ``evidence`` is a verdict document from :meth:`Verdict.to_json`.  Raises
    :class:`EvidenceMismatch` when the grammars do not match the recorded
    fingerprints or a recomputed difference is not bit-identical.
    """
    g1, g2 = canonical_grammar(g1), canonical_grammar(g2)
    fps = (fingerprint(g1), fingerprint(g2))
    recorded = (evidence["grammars"]["left"], evidence["grammars"]["right"])
    if fps != recorded:
        raise EvidenceMismatch("grammars do not match the fingerprints in the evidence")
    cfg = CompareConfig.from_json(evidence["config"])
    sys1, sys2 = compile_grammar(g1), compile_grammar(g2)
    out = []
    for t in evidence["trials"]:
        sub = Substitution.from_json(t["substitution"])
        names = sorted(sub.terminals)
        base = {a: sub[a][None] for a in names} or {"": np.zeros((1, sub.dim, sub.dim))}
        best = None
        for r in t["rungs"]:
            limit = cfg.max_iter if r["scale"] <= 1.0 else cfg.rung_max_iter
            r1, r2, diffs = _solve_rung(sys1, sys2, base, np.array([r["scale"]]), cfg, limit)
            st = [r1.status[0].value, r2.status[0].value]
            its = [int(r1.iterations[0]), int(r2.iterations[0])]
            good = st == ["Converged", "Converged"] and max(its) <= limit
            diff = float(diffs[0]) if good else None
            if st != r["status"] or its != r["iterations"] or diff != r["diff"]:
                raise EvidenceMismatch(
                    f"trial (dim {t['dim']}, {t['trial']}) scale {r['scale']}: "
                    f"recorded {r['diff']}, recomputed {diff}"
                )
            if diff is not None:
                best = diff if best is None else max(best, diff)
        out.append(best)
    return out
