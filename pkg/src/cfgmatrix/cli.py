"""Command-line front end.

Exit codes: ``compare`` returns 0 (ProbablyEquivalent), 1 (Different),
2 (Inconclusive) or 3 (ClassMismatch); 4 signals an error in the input or
the computation and 64 a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import distinguish as dist
from .engine import CompareConfig, compare, replay
from .eqsystem import compile_grammar, contraction_params, render_system
from .errors import CfgMatrixError
from .grammar import Converged, Grammar, analyze_structure, parse_grammar, scalar_class_probe
from .linalg import random_substitution, scalar_substitution
from .oracle import DEFAULT_LEN_GUARD, format_word, series_slice
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, iterate

EXIT_ERROR = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive integers")
    return dims


def load_grammar(arg: str) -> Grammar:
    """Read a grammar file, or parse the argument itself if it looks like rules."""
    path = Path(arg)
    if path.is_file():
        return parse_grammar(path.read_text())
    if "->" in arg or "→" in arg:
        return parse_grammar(arg)
    raise UsageError(f"no such grammar file: {arg}")


def _emit_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


# -- subcommands -----------------------------------------------------------

def cmd_compare(args) -> int:
    g1, g2 = load_grammar(args.left), load_grammar(args.right)
    try:
        cfg = CompareConfig(
            dims=args.dims,
            trials_per_dim=args.trials,
            seed=args.seed,
            equal_tol=args.tol_equal,
            different_tol=args.tol_diff,
            oracle_len=args.oracle_len,
            delta_override=args.delta,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    v = compare(g1, g2, cfg)
    if args.json:
        _emit_json(v.to_json(timestamp=not args.no_timestamp))
        return v.exit_code
    print(f"outcome: {v.outcome.value}")
    print(f"reason: {v.reason}")
    if v.delta is not None:
        print(f"delta: {v.delta:.6g}")
        diffs = [d for d in v.diffs if d is not None]
        print(f"trials: {v.trials_run}, max normalized diff: {max(diffs):.3e}" if diffs else f"trials: {v.trials_run}")
    if v.witness_trial is not None:
        t = v.trials[v.witness_trial]
        print(f"separating trial: dim {t.dim}, trial {t.trial}, diff {t.diff:.3e} (replay with --json evidence)")
    if v.oracle is not None:
        w = v.oracle.witness
        if w is not None:
            print(f"witness word: {format_word(w.word)} (coefficients {w.coeff_left} vs {w.coeff_right})")
        else:
            print(f"oracle: no witness up to length {v.oracle.checked_len}")
    if v.matrix_only:
        print("note: matrix-only evidence, no witness word within the oracle length")
    if not args.no_timestamp:
        print(f"wall time: {v.wall_time:.3f} s")
    return v.exit_code


def cmd_solve(args) -> int:
    g = load_grammar(args.grammar)
    sys_ = compile_grammar(g)
    nbar, dmax = contraction_params(sys_)
    if args.scalar is not None:
        sub = scalar_substitution(sys_.terminals, args.scalar)
    else:
        delta = args.delta if args.delta is not None else dmax
        sub = random_substitution(sys_.terminals, args.dim, delta, args.seed)
    sol = iterate(sys_, sub, tol=args.tol, max_iter=args.max_iter)
    if args.json:
        doc = sol.to_json()
        doc.update({"system": render_system(sys_), "nbar": nbar, "delta_max": dmax, "substitution": sub.to_json()})
        _emit_json(doc)
    else:
        print(render_system(sys_))
        print(f"nbar: {nbar}, delta_max: {dmax:.6g}")
        print(f"status: {sol.status.value}, iterations: {sol.iterations}, residual: {sol.residual:.3e}")
        with np.printoptions(precision=15):
            for v in sys_.variables:
                print(f"{v} =\n{sol.assignment[v]}")
    return 0 if sol.converged else 2


def cmd_enumerate(args) -> int:
    g = load_grammar(args.grammar)
    sl = series_slice(g, args.max_len, guard=DEFAULT_LEN_GUARD)
    if args.json:
        _emit_json({
            "max_len": sl.max_len,
            "stabilized": sl.stabilized,
            "coefficients": [{"word": format_word(w), "coeff": sl.coefficients[w]} for w in sl.words()],
        })
    else:
        for line in sl.lines():
            print(line)
    if not sl.stabilized:
        print("warning: slice did not stabilize (possibly unbounded ambiguity)", file=sys.stderr)
        return 2
    return 0


def cmd_distinguish(args) -> int:
    try:
        u, v = dist.WordSet.of(args.left), dist.WordSet.of(args.right)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc: dict = {"U": list(u.words), "V": list(v.words), "method": args.method}
    if args.method == "condp":
        ok = dist.condition_p(u, v, mode=args.mode)
        doc.update({"mode": args.mode, "condition_p": ok})
        text = [f"condition P: {'satisfied' if ok else 'not satisfied'}"]
    elif args.method == "suffix":
        sub, idx = dist.lemma1_substitution(u, v)
        e0 = np.zeros(sub.dim)
        e0[idx] = 1.0
        uv = dist.wordset_matrix(u, sub) @ e0
        vv = dist.wordset_matrix(v, sub) @ e0
        basis = dist.suffix_basis(u, v)
        separated = bool(np.any(uv != vv))
        doc.update({"dim": sub.dim, "basis": basis, "U_e0": uv.tolist(), "V_e0": vv.tolist(),
                    "separated": separated, "substitution": sub.to_json()})
        text = [f"dim: {sub.dim}", f"U(mu)e0: {uv.astype(int).tolist()}", f"V(mu)e0: {vv.astype(int).tolist()}",
                f"separated: {separated}"]
    else:
        res = dist.numeric_2x2_identity_check(u, v, trials=args.trials, seed=args.seed, dim=args.dim)
        if isinstance(res, dist.DistinguishedBy):
            doc.update({"verdict": "DistinguishedBy", "trial": res.trial, "rel_diff": res.rel_diff,
                        "substitution": res.substitution.to_json()})
            text = [f"distinguished by trial {res.trial} (relative diff {res.rel_diff:.3e})"]
        else:
            doc.update({"verdict": "AlwaysEqual", "trials": res.trials, "max_rel_diff": res.max_rel_diff})
            text = [f"always equal over {res.trials} trials (max relative diff {res.max_rel_diff:.3e})"]
    if args.json:
        _emit_json(doc)
    else:
        print("\n".join(text))
    return 0


def cmd_census(args) -> int:
    try:
        entries = dist.census_sweep(
            args.alphabet, args.max_words, args.max_len, args.trials, args.seed,
            exact_words=args.exact_words, exact_len=args.exact_len,
            dedupe_permutations=args.dedupe,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for e in entries:
        print(json.dumps(e.to_json(), sort_keys=True))
    return 0


def cmd_classify(args) -> int:
    g = load_grammar(args.grammar)
    rep = analyze_structure(g)
    mu = args.mu if args.mu is not None else 0.9 / (max(rep.nbar, 1) * max(len(g.terminals), 1))
    doc = {
        "nonterminals": len(g.nonterminals),
        "productions": len(g.productions),
        "terminals": list(g.terminals),
        "nullable": sorted(rep.nullable),
        "renaming_cyclic": rep.renaming_cyclic,
        "nbar": rep.nbar,
        "mu": mu,
    }
    if rep.renaming_cyclic:
        doc["class"] = "second"
        doc["probe"] = "renaming cycle"
    else:
        res = scalar_class_probe(g, mu)
        conv = isinstance(res, Converged)
        doc["class"] = "first" if conv else "second"
        doc["probe"] = "Converged" if conv else "Diverged"
        doc["probe_iterations"] = res.iterations if conv else res.iteration
    if args.json:
        _emit_json(doc)
    else:
        for k in ("nonterminals", "productions", "nbar", "nullable", "renaming_cyclic", "mu", "probe", "class"):
            print(f"{k}: {doc[k]}")
    return 0 if doc["class"] == "first" else 3


def cmd_replay(args) -> int:
    try:
        evidence = json.loads(Path(args.evidence).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read evidence: {exc}") from None
    diffs = replay(evidence, load_grammar(args.left), load_grammar(args.right))
    if args.json:
        _emit_json({"diffs": diffs, "reproduced": True})
    else:
        for t, d in zip(evidence["trials"], diffs):
            print(f"dim {t['dim']} trial {t['trial']}: {d!r}")
        print("reproduced: all recorded differences match")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    defaults = CompareConfig()
    p = _Parser(prog="cfgmatrix", description="Compare context-free grammars with matrix substitutions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compare", help="compare two grammars")
    c.add_argument("left")
    c.add_argument("right")
    c.add_argument("--dims", type=_dims, default=defaults.dims, help="matrix dimensions, e.g. 2,3")
    c.add_argument("--trials", type=int, default=defaults.trials_per_dim, help="trials per dimension")
    c.add_argument("--seed", type=int, default=defaults.seed)
    c.add_argument("--tol-equal", type=float, default=defaults.equal_tol)
    c.add_argument("--tol-diff", type=float, default=defaults.different_tol)
    c.add_argument("--oracle-len", type=int, default=defaults.oracle_len)
    c.add_argument("--delta", type=float, default=None, help="matrix norm cap (default: contraction bound)")
    c.add_argument("--json", action="store_true")
    c.add_argument("--no-timestamp", action="store_true", help="omit timing fields")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("solve", help="solve one grammar's system under a substitution")
    s.add_argument("grammar")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scalar", type=float, default=None, help="substitute this scalar for every terminal")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("enumerate", help="list words and ambiguity coefficients up to a length")
    e.add_argument("grammar")
    e.add_argument("--max-len", type=int, required=True)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_enumerate)

    d = sub.add_parser("distinguish", help="separate two finite word sets")
    d.add_argument("--left", required=True, help="comma-separated words")
    d.add_argument("--right", required=True, help="comma-separated words")
    d.add_argument("--method", choices=["condp", "suffix", "numeric"], default="condp")
    d.add_argument("--mode", choices=["multiset", "set"], default="multiset")
    d.add_argument("--trials", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--dim", type=int, default=2)
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_distinguish)

    n = sub.add_parser("census", help="find word-set pairs no 2x2 substitution separates")
    n.add_argument("--alphabet", default="abc")
    n.add_argument("--max-words", type=int, default=3)
    n.add_argument("--max-len", type=int, default=5)
    n.add_argument("--trials", type=int, default=1000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--exact-words", action="store_true")
    n.add_argument("--exact-len", action="store_true")
    n.add_argument("--dedupe", action="store_true", help="identify pairs related by a letter permutation")
    n.set_defaults(func=cmd_census)

    k = sub.add_parser("classify", help="structure report and growth probe")
    k.add_argument("grammar")
    k.add_argument("--mu", type=float, default=None)
    k.add_argument("--json", action="store_true")
    k.set_defaults(func=cmd_classify)

    r = sub.add_parser("replay", help="recompute the differences recorded in a verdict")
    r.add_argument("evidence", help="JSON verdict written by compare --json")
    r.add_argument("left")
    r.add_argument("right")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cfgmatrix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CfgMatrixError, ValueError, FloatingPointError) as exc:
        print(f"cfgmatrix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
