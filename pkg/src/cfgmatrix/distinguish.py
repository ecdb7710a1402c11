"""Separating finite sets of equal-length words with matrix substitutions.

* :func:`lemma1_substitution` builds 0/1 shift operators on the suffixes of
  the words.  Applied to ``e0`` a word lands on its own basis vector, so
  any two different multisets are separated exactly.
* :func:`condition_p` compares the polynomials that upper-triangular 2x2
  matrices ``[[u, v], [0, 1]]`` produce.  Inequality means some such 2x2
  substitution separates the sets.
* :func:`numeric_2x2_identity_check` looks for a separating dense
  substitution at random.
* :func:`census_sweep` enumerates small languages and reports the pairs no
  2x2 substitution seems to separate.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .linalg import Substitution, frobenius_norm


@dataclass(frozen=True, order=True)
class WordSet:
    """A multiset of words of one common length; letters are single characters."""

    words: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(sorted(self.words)))
        if not self.words:
            raise ValueError("empty word set")
        lengths = {len(w) for w in self.words}
        if len(lengths) != 1:
            raise ValueError(f"words of different lengths: {sorted(lengths)}")
        if 0 in lengths:
            raise ValueError("the empty word is not allowed")

    @classmethod
    def of(cls, words: Union[str, Iterable[str]]) -> "WordSet":
        if isinstance(words, str):
            words = [w.strip() for w in words.split(",") if w.strip()]
        return cls(tuple(words))

    @property
    def length(self) -> int:
        return len(self.words[0])

    @property
    def letters(self) -> set[str]:
        return {a for w in self.words for a in w}

    def __str__(self) -> str:
        return ",".join(self.words)


def _same_length(u: WordSet, v: WordSet) -> None:
    if u.length != v.length:
        raise ValueError(f"word lengths differ: {u.length} vs {v.length}")


def word_matrix(word: str, sub: Substitution) -> np.ndarray:
    out = np.eye(sub.dim)
    for a in word:
        out = out @ sub[a]
    return out


def wordset_matrix(ws: WordSet, sub: Substitution) -> np.ndarray:
    return sum((word_matrix(w, sub) for w in ws.words), np.zeros((sub.dim, sub.dim)))


# -- suffix construction ---------------------------------------------------

def suffix_basis(u: WordSet, v: WordSet) -> list[str]:
    """Basis labels: ``""`` for e0, then every nonempty suffix by (length, text)."""
    suffixes = {w[i:] for w in u.words + v.words for i in range(len(w))}
    return [""] + sorted(suffixes, key=lambda s: (len(s), s))


def lemma1_substitution(u: WordSet, v: WordSet) -> tuple[Substitution, int]:
    """Shift operators that send ``e0`` to ``e_w`` for every word ``w``.

    ``mu_a`` maps ``e_s`` to ``e_{as}`` when ``as`` is a suffix and to zero
    otherwise (``e0`` plays the empty suffix).  Returns the substitution and
    the index of ``e0``; ``U(mu) e0`` and ``V(mu) e0`` are the multiplicity
    vectors of U and V, so they differ whenever the multisets do.
    """
    _same_length(u, v)
    if u.words == v.words:
        raise ValueError("the word sets are equal")
    basis = suffix_basis(u, v)
    pos = {s: i for i, s in enumerate(basis)}
    n = len(basis)
    mats = {}
    for a in sorted(u.letters | v.letters):
        m = np.zeros((n, n))
        for s, col in pos.items():
            row = pos.get(a + s)
            if row is not None:
                m[row, col] = 1.0
        mats[a] = m
    bound = max(frobenius_norm(m) for m in mats.values())
    return Substitution(n, mats, bound), 0


# -- condition (P) ---------------------------------------------------------

@dataclass(frozen=True, order=True)
class CondPMonomial:
    """``prod u_a^k * v_b``; ``v is None`` for the diagonal product of u's."""

    u_exponents: tuple[tuple[str, int], ...]
    v: str | None

    def degree(self) -> int:
        return sum(k for _, k in self.u_exponents) + (self.v is not None)

    def __str__(self) -> str:
        parts = [f"u_{a}" + (f"^{k}" if k > 1 else "") for a, k in self.u_exponents]
        if self.v is not None:
            parts.append(f"v_{self.v}")
        return "*".join(parts) or "1"


def _exponents(letters: str) -> tuple[tuple[str, int], ...]:
    return tuple(sorted(Counter(letters).items()))


def word_monomials(word: str) -> list[CondPMonomial]:
    """Monomials of ``mu_w`` for ``mu_a = [[u_a, v_a], [0, 1]]``.

    The (1,2) entry of the product is ``sum_p u_{w_1} .. u_{w_(p-1)} v_{w_p}``
    and the (1,1) entry is ``u_{w_1} .. u_{w_N}``.
    """
    out = [CondPMonomial(_exponents(word[:p]), word[p]) for p in range(len(word))]
    out.append(CondPMonomial(_exponents(word), None))
    return out


def associated_polynomials(ws: WordSet) -> Counter:
    total: Counter = Counter()
    for w in ws.words:
        total.update(word_monomials(w))
    return total


def condition_p(u: WordSet, v: WordSet, mode: str = "multiset") -> bool:
    """True when the triangular 2x2 family separates U and V.

    ``mode="multiset"`` compares monomials with multiplicity, which is the
    exact criterion for the matrix sums.  ``mode="set"`` drops
    multiplicities.
    """
    _same_length(u, v)
    pu, pv = associated_polynomials(u), associated_polynomials(v)
    if mode == "multiset":
        return pu != pv
    if mode == "set":
        return set(pu) != set(pv)
    raise ValueError(f"unknown mode {mode!r}")


def triangular_witness(u: WordSet, v: WordSet, seed: int = 0, tries: int = 32) -> Substitution | None:
    """A triangular 2x2 substitution separating U and V, if condition (P) holds."""
    if not condition_p(u, v):
        return None
    rng = np.random.default_rng(seed)
    letters = sorted(u.letters | v.letters)
    for _ in range(tries):
        mats = {a: np.array([[rng.uniform(0.5, 1.5), rng.uniform(-1, 1)], [0.0, 1.0]]) for a in letters}
        sub = Substitution(2, mats, max(frobenius_norm(m) for m in mats.values()))
        if np.max(np.abs(wordset_matrix(u, sub) - wordset_matrix(v, sub))) > 1e-9:
            return sub
    return None


# -- random dense check ----------------------------------------------------

@dataclass(frozen=True)
class AlwaysEqual:
    trials: int
    max_rel_diff: float


@dataclass(frozen=True)
class DistinguishedBy:
    substitution: Substitution
    trial: int
    rel_diff: float


def _batch_products(words: Sequence[str], mats: dict[str, np.ndarray]) -> np.ndarray:
    """Products for all words at once: shape ``(len(words), trials, n, n)``."""
    n_letters = len(words[0])
    idx = {a: i for i, a in enumerate(sorted(mats))}
    stack = np.stack([mats[a] for a in sorted(mats)])  # (letters, T, n, n)
    codes = np.array([[idx[a] for a in w] for w in words])
    prod = stack[codes[:, 0]]
    for j in range(1, n_letters):
        prod = prod @ stack[codes[:, j]]
    return prod


def _relative_diffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = np.abs(a - b).max(axis=(-2, -1))
    scale = np.maximum(np.sqrt((a * a).sum(axis=(-2, -1))), np.sqrt((b * b).sum(axis=(-2, -1))))
    return diff / np.maximum(scale, 1e-300)


def numeric_2x2_identity_check(
    u: WordSet,
    v: WordSet,
    trials: int = 1000,
    seed: int = 0,
    dim: int = 2,
    tol: float = 1e-7,
) -> Union[AlwaysEqual, DistinguishedBy]:
    """Evaluate both sums on ``trials`` random dense substitutions.

    Entries are uniform in ``[-1, 1]``.  The first trial whose relative
    difference exceeds ``tol`` is returned; otherwise the largest relative
    difference seen is reported as evidence of an identity.
    """
    _same_length(u, v)
    rng = np.random.default_rng(seed)
    letters = sorted(u.letters | v.letters)
    mats = {a: rng.uniform(-1.0, 1.0, size=(trials, dim, dim)) for a in letters}
    su = _batch_products(u.words, mats).sum(axis=0)
    sv = _batch_products(v.words, mats).sum(axis=0)
    rel = _relative_diffs(su, sv)
    hits = np.flatnonzero(rel > tol)
    if hits.size:
        t = int(hits[0])
        chosen = {a: mats[a][t].copy() for a in letters}
        sub = Substitution(dim, chosen, max(frobenius_norm(m) for m in chosen.values()), seed)
        return DistinguishedBy(sub, t, float(rel[t]))
    return AlwaysEqual(trials, float(rel.max()) if trials else 0.0)


# -- census ----------------------------------------------------------------

CENSUS_LIMITS = {"alphabet": 3, "max_words": 3, "max_len": 5}


@dataclass(frozen=True)
class CensusEntry:
    u: WordSet
    v: WordSet
    condition_p: bool
    trials: int
    verdict: str
    max_rel_diff: float

    def to_json(self) -> dict:
        return {
            "U": list(self.u.words),
            "V": list(self.v.words),
            "condition_p": self.condition_p,
            "trials": self.trials,
            "verdict": self.verdict,
            "max_rel_diff": self.max_rel_diff,
        }


def _combinations(n: int, k: int) -> np.ndarray:
    """All increasing k-tuples from ``range(n)`` as an ``(C(n,k), k)`` array."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int32)
    if k == 1:
        return np.arange(n, dtype=np.int32)[:, None]
    blocks = []
    for first in range(n - k + 1):
        rest = _combinations(n - first - 1, k - 1) + first + 1
        blocks.append(np.hstack([np.full((len(rest), 1), first, dtype=np.int32), rest]))
    return np.vstack(blocks) if blocks else np.zeros((0, k), dtype=np.int32)


def _relabel(ws: WordSet, perm: dict[str, str]) -> WordSet:
    return WordSet(tuple("".join(perm[a] for a in w) for w in ws.words))


def canonical_pair(u: WordSet, v: WordSet) -> tuple[WordSet, WordSet]:
    return (u, v) if u.words <= v.words else (v, u)


def _perm_canonical(u: WordSet, v: WordSet, alphabet: Sequence[str]):
    best = None
    for image in itertools.permutations(alphabet):
        perm = dict(zip(alphabet, image))
        cand = canonical_pair(_relabel(u, perm), _relabel(v, perm))
        key = (cand[0].words, cand[1].words)
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


def _bucket_pairs(sorted_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``i < j`` of positions sharing a key in a sorted key array."""
    starts = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
    sizes = np.diff(np.r_[starts, len(sorted_keys)])
    left, right = [], []
    for size in np.unique(sizes[sizes > 1]):
        i, j = np.triu_indices(int(size), 1)
        base = starts[sizes == size][:, None]
        left.append((base + i).ravel())
        right.append((base + j).ravel())
    if not left:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(left), np.concatenate(right)


def census_sweep(
    alphabet: Union[str, Iterable[str]],
    max_words: int,
    max_len: int,
    trials: int = 1000,
    seed: int = 0,
    *,
    exact_words: bool = False,
    exact_len: bool = False,
    dedupe_permutations: bool = False,
    screen_trials: int = 2,
    chunk: int = 200_000,
) -> list[CensusEntry]:
    """Pairs of distinct languages of equal-length words no 2x2 matrix separates.

    Languages are sets of ``1..max_words`` words (exactly ``max_words`` with
    ``exact_words``) of one length ``1..max_len`` (exactly ``max_len`` with
    ``exact_len``).  A pair can only survive if it fails condition (P), so
    languages are bucketed by a random linear hash of their associated
    polynomials and only pairs inside a bucket are examined.  Those are
    screened with ``screen_trials`` random dense 2x2 substitutions; the
    survivors are checked exactly for condition (P) and confirmed with
    ``trials`` further substitutions.
    """
    letters = sorted(set(alphabet))
    if not letters:
        raise ValueError("empty alphabet")
    if (
        len(letters) > CENSUS_LIMITS["alphabet"]
        or max_words > CENSUS_LIMITS["max_words"]
        or max_len > CENSUS_LIMITS["max_len"]
    ):
        raise ValueError(f"census parameters exceed the desk-scale limits {CENSUS_LIMITS}")
    if max_words < 1 or max_len < 1:
        raise ValueError("max_words and max_len must be positive")

    rng = np.random.default_rng(seed)
    lengths = [max_len] if exact_len else list(range(1, max_len + 1))
    sizes = [max_words] if exact_words else list(range(1, max_words + 1))
    mono_weights: dict[CondPMonomial, int] = {}
    # shared random substitutions: every pair sees the same matrices
    confirm = {a: rng.uniform(-1.0, 1.0, size=(trials, 2, 2)) for a in letters}
    screen = {a: rng.uniform(-1.0, 1.0, size=(screen_trials, 2, 2)) for a in letters}

    found: dict[tuple, CensusEntry] = {}
    for n in lengths:
        words = ["".join(p) for p in itertools.product(letters, repeat=n)]
        word_hash = np.zeros(len(words), dtype=np.uint64)
        for i, w in enumerate(words):
            h = 0
            for mono in word_monomials(w):
                if mono not in mono_weights:
                    mono_weights[mono] = int(rng.integers(0, 2**63)) * 2 + 1
                h = (h + mono_weights[mono]) % 2**64
            word_hash[i] = h
        screen_prod = _batch_products(words, screen)
        confirm_prod = _batch_products(words, confirm) if trials else None
        for k in sizes:
            if k > len(words):
                continue
            combos = _combinations(len(words), k)
            hashes = word_hash[combos].sum(axis=1, dtype=np.uint64)  # wraps mod 2**64
            order = np.argsort(hashes, kind="stable")
            left, right = _bucket_pairs(hashes[order])
            for lo in range(0, len(left), chunk):
                a_rows = combos[order[left[lo:lo + chunk]]]
                b_rows = combos[order[right[lo:lo + chunk]]]
                sa = screen_prod[a_rows].sum(axis=1)
                sb = screen_prod[b_rows].sum(axis=1)
                keep = ~np.any(_relative_diffs(sa, sb) > 1e-7, axis=1)
                for a_row, b_row in zip(a_rows[keep], b_rows[keep]):
                    u = WordSet(tuple(words[i] for i in a_row))
                    v = WordSet(tuple(words[i] for i in b_row))
                    if condition_p(u, v):
                        continue
                    rel_max = 0.0
                    if trials:
                        rel = _relative_diffs(confirm_prod[a_row].sum(axis=0), confirm_prod[b_row].sum(axis=0))
                        if np.any(rel > 1e-7):
                            continue
                        rel_max = float(rel.max())
                    pair = _perm_canonical(u, v, letters) if dedupe_permutations else canonical_pair(u, v)
                    key = (pair[0].words, pair[1].words)
                    if key not in found:
                        found[key] = CensusEntry(pair[0], pair[1], False, trials, "AlwaysEqual", rel_max)
    return [found[k] for k in sorted(found)]


def exceptional_family(seed_pair: tuple[WordSet, WordSet] | None = None) -> list[tuple[WordSet, WordSet]]:
    """Orbit of the exceptional pair under letter permutations and c -> a, c -> b.

    Images where the two languages coincide are dropped.
    """
    if seed_pair is None:
        seed_pair = (WordSet.of("aabca,abaac,bacaa"), WordSet.of("aabac,abcaa,baaca"))
    u0, v0 = seed_pair
    letters = sorted(u0.letters | v0.letters)
    maps = [dict(zip(letters, p)) for p in itertools.permutations(letters)]
    out = set()
    for first in ({a: a for a in letters}, {**{a: a for a in letters}, "c": "a"}, {**{a: a for a in letters}, "c": "b"}):
        for perm in maps:
            image = {a: perm[first[a]] for a in letters}
            u, v = _relabel(u0, image), _relabel(v0, image)
            if u.words != v.words:
                out.add(canonical_pair(u, v))
    return sorted(out, key=lambda p: (p[0].words, p[1].words))
