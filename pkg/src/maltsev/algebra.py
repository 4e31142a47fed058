"""Finite algebras given by operation tables.

Elements of a power A^L are numpy vectors of length L.  Tables are flat
arrays in lexicographic argument order, leftmost argument most significant,
so ``f(a0, ..., a_{r-1})`` lives at index ``sum(a_i * n**(r-1-i))``.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .terms import (Identity, OpSymbol, Signature, Term, app, iter_dag, ordered_variables,
                    print_term, var)

log = logging.getLogger(__name__)

DEFAULT_CAP = 2_000_000
# Tuple evaluations allowed in one closure before giving up.
DEFAULT_WORK_CAP = 400_000_000


class AlgebraError(ValueError):
    pass


class ResourceExceeded(RuntimeError):
    """A closure outgrew its configured element or work cap."""


@dataclass
class FiniteAlgebra:
    size: int
    operations: Dict[str, np.ndarray]
    arities: Dict[str, int]

    def __post_init__(self):
        if self.size < 1:
            raise AlgebraError("algebra must be nonempty")
        for name, table in self.operations.items():
            r = self.arities[name]
            table = np.asarray(table, dtype=np.int64)
            if table.ndim != 1 or table.shape[0] != self.size ** r:
                raise AlgebraError(
                    f"table of {name} has length {table.size}, expected {self.size ** r}")
            if table.size and (table.min() < 0 or table.max() >= self.size):
                raise AlgebraError(f"table of {name} has entries outside 0..{self.size - 1}")
            self.operations[name] = table

    @classmethod
    def from_tables(cls, size: int, ops: Mapping[str, Tuple[int, Sequence[int]]]) -> "FiniteAlgebra":
        return cls(size, {n: np.asarray(t, dtype=np.int64) for n, (r, t) in ops.items()},
                   {n: r for n, (r, _) in ops.items()})

    @classmethod
    def from_functions(cls, size: int, **funcs) -> "FiniteAlgebra":
        """Build tables from python callables, arity read from ``__code__``."""
        ops = {}
        for name, f in funcs.items():
            r = f.__code__.co_argcount
            ops[name] = (r, [f(*args) for args in itertools.product(range(size), repeat=r)])
        return cls.from_tables(size, ops)

    @classmethod
    def from_json(cls, data) -> "FiniteAlgebra":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        try:
            size = int(data["size"])
            ops = {name: (int(spec["arity"]), list(spec["table"]))
                   for name, spec in data["ops"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise AlgebraError(f"malformed algebra description: {exc}") from exc
        for name in ops:
            OpSymbol(name, ops[name][0])  # validates the name
        return cls.from_tables(size, ops)

    def to_json(self) -> dict:
        return {"size": self.size,
                "ops": {n: {"arity": self.arities[n], "table": self.operations[n].tolist()}
                        for n in self.operations}}

    @property
    def signature(self) -> Signature:
        return Signature(tuple(OpSymbol(n, self.arities[n]) for n in self.operations))

    def op(self, name: str, *args: int) -> int:
        idx = 0
        for a in args:
            idx = idx * self.size + a
        return int(self.operations[name][idx])

    def is_idempotent(self) -> bool:
        return not self.non_idempotent_ops()

    def non_idempotent_ops(self) -> List[str]:
        bad = []
        for name, table in self.operations.items():
            r = self.arities[name]
            diag = sum(self.size ** i for i in range(r))
            if any(table[a * diag] != a for a in range(self.size)):
                bad.append(name)
        return bad

    def with_operations(self, extra: Mapping[str, Tuple[int, np.ndarray]]) -> "FiniteAlgebra":
        ops = dict(self.operations)
        ar = dict(self.arities)
        for name, (r, table) in extra.items():
            ops[name] = np.asarray(table, dtype=np.int64)
            ar[name] = r
        return FiniteAlgebra(self.size, ops, ar)

    def reduct(self, names: Iterable[str]) -> "FiniteAlgebra":
        names = list(names)
        return FiniteAlgebra(self.size, {n: self.operations[n] for n in names},
                             {n: self.arities[n] for n in names})

    def apply_vectors(self, name: str, args: Sequence[np.ndarray]) -> np.ndarray:
        table = self.operations[name]
        if not args:
            return table[0]
        idx = np.asarray(args[0], dtype=np.int64)
        for a in args[1:]:
            idx = idx * self.size + a
        return table[idx]


# ---------------------------------------------------------------------------
# evaluation


def positional_variables(arity: int) -> List[str]:
    """Variable names bound to argument positions of a term operation."""
    if arity <= 3:
        return ["x", "y", "z"][:arity] if arity != 2 else ["x", "z"]
    return [f"v{i}" for i in range(arity)]


class Evaluator:
    """Vectorized, DAG-memoized evaluation of terms in one algebra.

    All variables are bound to numpy vectors of a common length; the memo is
    keyed on term identity so shared subterms are evaluated once.
    """

    def __init__(self, algebra: FiniteAlgebra, env: Mapping[str, np.ndarray]):
        self.algebra = algebra
        self.env = {k: np.asarray(v, dtype=np.int64) for k, v in env.items()}
        self.memo: Dict[Term, np.ndarray] = {}

    def __call__(self, t: Term) -> np.ndarray:
        hit = self.memo.get(t)
        if hit is not None:
            return hit
        A = self.algebra
        for s in iter_dag(t):
            if s in self.memo:
                continue
            if s.args is None:
                if s.head not in self.env:
                    raise AlgebraError(f"unbound variable {s.head}")
                self.memo[s] = self.env[s.head]
            else:
                if s.head not in A.operations:
                    raise AlgebraError(f"unknown operation {s.head}")
                if A.arities[s.head] != len(s.args):
                    raise AlgebraError(f"arity mismatch for {s.head}")
                self.memo[s] = A.apply_vectors(s.head, [self.memo[a] for a in s.args])
        return self.memo[t]


def assignment_grid(size: int, names: Sequence[str]) -> Dict[str, np.ndarray]:
    """All assignments of ``names`` in lexicographic order, as column vectors."""
    if not names:
        return {}
    grid = np.indices((size,) * len(names)).reshape(len(names), -1)
    return {n: grid[i].astype(np.int64) for i, n in enumerate(names)}


def evaluate(A: FiniteAlgebra, t: Term, assignment: Mapping[str, int]) -> int:
    env = {k: np.asarray([v], dtype=np.int64) for k, v in assignment.items()}
    return int(Evaluator(A, env)(t)[0])


def term_table(A: FiniteAlgebra, t: Term, names: Sequence[str]) -> np.ndarray:
    """Table of the term operation of ``t`` with arguments ``names`` in order."""
    env = assignment_grid(A.size, names)
    out = Evaluator(A, env)(t)
    if out.shape == ():
        out = np.full(A.size ** len(names), out)
    return np.broadcast_to(out, (A.size ** len(names),)).copy()


@dataclass
class IdentityResult:
    holds: bool
    counterexample: Optional[Dict[str, int]] = None
    values: Optional[Tuple[int, int]] = None

    def __bool__(self):
        return self.holds


def check_identity(A: FiniteAlgebra, identity: Identity) -> IdentityResult:
    """Exhaustively check an identity over all n^v assignments."""
    names = identity.variables
    env = assignment_grid(A.size, names)
    if not names:
        env = {}
    ev = Evaluator(A, env)
    lhs = np.broadcast_to(ev(identity.lhs), (A.size ** len(names),))
    rhs = np.broadcast_to(ev(identity.rhs), (A.size ** len(names),))
    bad = np.nonzero(lhs != rhs)[0]
    if bad.size == 0:
        return IdentityResult(True)
    i = int(bad[0])
    return IdentityResult(False, {n: int(env[n][i]) for n in names}, (int(lhs[i]), int(rhs[i])))


def interpret(A: FiniteAlgebra, interpretation: Mapping[str, Term],
              arities: Optional[Mapping[str, int]] = None) -> FiniteAlgebra:
    """Extend ``A`` by term operations named by the keys of ``interpretation``.

    The interpreting terms use positional variables (x, y, z for ternary).
    """
    extra = {}
    for name, t in interpretation.items():
        r = (arities or {}).get(name, 3)
        names = positional_variables(r)
        stray = t.variables - set(names)
        if stray:
            raise AlgebraError(f"interpretation of {name} uses variables {sorted(stray)}")
        extra[name] = (r, term_table(A, t, names))
    return A.with_operations(extra)


# ---------------------------------------------------------------------------
# subpowers


@dataclass
class FreeAlgebra:
    """A subuniverse of A^L with one witness term per element."""
    base: FiniteAlgebra
    generators: int
    elements: np.ndarray            # shape (N, L)
    witnesses: List[Term]
    index: Dict[bytes, int] = field(repr=False)
    levels: List[int] = field(default_factory=list)   # element count after each BFS round

    def __len__(self):
        return len(self.witnesses)

    @property
    def length(self) -> int:
        return self.elements.shape[1]

    def lookup(self, vector) -> Optional[int]:
        return self.index.get(_key(np.asarray(vector, dtype=np.uint8)))

    def vector(self, i: int) -> np.ndarray:
        return self.elements[i]

    def variables(self) -> List[str]:
        return ["x", "z"] if self.generators == 2 else ["x", "y", "z"][: self.generators]


def _key(row: np.ndarray) -> bytes:
    return np.ascontiguousarray(row, dtype=np.uint8).tobytes()


def projection_vectors(size: int, g: int) -> List[np.ndarray]:
    grid = np.indices((size,) * g).reshape(g, -1)
    return [grid[i].astype(np.uint8) for i in range(g)]


def generate_subuniverse(A: FiniteAlgebra, generators: Sequence[Tuple[np.ndarray, Term]],
                         *, cap: int = DEFAULT_CAP, work_cap: int = DEFAULT_WORK_CAP,
                         power: Optional[int] = None) -> FreeAlgebra:
    """Close ``generators`` under the operations of ``A`` acting coordinatewise.

    Closure is level-synchronous: round r applies every operation (in table
    order) to every argument tuple (lexicographic in element index) that
    uses at least one element found in round r-1.  New elements are appended
    in order of first production, so witnesses have minimal nesting depth
    and the element order is reproducible.
    """
    if A.size > 256:
        raise AlgebraError("elements must fit in a byte")
    if not generators:
        raise AlgebraError("need at least one generator")
    L = len(generators[0][0])
    n = A.size
    rows: List[np.ndarray] = []
    witnesses: List[Term] = []
    index: Dict[bytes, int] = {}
    for vec, w in generators:
        vec = np.asarray(vec, dtype=np.uint8)
        if vec.shape != (L,):
            raise AlgebraError("generators must share one length")
        k = _key(vec)
        if k not in index:
            index[k] = len(rows)
            rows.append(vec)
            witnesses.append(w)

    use_codes = L * np.log2(max(n, 2)) < 62
    weights = (n ** np.arange(L - 1, -1, -1, dtype=np.int64)) if use_codes else None
    known_codes = np.sort(np.array([int(r.astype(np.int64) @ weights) for r in rows], dtype=np.int64)) \
        if use_codes else None

    ops = [(name, A.arities[name], A.operations[name]) for name in A.operations]
    elements = np.stack(rows).astype(np.int64)
    levels = [len(rows)]
    frontier = 0
    work = 0
    while frontier < len(rows):
        old = len(rows)
        elements = np.stack(rows).astype(np.int64)
        for name, r, table in ops:
            for tuples, results in _round_products(elements, old, frontier, r, table, n):
                work += len(tuples)
                if work > work_cap:
                    raise ResourceExceeded(
                        f"closure work exceeded {work_cap} tuple evaluations at {len(rows)} elements")
                if use_codes:
                    codes = results @ weights
                    fresh = ~np.isin(codes, known_codes)
                    if not fresh.any():
                        continue
                    cand = codes[fresh]
                    _, first = np.unique(cand, return_index=True)
                    first.sort()
                    positions = np.nonzero(fresh)[0][first]
                    added = []
                    for p in positions:
                        vec = results[p].astype(np.uint8)
                        index[_key(vec)] = len(rows)
                        rows.append(vec)
                        witnesses.append(app(name, [witnesses[i] for i in tuples[p]]))
                        added.append(codes[p])
                    known_codes = np.union1d(known_codes, np.asarray(added, dtype=np.int64))
                else:
                    for p in range(len(tuples)):
                        vec = results[p].astype(np.uint8)
                        k = _key(vec)
                        if k not in index:
                            index[k] = len(rows)
                            rows.append(vec)
                            witnesses.append(app(name, [witnesses[i] for i in tuples[p]]))
                if len(rows) > cap:
                    raise ResourceExceeded(f"closure exceeded {cap} elements")
        frontier = old
        levels.append(len(rows))
    elements = np.stack(rows).astype(np.uint8)
    return FreeAlgebra(A, power if power is not None else 0, elements, witnesses, index, levels)


def _round_products(elements: np.ndarray, old: int, frontier: int, r: int,
                    table: np.ndarray, n: int, chunk: int = 1 << 20):
    """Yield (tuples, results) batches for one operation in one closure round."""
    if r == 0:
        if frontier == 0:
            L = elements.shape[1]
            yield np.zeros((1, 0), dtype=np.int64), np.full((1, L), table[0], dtype=np.int64)
        return
    if r == 1:
        idx = np.arange(frontier, old)
        if idx.size:
            yield idx[:, None], table[elements[idx]]
        return
    # iterate over the leading argument, vectorize the trailing r-1 arguments
    tail = np.indices((old,) * (r - 1)).reshape(r - 1, -1).T if old ** (r - 1) <= chunk * 8 else None
    for i0 in range(old):
        if tail is not None:
            rest = tail
        else:
            rest = np.indices((old,) * (r - 1)).reshape(r - 1, -1).T
        if i0 < frontier:
            mask = (rest >= frontier).any(axis=1)
            rest_sel = rest[mask]
        else:
            rest_sel = rest
        if rest_sel.size == 0:
            continue
        for start in range(0, len(rest_sel), chunk):
            part = rest_sel[start:start + chunk]
            idx = np.full(elements.shape[1], 0, dtype=np.int64)[None, :] + elements[i0][None, :]
            for j in range(r - 1):
                idx = idx * n + elements[part[:, j]]
            tuples = np.concatenate([np.full((len(part), 1), i0, dtype=np.int64), part], axis=1)
            yield tuples, table[idx]


def free_algebra(A: FiniteAlgebra, g: int, *, cap: int = DEFAULT_CAP,
                 work_cap: int = DEFAULT_WORK_CAP) -> FreeAlgebra:
    """The free algebra of V(A) on g generators, as a subpower of A^(A^g)."""
    if g not in (1, 2, 3):
        raise AlgebraError("free algebras are built for 1, 2 or 3 generators")
    names = ["x"] if g == 1 else (["x", "z"] if g == 2 else ["x", "y", "z"])
    gens = [(v, var(nm)) for v, nm in zip(projection_vectors(A.size, g), names)]
    return generate_subuniverse(A, gens, cap=cap, work_cap=work_cap, power=g)


def witness_check(F: FreeAlgebra) -> bool:
    """Every witness evaluates coordinatewise to its element."""
    names = F.variables()
    env = {nm: v.astype(np.int64) for nm, v in zip(names, projection_vectors(F.base.size, F.generators))}
    ev = Evaluator(F.base, env)
    return all(np.array_equal(ev(w), F.elements[i]) for i, w in enumerate(F.witnesses))


# ---------------------------------------------------------------------------
# relations


@dataclass
class BinRel:
    """A binary relation on {0..size-1} (elements of an algebra or indices
    into a free algebra), optionally with a witness term per pair."""
    size: int
    pairs: Set[Tuple[int, int]]
    witnesses: Dict[Tuple[int, int], Term] = field(default_factory=dict)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __len__(self):
        return len(self.pairs)

    def __le__(self, other: "BinRel") -> bool:
        return self.pairs <= other.pairs

    def __eq__(self, other) -> bool:
        return isinstance(other, BinRel) and self.size == other.size and self.pairs == other.pairs

    @classmethod
    def diagonal(cls, size: int) -> "BinRel":
        return cls(size, {(a, a) for a in range(size)})

    @classmethod
    def full(cls, size: int) -> "BinRel":
        return cls(size, set(itertools.product(range(size), repeat=2)))

    def successors(self) -> List[List[int]]:
        out = [[] for _ in range(self.size)]
        for a, b in sorted(self.pairs):
            out[a].append(b)
        return out

    def is_reflexive(self) -> bool:
        return all((a, a) in self.pairs for a in range(self.size))

    def is_transitive(self) -> bool:
        return transitive_closure(self).pairs == self.pairs


def transitive_closure(r: BinRel) -> BinRel:
    """Warshall's algorithm on integer bitsets; witnesses are dropped."""
    rows = [0] * r.size
    for a, b in r.pairs:
        rows[a] |= 1 << b
    for k in range(r.size):
        bit = 1 << k
        rk = rows[k]
        for i in range(r.size):
            if rows[i] & bit:
                rows[i] |= rk
    pairs = {(i, j) for i in range(r.size) for j in range(r.size) if rows[i] >> j & 1}
    return BinRel(r.size, pairs)


def relation_power(r: BinRel, k: int) -> BinRel:
    """r composed with itself k times (k >= 1)."""
    succ = r.successors()
    current = {(a, a) for a in range(r.size)}
    for _ in range(k):
        current = {(a, c) for a, b in current for c in succ[b]}
    return BinRel(r.size, current)


def is_subuniverse_of_square(A: FiniteAlgebra, r: BinRel) -> Optional[Tuple[str, tuple]]:
    """None if ``r`` is closed under every operation of A; else a witness."""
    pairs = sorted(r.pairs)
    for name in A.operations:
        arity = A.arities[name]
        for combo in itertools.product(pairs, repeat=arity):
            left = A.op(name, *(p[0] for p in combo))
            right = A.op(name, *(p[1] for p in combo))
            if (left, right) not in r.pairs:
                return name, combo
    return None


@dataclass
class Verdict:
    ok: bool
    reason: str = ""
    witness: object = None

    def __bool__(self):
        return self.ok


def is_admissible_preorder(A: FiniteAlgebra, r: BinRel) -> Verdict:
    bad = is_subuniverse_of_square(A, r)
    if bad is not None:
        return Verdict(False, f"not closed under {bad[0]}", bad)
    if not r.is_reflexive():
        missing = next(a for a in range(A.size) if (a, a) not in r.pairs)
        return Verdict(False, "not reflexive", (missing, missing))
    if not r.is_transitive():
        return Verdict(False, "not transitive")
    return Verdict(True)


def subuniverse_of_square(A: FiniteAlgebra, seed: Iterable[Tuple[int, int]]) -> BinRel:
    """Least subuniverse of A^2 containing ``seed``."""
    pairs = set(seed)
    changed = True
    while changed:
        changed = False
        current = sorted(pairs)
        for name in A.operations:
            for combo in itertools.product(current, repeat=A.arities[name]):
                p = (A.op(name, *(c[0] for c in combo)), A.op(name, *(c[1] for c in combo)))
                if p not in pairs:
                    pairs.add(p)
                    changed = True
    return BinRel(A.size, pairs)


def check_middle_absorption(A: FiniteAlgebra, B: Iterable[int], terms: Sequence[Term]) -> Verdict:
    """B middle absorbs A with respect to every ternary term in ``terms``.

    Each term must also be idempotent on A.  On failure the witness is
    ``(term, a, b, c)`` (with ``b`` omitted for idempotence failures).
    """
    B = sorted(set(B))
    if not B:
        raise AlgebraError("absorbing set must be nonempty")
    inside = np.zeros(A.size, dtype=bool)
    inside[B] = True
    for t in terms:
        table = term_table(A, t, ["x", "y", "z"]).reshape(A.size, A.size, A.size)
        for a in range(A.size):
            if table[a, a, a] != a:
                return Verdict(False, "term is not idempotent", (t, a, a, a))
        for a in B:
            for c in B:
                for b in range(A.size):
                    if not inside[table[a, b, c]]:
                        return Verdict(False, f"{print_term(t)}({a},{b},{c}) leaves B", (t, a, b, c))
    return Verdict(True)
