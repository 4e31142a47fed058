"""Deciding Maltsev conditions of a finite idempotent algebra.

Everything is read off two relations on the two-generated free algebra F2:

    F = {(t(x,x,z), t(x,z,z)) : t in F3}
    E = {(t(x,x,z), t(x,z,z)) : t in F3, t(x,y,x) = x}

Directed Jonsson terms are the witnesses along an E-path from x to z,
Hagemann-Mitschke terms along an F-path from z to x, Pixley terms along an
E-path from z to x, and directed Gumm terms along an E-path from x into
M = {t(x,z,z) : t(x,x,z) = z}.
"""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import (DEFAULT_CAP, DEFAULT_WORK_CAP, AlgebraError, BinRel, Evaluator,
                      FiniteAlgebra, FreeAlgebra, ResourceExceeded, Verdict, free_algebra,
                      is_admissible_preorder, projection_vectors, term_table, transitive_closure)
from .chains import (ChainCheck, TermChain, convert_dj_to_simultaneous, verify_chain)
from .terms import Term, X, Y, Z, print_term, substitute, ternary

log = logging.getLogger(__name__)

DEFAULT_KMAX = 8


class NotIdempotentError(AlgebraError):
    pass


class SoundnessError(RuntimeError):
    """An extracted object failed its own verification; indicates a bug."""


@dataclass
class EFStructure:
    algebra: FiniteAlgebra
    f2: FreeAlgebra
    f3: FreeAlgebra
    gset: List[int]                          # indices into f3
    E: BinRel                                # on f2 indices, witnesses from gset
    F: BinRel                                # on f2 indices, witnesses from f3
    xxz: np.ndarray                          # f3 index -> f2 index of t(x,x,z)
    xzz: np.ndarray                          # f3 index -> f2 index of t(x,z,z)
    build_seconds: float = 0.0

    @property
    def x(self) -> int:
        return self.f2.lookup(projection_vectors(self.algebra.size, 2)[0])

    @property
    def z(self) -> int:
        return self.f2.lookup(projection_vectors(self.algebra.size, 2)[1])

    def binary_term(self, i: int) -> Term:
        return self.f2.witnesses[i]

    def stats(self) -> dict:
        return {"f2": len(self.f2), "f3": len(self.f3), "gset": len(self.gset),
                "E_pairs": len(self.E), "F_pairs": len(self.F),
                "build_seconds": round(self.build_seconds, 4)}


def idempotent_reduct_f3(A: FiniteAlgebra, cap: int, work_cap: int) -> FreeAlgebra:
    """Ternary idempotent term operations of A (the free algebra of the idempotent reduct)."""
    full = free_algebra(A, 3, cap=cap, work_cap=work_cap)
    n = A.size
    diag = np.array([a * (n * n + n + 1) for a in range(n)])
    keep = [i for i in range(len(full)) if np.array_equal(full.elements[i][diag], np.arange(n))]
    rows = full.elements[keep]
    return FreeAlgebra(A, 3, rows, [full.witnesses[i] for i in keep],
                       {rows[j].tobytes(): j for j in range(len(keep))}, [len(keep)])


def build_EF(A: FiniteAlgebra, *, idempotent_reduct: bool = False, cap: int = DEFAULT_CAP,
             work_cap: int = DEFAULT_WORK_CAP) -> EFStructure:
    started = time.perf_counter()
    if not idempotent_reduct:
        bad = A.non_idempotent_ops()
        if bad:
            raise NotIdempotentError(f"operations {bad} are not idempotent")
        f3 = free_algebra(A, 3, cap=cap, work_cap=work_cap)
    else:
        f3 = idempotent_reduct_f3(A, cap, work_cap)
    n = A.size
    pairs = [(a, c) for a in range(n) for c in range(n)]
    idx_xxz = np.array([a * n * n + a * n + c for a, c in pairs])
    idx_xzz = np.array([a * n * n + c * n + c for a, c in pairs])
    idx_xyx = np.array([a * n * n + b * n + a for a in range(n) for b in range(n)])
    want_xyx = np.array([a for a in range(n) for b in range(n)])

    if idempotent_reduct:
        # F2 of the reduct: binary idempotent term operations, read off F3
        seen: Dict[bytes, int] = {}
        rows, wits = [], []
        for i in range(len(f3)):
            for vec, w in ((f3.elements[i][idx_xxz], ternary(f3.witnesses[i], X, X, Z)),):
                key = vec.tobytes()
                if key not in seen:
                    seen[key] = len(rows)
                    rows.append(vec)
                    wits.append(w)
        # projections first so x and z keep indices 0 and 1
        order = sorted(range(len(rows)), key=lambda j: (0 if j in _proj_positions(rows, n) else 1, j))
        rows = [rows[j] for j in order]
        wits = [wits[j] for j in order]
        f2 = FreeAlgebra(A, 2, np.stack(rows), wits, {r.tobytes(): j for j, r in enumerate(rows)}, [len(rows)])
    else:
        f2 = free_algebra(A, 2, cap=cap, work_cap=work_cap)

    xxz = np.empty(len(f3), dtype=np.int64)
    xzz = np.empty(len(f3), dtype=np.int64)
    for i in range(len(f3)):
        a = f2.lookup(f3.elements[i][idx_xxz])
        b = f2.lookup(f3.elements[i][idx_xzz])
        if a is None or b is None:
            raise SoundnessError("t(x,x,z) of a ternary term op is not in F2")
        xxz[i], xzz[i] = a, b
    in_g = (f3.elements[:, idx_xyx] == want_xyx[None, :]).all(axis=1)
    gset = [int(i) for i in np.nonzero(in_g)[0]]
    E = BinRel(len(f2), set())
    F = BinRel(len(f2), set())
    for i in range(len(f3)):
        p = (int(xxz[i]), int(xzz[i]))
        if p not in F.pairs:
            F.pairs.add(p)
            F.witnesses[p] = f3.witnesses[i]
        if in_g[i] and p not in E.pairs:
            E.pairs.add(p)
            E.witnesses[p] = f3.witnesses[i]
    ef = EFStructure(A, f2, f3, gset, E, F, xxz, xzz)
    ef.build_seconds = time.perf_counter() - started
    return ef


def _proj_positions(rows, n):
    px, pz = projection_vectors(n, 2)
    return {j for j, r in enumerate(rows) if np.array_equal(r, px) or np.array_equal(r, pz)}


# ---------------------------------------------------------------------------
# paths


@dataclass
class EPath:
    """A walk w0 -R- w1 -R- ... in F2 with the ternary witness of each edge."""
    nodes: List[int]
    witnesses: List[Term]

    def __len__(self):
        return len(self.witnesses)


def shortest_path(rel: BinRel, sources: Iterable[int], targets: Iterable[int]) -> Optional[EPath]:
    """BFS with parent pointers; successors visited in increasing index order."""
    targets = set(targets)
    succ = rel.successors()
    parent: Dict[int, Optional[int]] = {}
    queue = deque()
    for s in sources:
        if s not in parent:
            parent[s] = None
            queue.append(s)
    found = None
    while queue:
        u = queue.popleft()
        if u in targets:
            found = u
            break
        for v in succ[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    if found is None:
        return None
    nodes = [found]
    while parent[nodes[-1]] is not None:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    wits = [rel.witnesses[(nodes[i], nodes[i + 1])] for i in range(len(nodes) - 1)]
    return EPath(nodes, wits)


def path_is_sound(ef: EFStructure, path: EPath, rel: str = "E") -> bool:
    """Each witness lies in the right set and maps onto its edge endpoints."""
    A = ef.algebra
    env = dict(zip(["x", "y", "z"], (v.astype(np.int64) for v in projection_vectors(A.size, 3))))
    ev = Evaluator(A, env)
    n = A.size
    for (u, v), w in zip(zip(path.nodes, path.nodes[1:]), path.witnesses):
        vec = ev(w)
        idx = ef.f3.lookup(vec)
        if idx is None:
            return False
        if rel == "E" and idx not in set(ef.gset):
            return False
        if ef.xxz[idx] != u or ef.xzz[idx] != v:
            return False
    return True


# ---------------------------------------------------------------------------
# deciders


@dataclass
class ConditionResult:
    condition: str
    status: str                 # found | not-found | resource-exceeded
    chain: Optional[TermChain] = None
    k: Optional[int] = None
    path_length: Optional[int] = None
    params: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.status == "found"

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.k is not None:
            out["k"] = self.k
        if self.chain is not None:
            out["kind"] = self.chain.kind
            out["chain"] = [print_term(t) for t in self.chain.terms]
            if self.chain.tail is not None:
                out["tail"] = print_term(self.chain.tail)
        if self.path_length is not None:
            out["path_length"] = self.path_length
        if self.params:
            out["search"] = self.params
        return out


def _checked(A: FiniteAlgebra, chain: TermChain) -> TermChain:
    res = verify_chain(A, None, chain)
    if not res:
        raise SoundnessError(f"extracted {chain.kind} chain fails {res.label} at {res.counterexample}")
    return chain


def decide_directed_jonsson(ef: EFStructure) -> ConditionResult:
    path = shortest_path(ef.E, [ef.x], [ef.z])
    if path is None:
        return ConditionResult("directed_jonsson", "not-found")
    terms = path.witnesses or [X]
    chain = _checked(ef.algebra, TermChain("DJ", tuple(terms)))
    return ConditionResult("directed_jonsson", "found", chain, len(chain), len(path))


def decide_jonsson(ef: EFStructure) -> ConditionResult:
    """Undirected Jonsson terms via the directed ones and the simultaneous conversion."""
    dj = decide_directed_jonsson(ef)
    if not dj.found:
        return ConditionResult("jonsson", dj.status)
    chain = _checked(ef.algebra, convert_dj_to_simultaneous(dj.chain))
    return ConditionResult("jonsson", "found", chain, chain.n, dj.path_length)


def decide_hagemann_mitschke(ef: EFStructure, kmax: int = DEFAULT_KMAX) -> ConditionResult:
    params = {"kmax": kmax}
    path = shortest_path(ef.F, [ef.z], [ef.x])
    if path is None or len(path) > kmax or len(path) == 0:
        if path is not None and len(path) == 0:   # trivial algebra: x = z
            chain = _checked(ef.algebra, TermChain("HM", (X,)))
            return ConditionResult("hagemann_mitschke", "found", chain, 1, 0, params)
        return ConditionResult("hagemann_mitschke", "not-found", params=params)
    k = len(path)
    # edge j (0-based) carries H_{k-j}
    hm = tuple(reversed(path.witnesses))
    chain = _checked(ef.algebra, TermChain("HM", hm))
    return ConditionResult("hagemann_mitschke", "found", chain, k, k, params)


def hm_reachable(ef: EFStructure, k: int) -> bool:
    """(z, x) in F^k, by BFS layers; reflexive edges make this monotone in k."""
    frontier = {ef.z}
    succ = ef.F.successors()
    for _ in range(k):
        frontier = {v for u in frontier for v in succ[u]}
    return ef.x in frontier


def decide_pixley(ef: EFStructure, kmax: int = DEFAULT_KMAX) -> ConditionResult:
    params = {"kmax": kmax}
    path = shortest_path(ef.E, [ef.z], [ef.x])
    if path is None or len(path) > kmax:
        return ConditionResult("pixley", "not-found", params=params)
    if len(path) == 0:
        chain = _checked(ef.algebra, TermChain("P", (X,)))
        return ConditionResult("pixley", "found", chain, 1, 0, params)
    k = len(path)
    D = path.witnesses
    chain = _checked(ef.algebra, TermChain("P", tuple(D[k - i] for i in range(1, k + 1))))
    return ConditionResult("pixley", "found", chain, k, k, params)


def gumm_targets(ef: EFStructure) -> Dict[int, Term]:
    """M = {t(x,z,z) : t(x,x,z) = z}, each with its first witness in F3 order."""
    out: Dict[int, Term] = {}
    for i in range(len(ef.f3)):
        if ef.xxz[i] == ef.z:
            out.setdefault(int(ef.xzz[i]), ef.f3.witnesses[i])
    return out


def decide_directed_gumm(ef: EFStructure) -> ConditionResult:
    M = gumm_targets(ef)
    path = shortest_path(ef.E, [ef.x], M.keys())
    if path is None:
        return ConditionResult("directed_gumm", "not-found")
    end = path.nodes[-1]
    terms = path.witnesses or [X]
    chain = _checked(ef.algebra, TermChain("DG", tuple(terms), M[end]))
    return ConditionResult("directed_gumm", "found", chain, len(chain), len(path))


def decide_gumm(ef: EFStructure) -> ConditionResult:
    dg = decide_directed_gumm(ef)
    if not dg.found:
        return ConditionResult("gumm", dg.status)
    chain = _checked(ef.algebra, convert_dj_to_simultaneous(dg.chain))
    return ConditionResult("gumm", "found", chain, chain.n, dg.path_length)


def collapse_chain(ef: EFStructure, steps: EPath, hm: TermChain) -> EPath:
    """Shorten an E-path of length k+1 to length k using HM terms H1..Hk.

    c_i = H_{i+1}(a_i, a_{i+1}, a_{i+1}); the edge c_i -> c_{i+1} is
    witnessed by H_{i+1}(s_{i+1}, a_{i+1}, s_{i+2}) built from the old
    witnesses.  Each new edge is re-verified; failure means a bug.
    """
    H = hm.terms
    k = len(H)
    if len(steps) != k + 1:
        raise ValueError(f"expected a path of length {k + 1}, got {len(steps)}")
    a = steps.nodes
    s = steps.witnesses
    A = ef.algebra
    f2env = dict(zip(["x", "z"], (v.astype(np.int64) for v in projection_vectors(A.size, 2))))
    ev2 = Evaluator(A, f2env)

    def node_value(t: Term) -> int:
        idx = ef.f2.lookup(ev2(t))
        if idx is None:
            raise SoundnessError("collapsed node is not an element of F2")
        return idx

    def bt(i):
        return ef.binary_term(a[i])

    nodes = [a[0]]
    wits = []
    for i in range(k):
        # edge c_i -> c_{i+1}, where c_k stands for a_{k+1}
        w = ternary(H[i], s[i], substitute(bt(i + 1), {"x": X, "z": Z}), s[i + 1])
        wits.append(w)
        nodes.append(node_value(ternary(H[i + 1], bt(i + 1), bt(i + 2), bt(i + 2))) if i + 1 < k else a[k + 1])
    out = EPath(nodes, wits)
    if out.nodes[0] != a[0] or out.nodes[-1] != a[-1] or not path_is_sound(ef, out, "E"):
        raise SoundnessError("collapsed E-path failed verification")
    return out


# ---------------------------------------------------------------------------
# report


@dataclass
class MaltsevReport:
    results: Dict[str, ConditionResult]
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"conditions": {k: v.to_json() for k, v in self.results.items()},
                "stats": self.stats}

    def __getitem__(self, key) -> ConditionResult:
        return self.results[key]


CONDITIONS = ("directed_jonsson", "jonsson", "hagemann_mitschke", "pixley",
              "directed_gumm", "gumm")


def decide_all(A: FiniteAlgebra, *, max_hm: int = DEFAULT_KMAX, max_pixley: int = DEFAULT_KMAX,
               idempotent_reduct: bool = False, cap: int = DEFAULT_CAP,
               work_cap: int = DEFAULT_WORK_CAP) -> MaltsevReport:
    try:
        ef = build_EF(A, idempotent_reduct=idempotent_reduct, cap=cap, work_cap=work_cap)
    except ResourceExceeded as exc:
        return MaltsevReport({c: ConditionResult(c, "resource-exceeded") for c in CONDITIONS},
                             {"error": str(exc)})
    results = {
        "directed_jonsson": decide_directed_jonsson(ef),
        "jonsson": decide_jonsson(ef),
        "hagemann_mitschke": decide_hagemann_mitschke(ef, max_hm),
        "pixley": decide_pixley(ef, max_pixley),
        "directed_gumm": decide_directed_gumm(ef),
        "gumm": decide_gumm(ef),
    }
    return MaltsevReport(results, ef.stats())


# ---------------------------------------------------------------------------
# the two preorder theorems, as executable checks


@dataclass
class TheoremCheck:
    status: str      # holds | precondition-failed | THEOREM VIOLATION
    reason: str = ""
    witness: object = None

    @property
    def violation(self) -> bool:
        return self.status == "THEOREM VIOLATION"

    def __bool__(self):
        return self.status == "holds"


def relational_middle_absorption(A: FiniteAlgebra, terms: Sequence[Term], E: BinRel,
                                 F: BinRel) -> Verdict:
    """For (a1,b1),(a3,b3) in E and (a2,b2) in F: (t(a1,a2,a3), t(b1,b2,b3)) in E."""
    n = A.size
    Ep = sorted(E.pairs)
    Fp = sorted(F.pairs)
    for t in terms:
        tab = term_table(A, t, ["x", "y", "z"]).reshape(n, n, n)
        if any(tab[a, a, a] != a for a in range(n)):
            return Verdict(False, f"{print_term(t)} is not idempotent", t)
        for a1, b1 in Ep:
            for a3, b3 in Ep:
                for a2, b2 in Fp:
                    p = (int(tab[a1, a2, a3]), int(tab[b1, b2, b3]))
                    if p not in E.pairs:
                        return Verdict(False, "E does not middle absorb F",
                                       (t, (a1, b1), (a2, b2), (a3, b3)))
    return Verdict(True)


def verify_preorder_collapse(A: FiniteAlgebra, jchain: TermChain, E: BinRel, F: BinRel) -> TheoremCheck:
    """Admissible preorders E <= F with E Jonsson-absorbing F must be equal."""
    if jchain.kind != "J":
        return TheoremCheck("precondition-failed", "chain is not a J chain")
    weak = TermChain("J", jchain.terms, None, weak=True)
    chk = verify_chain(A, None, weak)
    if not chk:
        return TheoremCheck("precondition-failed", f"not a weak Jonsson chain: {chk.label}")
    for name, rel in (("E", E), ("F", F)):
        v = is_admissible_preorder(A, rel)
        if not v:
            return TheoremCheck("precondition-failed", f"{name} {v.reason}", v.witness)
    if not E <= F:
        return TheoremCheck("precondition-failed", "E is not contained in F")
    v = relational_middle_absorption(A, jchain.terms, E, F)
    if not v:
        return TheoremCheck("precondition-failed", v.reason, v.witness)
    if E == F:
        return TheoremCheck("holds")
    return TheoremCheck("THEOREM VIOLATION", "E != F", sorted(F.pairs - E.pairs))


def verify_gumm_preorder_property(A: FiniteAlgebra, gchain: TermChain, E: BinRel,
                                  F: BinRel) -> TheoremCheck:
    """For reflexive subuniverses E <= F of A^2 with E Gumm-absorbing F:
    every (a,b) in F has c with (b,c) in F and (a,c) in the transitive closure of E."""
    if gchain.kind != "G":
        return TheoremCheck("precondition-failed", "chain is not a G chain")
    chk = verify_chain(A, None, TermChain("G", gchain.terms, gchain.tail, weak=True))
    if not chk:
        return TheoremCheck("precondition-failed", f"not a weak Gumm chain: {chk.label}")
    from .algebra import is_subuniverse_of_square
    for name, rel in (("E", E), ("F", F)):
        if not rel.is_reflexive():
            return TheoremCheck("precondition-failed", f"{name} not reflexive")
        bad = is_subuniverse_of_square(A, rel)
        if bad is not None:
            return TheoremCheck("precondition-failed", f"{name} not closed under {bad[0]}", bad)
    if not E <= F:
        return TheoremCheck("precondition-failed", "E is not contained in F")
    v = relational_middle_absorption(A, gchain.terms, E, F)
    if not v:
        return TheoremCheck("precondition-failed", v.reason, v.witness)
    reach = transitive_closure(E)
    for a, b in sorted(F.pairs):
        if not any((b, c) in F.pairs and (a, c) in reach.pairs for c in range(A.size)):
            return TheoremCheck("THEOREM VIOLATION", f"no c for ({a},{b})", (a, b))
    return TheoremCheck("holds")
