"""Bundled small algebras and seeded generators of chain models.

A *chain model* is a finite algebra whose operations J1..J(2k+1) (and P
for Gumm models) satisfy a chain's equations.  Random models are built by
filling every table entry forced by the two-variable equations along the
chain and drawing the remaining entries from the seeded generator, so every
draw is a model by construction (and is re-verified anyway).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .algebra import FiniteAlgebra
from .chains import TermChain, verify_chain
from .terms import Term, X, Y, Z, app

DATA_FILES = ("majority", "lattice", "xor3", "pixley", "projection")


def load_bundled(name: str) -> FiniteAlgebra:
    """One of the algebra files shipped with the package."""
    if name not in DATA_FILES:
        raise KeyError(f"no bundled algebra {name!r}; have {list(DATA_FILES)}")
    text = resources.files("maltsev").joinpath("data", f"{name}.json").read_text()
    return FiniteAlgebra.from_json(json.loads(text))


def majority() -> FiniteAlgebra:
    return FiniteAlgebra.from_functions(2, maj=lambda x, y, z: (x & y) | (y & z) | (x & z))


def lattice() -> FiniteAlgebra:
    return FiniteAlgebra.from_functions(2, meet=lambda x, z: x & z, join=lambda x, z: x | z)


def xor3() -> FiniteAlgebra:
    return FiniteAlgebra.from_functions(2, m=lambda x, y, z: x ^ y ^ z)


def pixley() -> FiniteAlgebra:
    """p = (x and not y) or (z and not y) or (x and z)."""
    return FiniteAlgebra.from_functions(2, p=lambda x, y, z: (x & (1 - y)) | (z & (1 - y)) | (x & z))


def projection() -> FiniteAlgebra:
    return FiniteAlgebra.from_functions(2, f=lambda x, y, z: x)


# ---------------------------------------------------------------------------
# random chain models


def _idx(n: int, a: int, b: int, c: int) -> int:
    return (a * n + b) * n + c


def _chain_tables(n: int, k: int, rng: np.random.Generator, *, middle: bool, end: str):
    """Tables J1..J(2k+1) on {0..n-1}; ``end`` is "jonsson", "gumm" or "open".

    Returns the tables and, for Gumm, the values J(2k+1)(a,c,c) keyed by (a,c).
    """
    m = 2 * k + 1
    tabs = [rng.integers(0, n, size=n ** 3) for _ in range(m)]
    for t in tabs:
        for a in range(n):
            if middle:
                for b in range(n):
                    t[_idx(n, a, b, a)] = a
            t[_idx(n, a, a, a)] = a
    tails = {}
    for a in range(n):
        for c in range(n):
            if a == c:
                continue
            # link values v1..v(2k); v(2i+1) sits at (a,c,c), v(2i) at (a,a,c)
            v = [None] + [int(rng.integers(0, n)) for _ in range(2 * k)]
            tabs[0][_idx(n, a, a, c)] = a
            for i in range(1, m + 1):
                t = tabs[i - 1]
                if i % 2 == 1:          # J(2j+1): (a,a,c) = v(i-1), (a,c,c) = v(i)
                    if i > 1:
                        t[_idx(n, a, a, c)] = v[i - 1]
                    if i < m:
                        t[_idx(n, a, c, c)] = v[i]
                else:                   # J(2j): (a,c,c) = v(i-1), (a,a,c) = v(i)
                    t[_idx(n, a, c, c)] = v[i - 1]
                    t[_idx(n, a, a, c)] = v[i]
            last = tabs[m - 1]
            if end == "jonsson":
                last[_idx(n, a, c, c)] = c
            else:
                tails[(a, c)] = int(last[_idx(n, a, c, c)])
    return tabs, tails


@dataclass
class ChainModel:
    algebra: FiniteAlgebra
    k: int
    kind: str                           # "J", "G" or "W"
    interpretation: Optional[Dict[str, Term]] = None
    name: str = ""

    def chain(self, weak: Optional[bool] = None) -> TermChain:
        """The symbolic chain J1..J(2k+1) (with tail P for Gumm models)."""
        js = tuple(app(f"J{i}", (X, Y, Z)) for i in range(1, 2 * self.k + 2))
        w = self.weak if weak is None else weak
        if self.kind == "G":
            return TermChain("G", js, app("P", (X, Y, Z)), weak=w)
        return TermChain("J", js, None, weak=w)

    @property
    def weak(self) -> bool:
        return not self.satisfies_middle()

    def satisfies_middle(self) -> bool:
        from .algebra import check_identity
        from .terms import Identity
        A = self.model_algebra()
        return all(check_identity(A, Identity(app(f"J{i}", (X, Y, X)), X))
                   for i in range(1, 2 * self.k + 2))

    def model_algebra(self) -> FiniteAlgebra:
        from .algebra import interpret
        if not self.interpretation:
            return self.algebra
        return interpret(self.algebra, self.interpretation)

    def pair(self) -> Tuple[FiniteAlgebra, Optional[Dict[str, Term]]]:
        return self.algebra, self.interpretation


def random_jonsson_model(n: int, k: int, rng: np.random.Generator, *, weak: bool = False) -> ChainModel:
    tabs, _ = _chain_tables(n, k, rng, middle=not weak, end="jonsson")
    A = FiniteAlgebra.from_tables(n, {f"J{i + 1}": (3, t) for i, t in enumerate(tabs)})
    return ChainModel(A, k, "J", name=f"random-jonsson-n{n}-k{k}")


def random_gumm_model(n: int, k: int, rng: np.random.Generator, *, weak: bool = False) -> ChainModel:
    tabs, tails = _chain_tables(n, k, rng, middle=not weak, end="gumm")
    p = rng.integers(0, n, size=n ** 3)
    for a in range(n):
        for c in range(n):
            p[_idx(n, a, a, c)] = c
            if a != c:
                p[_idx(n, a, c, c)] = tails[(a, c)]
    ops = {f"J{i + 1}": (3, t) for i, t in enumerate(tabs)}
    ops["P"] = (3, p)
    return ChainModel(FiniteAlgebra.from_tables(n, ops), k, "G", name=f"random-gumm-n{n}-k{k}")


def random_w_model(n: int, k: int, rng: np.random.Generator) -> ChainModel:
    """Only the axioms of W: no middle equations, J(2k+1)(x,y,y) unconstrained."""
    tabs, _ = _chain_tables(n, k, rng, middle=False, end="open")
    A = FiniteAlgebra.from_tables(n, {f"J{i + 1}": (3, t) for i, t in enumerate(tabs)})
    return ChainModel(A, k, "W", name=f"random-w-n{n}-k{k}")


def _is_projection_or_majority(A: FiniteAlgebra, name: str) -> bool:
    n = A.size
    t = A.operations[name].reshape(n, n, n)
    g = np.indices((n, n, n))
    if any(np.array_equal(t, g[i]) for i in range(3)):
        return True
    for a in range(n):
        for b in range(n):
            if t[a, a, b] != a or t[a, b, a] != a or t[b, a, a] != a:
                return False
    return True


def search_cd_model(n: int, k: int, seed: int = 0, attempts: int = 1000) -> ChainModel:
    """Seeded search for an n-element Jonsson model none of whose Ji is a
    projection or a majority operation."""
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        M = random_jonsson_model(n, k, rng)
        if not any(_is_projection_or_majority(M.algebra, f"J{i}") for i in range(1, 2 * k + 2)):
            M.name = f"searched-cd-n{n}-k{k}-seed{seed}"
            return M
    raise RuntimeError("no model found within the attempt budget")


# ---------------------------------------------------------------------------
# bundled chain models


def majority_model(k: int) -> ChainModel:
    maj = app("maj", (X, Y, Z))
    interp = {f"J{i}": maj for i in range(1, 2 * k + 2)}
    return ChainModel(majority(), k, "J", interp, name="majority")


def pixley_model() -> ChainModel:
    """J1 = x, J2 = p, J3 = z on the two-element Pixley algebra (k = 1)."""
    interp = {"J1": X, "J2": app("p", (X, Y, Z)), "J3": Z}
    return ChainModel(pixley(), 1, "J", interp, name="pixley")


def jonsson_models(k: int, seed: int = 0) -> List[ChainModel]:
    models = [majority_model(k), search_cd_model(3, k, seed)]
    if k == 1:
        models.append(pixley_model())
    models.append(random_jonsson_model(3, k, np.random.default_rng(seed + 1), weak=True))
    models[-1].name = "weak-jonsson-3"
    for M in models:
        res = verify_chain(M.algebra, M.interpretation, M.chain())
        if not res:
            raise AssertionError(f"bundled model {M.name} fails {res.label}")
    return models


def gumm_models(k: int, seed: int = 0) -> List[ChainModel]:
    xor_interp = {f"J{i}": X for i in range(1, 2 * k + 2)}
    xor_interp["P"] = app("m", (X, Y, Z))
    maj_interp = {f"J{i}": app("maj", (X, Y, Z)) for i in range(1, 2 * k + 2)}
    maj_interp["P"] = Z
    models = [ChainModel(xor3(), k, "G", xor_interp, name="affine"),
              ChainModel(majority(), k, "G", maj_interp, name="majority"),
              random_gumm_model(3, k, np.random.default_rng(seed))]
    for M in models:
        res = verify_chain(M.algebra, M.interpretation, M.chain())
        if not res:
            raise AssertionError(f"bundled model {M.name} fails {res.label}")
    return models


def w_models(k: int, seed: int = 0) -> List[ChainModel]:
    """Models of the bare axioms (for certificate audits)."""
    rng = np.random.default_rng(seed)
    return [majority_model(k), search_cd_model(3, k, seed), random_w_model(2, k, rng),
            random_w_model(3, k, rng)]


# ---------------------------------------------------------------------------
# random relation pairs for the preorder checks


def _close(A: FiniteAlgebra, seed, *, transitive: bool, absorb_into=None, terms=()) -> "BinRel":
    """Least reflexive subuniverse of A^2 over ``seed``, optionally transitive and
    closed under (t(a1,a2,a3), t(b1,b2,b3)) for (ai,bi) in it and (a2,b2) in ``absorb_into``."""
    from .algebra import BinRel, subuniverse_of_square, term_table, transitive_closure
    n = A.size
    tabs = [term_table(A, t, ["x", "y", "z"]).reshape(n, n, n) for t in terms]
    pairs = set(seed) | {(a, a) for a in range(n)}
    while True:
        rel = subuniverse_of_square(A, pairs)
        if transitive:
            rel = transitive_closure(rel)
        if absorb_into is not None:
            inner = sorted(rel.pairs)
            outer = sorted(absorb_into.pairs)
            extra = {(int(t[a1, a2, a3]), int(t[b1, b2, b3]))
                     for t in tabs for a1, b1 in inner for a3, b3 in inner for a2, b2 in outer}
            rel = BinRel(n, rel.pairs | extra)
        if rel.pairs == pairs:
            return rel
        pairs = set(rel.pairs)


def random_relation_pair(M: ChainModel, rng: np.random.Generator, *, preorder: bool,
                         absorbing: bool):
    """Seeded E <= F on M's model algebra: F is generated by a few random pairs;
    E by a random part of F, closed under absorption into F when ``absorbing``."""
    A = M.model_algebra()
    n = A.size
    all_pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    picks = rng.permutation(len(all_pairs))[: int(rng.integers(1, 4))]
    F = _close(A, [all_pairs[i] for i in picks], transitive=preorder)
    off = sorted(p for p in F.pairs if p[0] != p[1])
    keep = [p for p in off if rng.random() < 0.3]
    terms = M.chain().terms
    E = _close(A, keep, transitive=preorder, absorb_into=F if absorbing else None, terms=terms)
    return A, E, F


def median3_model(k: int) -> ChainModel:
    """Every Ji is the median of the chain 0 < 1 < 2."""
    A = FiniteAlgebra.from_functions(3, med=lambda x, y, z: sorted((x, y, z))[1])
    interp = {f"J{i}": app("med", (X, Y, Z)) for i in range(1, 2 * k + 2)}
    return ChainModel(A, k, "J", interp, name="median-3")


def affine_model(n: int, k: int) -> ChainModel:
    """Z_n with Ji = x and P = x - y + z."""
    A = FiniteAlgebra.from_functions(n, m=lambda x, y, z: (x - y + z) % n)
    interp = {f"J{i}": X for i in range(1, 2 * k + 2)}
    interp["P"] = app("m", (X, Y, Z))
    return ChainModel(A, k, "G", interp, name=f"affine-{n}")


def preorder_instances(count: int, seed: int = 0, *, gumm: bool = False):
    """Seeded (label, algebra, chain, E, F) tuples for the two preorder checks.

    Half of the pairs have E closed under absorption into F, so the checks'
    preconditions hold often enough to exercise their conclusions.
    """
    rng = np.random.default_rng(seed)
    for i in range(count):
        k = int(rng.integers(1, 3))
        pick = int(rng.integers(0, 4))
        if gumm:
            if pick < 2:
                M = random_gumm_model(int(rng.integers(2, 4)), k, rng, weak=bool(rng.random() < 0.5))
            else:
                M = affine_model(2 + pick - 2, k)
        elif pick < 2:
            M = random_jonsson_model(int(rng.integers(2, 4)), k, rng, weak=bool(rng.random() < 0.5))
        else:
            M = median3_model(k) if pick == 2 else majority_model(k)
        A, E, F = random_relation_pair(M, rng, preorder=not gumm, absorbing=i % 2 == 0)
        chain = M.chain()
        yield M.name, A, chain, E, F
