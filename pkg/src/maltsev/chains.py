"""Typed chains of ternary terms and the equations each kind must satisfy.

Kinds:

* ``J``  -- Jonsson terms J1..J(2n+1)
* ``DJ`` -- directed Jonsson terms D1..Dn
* ``G``  -- Gumm terms J1..J(2n+1) with tail P
* ``DG`` -- directed Gumm terms D1..Dn with tail Q
* ``P``  -- Pixley terms P1..Pn
* ``HM`` -- Hagemann-Mitschke terms H1..Hk

A *weak* chain drops the equations t(x,y,x) = x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .algebra import Evaluator, FiniteAlgebra, assignment_grid, interpret
from .terms import Identity, Term, X, Y, Z, app, print_term, print_terms, substitute, symbols_of, ternary, var

KINDS = ("J", "DJ", "G", "DG", "P", "HM")


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class TermChain:
    kind: str
    terms: Tuple[Term, ...]
    tail: Optional[Term] = None
    weak: bool = False

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.kind not in KINDS:
            raise ChainError(f"unknown chain kind {self.kind!r}")
        if not self.terms:
            raise ChainError("a chain needs at least one term")
        if self.kind in ("J", "G") and len(self.terms) % 2 == 0:
            raise ChainError(f"{self.kind} chains have odd length 2n+1")
        if (self.tail is None) != (self.kind not in ("G", "DG")):
            raise ChainError(f"{self.kind} chains {'need' if self.kind in ('G', 'DG') else 'take no'} tail term")

    def __len__(self):
        return len(self.terms)

    @property
    def n(self) -> int:
        """The parameter n of the equation package (J(n), DJ(n), ...)."""
        if self.kind in ("J", "G"):
            return (len(self.terms) - 1) // 2
        return len(self.terms)

    def all_terms(self) -> List[Term]:
        return list(self.terms) + ([self.tail] if self.tail is not None else [])

    def to_lines(self) -> List[str]:
        return print_terms(self.all_terms())

    def symbols(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for t in self.all_terms():
            out.update(symbols_of(t))
        return out


def at(t: Term, a: Term, b: Term, c: Term) -> Term:
    return ternary(t, a, b, c)


# An equation side is a variable name or (term index, (v1, v2, v3)); index
# len(chain.terms) denotes the tail.
Side = Union[str, Tuple[int, Tuple[str, str, str]]]


def chain_schema(chain: TermChain) -> List[Tuple[str, Side, Side]]:
    """The equation package of ``chain`` as (label, lhs, rhs) in schematic form."""
    n = len(chain.terms)
    tail = n
    eqs: List[Tuple[str, Side, Side]] = []
    xxy, xyy, xyx = ("x", "x", "y"), ("x", "y", "y"), ("x", "y", "x")
    kind = chain.kind
    if kind in ("J", "G"):
        m = chain.n
        eqs.append(("J1(x,x,y)=x", (0, xxy), "x"))
        if kind == "J":
            eqs.append((f"J{n}(x,y,y)=y", (n - 1, xyy), "y"))
        else:
            eqs.append((f"J{n}(x,y,y)=P(x,y,y)", (n - 1, xyy), (tail, xyy)))
            eqs.append(("P(x,x,y)=y", (tail, xxy), "y"))
        for i in range(m):
            eqs.append((f"J{2*i+1}(x,y,y)=J{2*i+2}(x,y,y)", (2 * i, xyy), (2 * i + 1, xyy)))
        for i in range(1, m + 1):
            eqs.append((f"J{2*i}(x,x,y)=J{2*i+1}(x,x,y)", (2 * i - 1, xxy), (2 * i, xxy)))
        middle = "J"
    elif kind in ("DJ", "DG"):
        eqs.append(("D1(x,x,y)=x", (0, xxy), "x"))
        if kind == "DJ":
            eqs.append((f"D{n}(x,y,y)=y", (n - 1, xyy), "y"))
        else:
            eqs.append((f"D{n}(x,y,y)=Q(x,y,y)", (n - 1, xyy), (tail, xyy)))
            eqs.append(("Q(x,x,y)=y", (tail, xxy), "y"))
        for i in range(n - 1):
            eqs.append((f"D{i+1}(x,y,y)=D{i+2}(x,x,y)", (i, xyy), (i + 1, xxy)))
        middle = "D"
    elif kind == "P":
        eqs.append(("P1(x,y,y)=x", (0, xyy), "x"))
        eqs.append((f"P{n}(x,x,y)=y", (n - 1, xxy), "y"))
        for i in range(n - 1):
            eqs.append((f"P{i+1}(x,x,y)=P{i+2}(x,y,y)", (i, xxy), (i + 1, xyy)))
        middle = "P"
    else:  # HM, written in x and z
        xzz, xxz = ("x", "z", "z"), ("x", "x", "z")
        eqs.append(("H1(x,z,z)=x", (0, xzz), "x"))
        eqs.append((f"H{n}(x,x,z)=z", (n - 1, xxz), "z"))
        for i in range(n - 1):
            eqs.append((f"H{i+1}(x,x,z)=H{i+2}(x,z,z)", (i, xxz), (i + 1, xzz)))
        return eqs
    if not chain.weak:
        for i in range(n):
            eqs.append((f"{middle}{i+1}(x,y,x)=x", (i, xyx), "x"))
    return eqs


def _side_term(chain: TermChain, side: Side) -> Term:
    if isinstance(side, str):
        return var(side)
    i, args = side
    t = chain.tail if i == len(chain.terms) else chain.terms[i]
    return at(t, *(var(a) for a in args))


def chain_identities(chain: TermChain) -> List[Tuple[str, Identity]]:
    """The full equation package for ``chain``, labelled for reporting."""
    return [(label, Identity(_side_term(chain, l), _side_term(chain, r)))
            for label, l, r in chain_schema(chain)]


@dataclass
class ChainCheck:
    holds: bool
    label: Optional[str] = None
    identity: Optional[Identity] = None
    counterexample: Optional[Dict[str, int]] = None
    checked: int = 0

    def __bool__(self):
        return self.holds

    def describe(self) -> str:
        if self.holds:
            return f"holds ({self.checked} identities)"
        return f"fails {self.label} at {self.counterexample}"


def verify_chain(A: FiniteAlgebra, interpretation: Optional[Mapping[str, Term]],
                 chain: TermChain) -> ChainCheck:
    """Check the full equation package of ``chain`` in A.

    ``interpretation`` maps chain symbols that are not operations of A to
    ternary terms over A's operations.  Each chain term is tabulated once;
    the equations are then checked exhaustively by table lookup.
    """
    needed = {s: r for s, r in chain.symbols().items() if s not in A.operations}
    interpretation = dict(interpretation or {})
    missing = sorted(set(needed) - set(interpretation))
    if missing:
        raise ChainError(f"no interpretation for symbols {missing}")
    model = interpret(A, {s: interpretation[s] for s in needed}, needed) if needed else A
    n = model.size
    grid = assignment_grid(n, ["x", "y", "z"])
    ev = Evaluator(model, grid)
    tables = [np.broadcast_to(ev(t), (n ** 3,)).reshape(n, n, n) for t in chain.all_terms()]
    eqs = chain_schema(chain)
    for i, (label, lhs, rhs) in enumerate(eqs):
        def value(side):
            if isinstance(side, str):
                return grid[side]
            j, args = side
            return tables[j][grid[args[0]], grid[args[1]], grid[args[2]]]
        bad = np.nonzero(value(lhs) != value(rhs))[0]
        if bad.size:
            names = sorted({v for side in (lhs, rhs) for v in ((side,) if isinstance(side, str) else side[1])},
                           key=lambda v: "xyz".index(v))
            cx = {v: int(grid[v][bad[0]]) for v in names}
            ident = Identity(_side_term(chain, lhs), _side_term(chain, rhs))
            return ChainCheck(False, label, ident, cx, i)
    return ChainCheck(True, checked=len(eqs))


# ---------------------------------------------------------------------------
# syntactic conversions between chain kinds


def convert_dj_to_simultaneous(d: TermChain) -> TermChain:
    """Directed chain D1..Dn -> chain J1..J(2n-1) that is both J(n-1) and DJ(2n-1).

    J1 = D1, J(2i) = D(i+1)(x,x,z), J(2i+1) = D(i+1).  A DG chain keeps its tail.
    """
    if d.kind not in ("DJ", "DG"):
        raise ChainError("expected a DJ or DG chain")
    D = d.terms
    out = [D[0]]
    for i in range(1, len(D)):
        out.append(at(D[i], X, X, Z))
        out.append(D[i])
    return TermChain("J" if d.kind == "DJ" else "G", tuple(out), d.tail, d.weak)


def as_directed(j: TermChain) -> TermChain:
    """Read a simultaneous J/G chain as the directed chain it also is."""
    return TermChain("DJ" if j.kind == "J" else "DG", j.terms, j.tail, j.weak)


def convert_pixley_to_jonsson(p: TermChain) -> TermChain:
    """P1..Pn -> J1..J(2n+1): J1 = x, J(2i) = Pi, J(2i+1) = P(i+1)(x,z,z), J(2n+1) = z."""
    if p.kind != "P":
        raise ChainError("expected a Pixley chain")
    P = p.terms
    n = len(P)
    out = [X]
    for i in range(1, n + 1):
        out.append(P[i - 1])
        out.append(at(P[i], X, Z, Z) if i < n else Z)
    return TermChain("J", tuple(out), None, p.weak)


def convert_pixley_to_hm(p: TermChain) -> TermChain:
    if p.kind != "P":
        raise ChainError("expected a Pixley chain")
    return TermChain("HM", p.terms)


def convert_absorption_to_dj(s: Term, arity: Optional[int] = None) -> TermChain:
    """n-ary absorbing term s -> weak DJ chain Q1..Qn.

    Qj(x,y,z) = s(x,...,x, y, z,...,z) with y in place n-j+1.  The symbol
    ``s`` is applied to fresh variables, so ``s`` may be given as a term in
    v0..v(n-1) or as a bare operation symbol via :func:`app`.
    """
    if arity is None:
        names = sorted(s.variables)
        arity = len(names)
    if arity < 2:
        raise ChainError("absorbing term must be at least binary")
    slots = [f"v{i}" for i in range(arity)]
    if not s.variables <= set(slots):
        raise ChainError("absorbing term must use variables v0..v(n-1)")
    out = []
    for j in range(1, arity + 1):
        ypos = arity - j          # zero-based slot of y
        args = [X] * ypos + [Y] + [Z] * (arity - ypos - 1)
        out.append(substitute(s, dict(zip(slots, args)), strict=False))
    return TermChain("DJ", tuple(out), None, weak=True)
