"""Symbolic construction of directed Jonsson and Gumm chains.

Works in the variety whose only operations are J1..J(2k+1) with the chain
axioms.  Elements of the two-generated free algebra are binary terms in x
and z.  An ``Arrow`` records how to get from one element to another as a
list of certificate steps; E-arrows use only edges whose witnesses lie in
the grammar G, F-arrows may use arbitrary witnesses.

Arrows are moved around with three operations:

* ``lift(arrow, C)`` -- C is a binary term with the hole y; every step is
  performed inside C.  Lifting an F-arrow gives an E-arrow exactly when
  every hole sits below some middle argument.
* ``special(arrow, a, b, fa)`` -- apply the endomorphism x -> a, z -> b,
  given an F-arrow fa: a => b.  Each edge with witness s becomes the
  F-arrow fa lifted into s(a, y, b); E-arrows stay E-arrows because y
  only occurs in middle arguments of a G-term.
* ``power(arrow, n)`` -- from a -> b get a^n -> b^n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .certificates import (Certificate, Edge, Rewrite, Step, J, check_g_membership, edge_source,
                           edge_target, jname, plug, replay)
from .chains import TermChain
from .terms import (HOLE_VAR, Term, X, Y, Z, app, binary, left_power, replace_subterm,
                    substitute, symbols_of)

log = logging.getLogger(__name__)


class DirectingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# arrows


@dataclass
class Arrow:
    kind: str                    # "E" or "F"
    source: Term
    target: Term
    steps: List[Step] = field(default_factory=list)

    def then(self, other: "Arrow") -> "Arrow":
        if other.source is not self.target:
            raise DirectingError("arrows do not compose: target and source differ")
        kind = "E" if self.kind == other.kind == "E" else "F"
        return Arrow(kind, self.source, other.target, self.steps + other.steps)

    @property
    def edge_count(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, Edge))

    def reverse(self) -> "Arrow":
        """Reverse a rewrite-only arrow."""
        if any(isinstance(s, Edge) for s in self.steps):
            raise DirectingError("only rewrite sequences can be reversed")
        flipped = [Rewrite(s.ctx, s.axiom, "rl" if s.dir == "lr" else "lr", s.sub)
                   for s in reversed(self.steps)]
        return Arrow(self.kind, self.target, self.source, flipped)

    def check(self, k: int) -> None:
        """Replay the steps (weak axioms only); raises on any mismatch."""
        cert = Certificate(k, "weak", self.source, self.target, list(self.steps))
        res = replay(cert, any_witness=self.kind == "F")
        if not res:
            raise DirectingError(f"arrow fails at step {res.index}: {res.reason}")
        if self.kind == "E":
            for s in self.steps:
                if isinstance(s, Edge) and not check_g_membership(s.w, k):
                    raise DirectingError("E-arrow uses a witness outside G")


def identity_arrow(t: Term, kind: str = "E") -> Arrow:
    return Arrow(kind, t, t, [])


def chain_arrows(arrows: Sequence[Arrow]) -> Arrow:
    out = arrows[0]
    for a in arrows[1:]:
        out = out.then(a)
    return out


def rewrite_arrow(current: Term, ctx: Term, ax: str, direction: str, sub: Dict[str, Term],
                  lhs: Term, rhs: Term) -> Arrow:
    """One rewrite step; ``lhs``/``rhs`` are the already-oriented instance."""
    if plug(ctx, lhs) is not current:
        raise DirectingError(f"{ax} does not apply here")
    return Arrow("E", current, plug(ctx, rhs), [Rewrite.make(ctx, ax, direction, sub)])


def _middle_only(ctx: Term) -> bool:
    """Every occurrence of y lies below some middle argument."""
    ok: Dict[Term, bool] = {}
    stack = [ctx]
    while stack:
        s = stack[-1]
        if s in ok:
            stack.pop()
            continue
        if s.args is None:
            ok[s] = s.head != "y"
            stack.pop()
            continue
        outer = [a for i, a in enumerate(s.args) if i != 1 or len(s.args) != 3]
        pending = [a for a in outer if a not in ok]
        if pending:
            stack.extend(pending)
            continue
        ok[s] = all(ok[a] for a in outer)
        stack.pop()
    return ok[ctx]


def lift(arrow: Arrow, ctx: Term) -> Arrow:
    """Run ``arrow`` inside the binary context ``ctx`` (hole = y)."""
    source = substitute(ctx, {"y": arrow.source}, strict=False)
    target = substitute(ctx, {"y": arrow.target}, strict=False)
    if "y" not in ctx.variables:
        return Arrow("E", source, target, [])
    kind = "E" if arrow.kind == "E" or _middle_only(ctx) else "F"
    steps: List[Step] = []
    for s in arrow.steps:
        if isinstance(s, Rewrite):
            steps.append(Rewrite(substitute(ctx, {"y": s.ctx}, strict=False), s.axiom, s.dir, s.sub))
        elif "y" in s.w.variables:
            steps.append(Edge(substitute(ctx, {"y": s.w}, strict=False)))
    return Arrow(kind, source, target, steps)


def special(arrow: Arrow, a: Term, b: Term, fa: Arrow) -> Arrow:
    """Image of ``arrow`` under x -> a, z -> b, where ``fa`` is a => b."""
    if fa.source is not a or fa.target is not b:
        raise DirectingError("special endomorphism needs an arrow a => b")
    sigma = {"x": a, "z": b}
    steps: List[Step] = []
    for s in arrow.steps:
        if isinstance(s, Rewrite):
            steps.append(Rewrite(substitute(s.ctx, sigma, strict=False), s.axiom, s.dir,
                                 tuple((v, substitute(t, sigma, strict=False)) for v, t in s.sub)))
        else:
            moved = lift(fa, substitute(s.w, sigma, strict=False))
            steps.extend(moved.steps)
    return Arrow(arrow.kind, binary(arrow.source, a, b), binary(arrow.target, a, b), steps)


def apply_special_endomorphism(arrow: Arrow, a: Term, b: Term, fa: Optional[Arrow] = None) -> Arrow:
    """Public form of :func:`special`; x => b is always available, so ``fa`` may be omitted when a = x."""
    if fa is None:
        if a is not X:
            raise DirectingError("need an arrow a => b for the endomorphism to be special")
        fa = fx(b)
    return special(arrow, a, b, fa)


# ---------------------------------------------------------------------------
# idempotence


def _j_indices(t: Term) -> List[int]:
    return sorted((int(s[1:]) for s in symbols_of(t) if s[:1] == "J" and s[1:].isdigit()),
                  reverse=True)


def collapse(t: Term, u: Term) -> Arrow:
    """Rewrite t = c(u, u), a J-term over leaves u, down to u.

    Each round rewrites, for every index j from the top down, all current
    redexes Jj(u,u,u) to u in one derived idem(j) step.
    """
    current = t
    steps: List[Step] = []
    indices = _j_indices(t)
    top = indices[0] if indices else 0
    while current is not u:
        progressed = False
        for j in range(top, 0, -1):
            ctx = replace_subterm(current, J(j, u, u, u), HOLE_VAR, stop=u)
            if ctx is current:
                continue
            steps.append(Rewrite.make(ctx, f"idem({j})", "lr", {"x": u}))
            current = plug(ctx, u)
            progressed = True
        if not progressed:
            raise DirectingError("term is not built from J-symbols over the given leaf")
    return Arrow("E", t, u, steps)


def fx(c: Term) -> Arrow:
    """F-arrow x => c: x = c(x,x), then the edge with witness c(x, y)."""
    up = collapse(binary(c, X, X), X).reverse()
    w = substitute(c, {"z": Y}, strict=False)
    steps = list(up.steps)
    if "y" in w.variables:
        steps.append(Edge(w))
    return Arrow("F", X, c, steps)


def power(arrow: Arrow, n: int, k: int) -> Arrow:
    """From a -> b build a^n -> b^n (n >= 1)."""
    if n < 1:
        raise ValueError("power must be positive")
    a, b = arrow.source, arrow.target
    if n == 1:
        return arrow
    prev = power(arrow, n - 1, k)
    bn1 = left_power(b, n - 1)
    first = lift(prev, substitute(a, {"z": Y}, strict=False))          # a(x,a^(n-1)) -> a(x,b^(n-1))
    second = special(arrow, X, bn1, fx(bn1))                          # -> b(x,b^(n-1))
    return first.then(second)


# ---------------------------------------------------------------------------
# fences and boxes


@dataclass
class Fence:
    """x = a0 -> b1 <- a1 -> b2 <- ... <- an -> b(n+1)."""
    a: List[Term]                # a0..an
    b: List[Term]                # b1..b(n+1)
    up: List[Arrow]              # a(l-1) -> b(l), l = 1..n+1
    down: List[Arrow]            # a(l) -> b(l), l = 1..n

    @property
    def n(self) -> int:
        return len(self.down)

    @property
    def end(self) -> Term:
        return self.b[-1]

    def validate(self) -> None:
        n = self.n
        if len(self.a) != n + 1 or len(self.b) != n + 1 or len(self.up) != n + 1:
            raise DirectingError("malformed fence")
        for l in range(1, n + 2):
            u = self.up[l - 1]
            if u.kind != "E" or u.source is not self.a[l - 1] or u.target is not self.b[l - 1]:
                raise DirectingError(f"bad up arrow {l}")
        for l in range(1, n + 1):
            d = self.down[l - 1]
            if d.kind != "E" or d.source is not self.a[l] or d.target is not self.b[l - 1]:
                raise DirectingError(f"bad down arrow {l}")


def base_fence(k: int) -> Fence:
    """k-fence from x to J(x,z) = J(2k+1)(x,z,z) with b_l = J(2l-1)(x,z,z), a_l = J(2l)(x,x,z)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    a = [X] + [J(2 * l, X, X, Z) for l in range(1, k + 1)]
    b = [J(2 * l - 1, X, Z, Z) for l in range(1, k + 2)]
    up, down = [], []
    for l in range(1, k + 2):
        w = J(2 * l - 1, X, Y, Z)
        src = a[l - 1]
        if l == 1:
            first = rewrite_arrow(src, HOLE_VAR, "J1-unit", "rl", {"x": X, "y": Z}, X, J(1, X, X, Z))
        else:
            first = rewrite_arrow(src, HOLE_VAR, f"even-odd({l - 1})", "lr", {"x": X, "y": Z},
                                  src, edge_source(w))
        up.append(first.then(Arrow("E", edge_source(w), edge_target(w), [Edge(w)])))
    for l in range(1, k + 1):
        w = J(2 * l, X, Y, Z)
        edge = Arrow("E", a[l], edge_target(w), [Edge(w)])
        back = rewrite_arrow(edge_target(w), HOLE_VAR, f"odd-even({l - 1})", "rl", {"x": X, "y": Z},
                             edge_target(w), b[l - 1])
        down.append(edge.then(back))
    f = Fence(a, b, up, down)
    f.validate()
    return f


@dataclass
class Box:
    """q1 => p1 => q2 => ... => pn with E-arrows along both rows and into b, d."""
    q: List[Term]
    p: List[Term]
    b: Term
    d: Term
    qq: List[Arrow]              # q_i -> q_(i+1)
    pp: List[Arrow]              # p_i -> p_(i+1)
    qp: List[Arrow]              # q_i => p_i
    pq: List[Arrow]              # p_i -> q_(i+1)
    qb: Arrow                    # q_n -> b
    pd: Arrow                    # p_n -> d

    @property
    def n(self) -> int:
        return len(self.q)


def fence_to_box(f: Fence, ell: int, k: int) -> Box:
    """From a 1-fence x -> b <- a -> d build an ell-box from x to b and d(b,d)."""
    if f.n != 1 or f.a[0] is not X:
        raise DirectingError("fence_to_box needs a 1-fence starting at x")
    if ell < 2:
        raise DirectingError("box size must be at least 2")
    b, a, d = f.b[0], f.a[1], f.b[1]
    A_xb, A_ab, A_ad = f.up[0], f.down[0], f.up[1]
    b_ya = binary(b, Y, a)                   # b(y, a)
    a_ya = binary(a, Y, a)                   # a(y, a)
    q = [X]
    p = [binary(a, X, a)]
    qa = [fx(a)]                          # q_i => a
    for i in range(1, ell):
        q.append(binary(b, q[i - 1], a))
        p.append(binary(a, q[i], a))
        qa.append(lift(qa[i - 1], b_ya).then(collapse(binary(b, a, a), a)))
    qq = [special(A_xb, X, a, qa[0])]
    for i in range(1, ell - 1):
        qq.append(lift(qq[i - 1], b_ya))
    pq = [special(A_ab, q[i], a, qa[i]) for i in range(ell - 1)]
    pp = [lift(qq[i], a_ya) for i in range(ell - 1)]
    qp = []
    for i in range(ell):
        grow = collapse(binary(a, q[i], q[i]), q[i]).reverse()
        qp.append(grow.then(lift(qa[i], binary(a, q[i], Y))))
    qb = A_xb
    for i in range(1, ell):
        step = lift(qb, b_ya).then(lift(A_ab, binary(b, b, Y)))
        qb = step.then(collapse(binary(b, b, b), b))
    d_ya = binary(d, Y, a)
    pd = special(A_ad, q[-1], a, qa[-1]).then(lift(qb, d_ya)).then(lift(A_ad, binary(d, b, Y)))
    return Box(q, p, b, binary(d, b, d), qq, pp, qp, pq, qb, pd)


def box_to_chain(bx: Box, k: int) -> Arrow:
    """E-arrow q1 -> J(2k+1)(b, d, d) for a (k+1)-box."""
    if bx.n != k + 1:
        raise DirectingError(f"box_to_chain needs a {k + 1}-box, got {bx.n}")
    q, p = bx.q, bx.p
    cur = rewrite_arrow(q[0], HOLE_VAR, "J1-unit", "rl", {"x": q[0], "y": p[0]}, q[0], J(1, q[0], q[0], p[0]))
    parts = [cur]
    for i in range(1, k + 1):
        o, e = 2 * i - 1, 2 * i
        qi, pi, qn, pn = q[i - 1], p[i - 1], q[i], p[i]
        parts.append(lift(bx.qq[i - 1], J(o, Y, qi, pi)))
        parts.append(lift(bx.qp[i - 1], J(o, qn, Y, pi)))
        parts.append(rewrite_arrow(J(o, qn, pi, pi), HOLE_VAR, f"odd-even({i - 1})", "lr",
                                   {"x": qn, "y": pi}, J(o, qn, pi, pi), J(e, qn, pi, pi)))
        parts.append(lift(bx.pq[i - 1], J(e, qn, Y, pi)))
        parts.append(lift(bx.pp[i - 1], J(e, qn, qn, Y)))
        parts.append(rewrite_arrow(J(e, qn, qn, pn), HOLE_VAR, f"even-odd({i})", "lr",
                                   {"x": qn, "y": pn}, J(e, qn, qn, pn), J(e + 1, qn, qn, pn)))
    top = 2 * k + 1
    qn, pn = q[-1], p[-1]
    parts.append(lift(bx.qp[-1], J(top, qn, Y, pn)))
    parts.append(lift(bx.qb, J(top, Y, pn, pn)))
    parts.append(lift(bx.pd, J(top, bx.b, Y, pn)))
    parts.append(lift(bx.pd, J(top, bx.b, bx.d, Y)))
    out = chain_arrows(parts)
    if out.kind != "E":
        raise DirectingError("box chain is not an E-arrow")
    return out


def jterm(k: int) -> Term:
    """J(x,z) = J(2k+1)(x,z,z)."""
    return J(2 * k + 1, X, Z, Z)


def shrink_fence(f: Fence, k: int, i: int) -> Fence:
    """(k-i+1)-fence to J^(2^i-1)  ->  (k-i)-fence to J^(2^(i+1)-1)."""
    if not 1 <= i < k:
        raise DirectingError(f"shrink index {i} out of range for k={k}")
    n = f.n
    if n != k - i + 1:
        raise DirectingError(f"expected a {k - i + 1}-fence, got a {n}-fence")
    Jxz = jterm(k)
    if f.end is not left_power(Jxz, 2 ** i - 1):
        raise DirectingError("fence does not end at the expected power of J")
    J_x_y = binary(Jxz, X, Y)                  # J(x, y): hole at both z positions

    def sq(arrow: Arrow) -> Arrow:
        return lift(power(arrow, 2, k), J_x_y)

    lead = Fence([X, f.a[1]], [f.b[0], f.b[1]], [f.up[0], f.up[1]], [f.down[0]])
    b1, b2 = f.b[0], f.b[1]
    box = fence_to_box(lead, k + 1, k)
    up0 = box_to_chain(box, k)                                    # x -> J(b1, b2(b1,b2))
    a_new = [X] + [binary(Jxz, X, left_power(f.a[l + 1], 2)) for l in range(1, n)]
    b_new = [up0.target] + [binary(Jxz, X, left_power(f.b[l], 2)) for l in range(2, n + 1)]
    # a1' = J(x, a2^2) -> J(x, b2^2) -> J(b1, b2(b1, b2))
    ctx = binary(Jxz, Y, binary(b2, Y, b2))
    down0 = sq(f.down[1]).then(lift(f.up[0], ctx))
    ups = [up0] + [sq(f.up[l + 1]) for l in range(1, n)]
    downs = [down0] + [sq(f.down[l]) for l in range(2, n)]
    g = Fence(a_new, b_new, ups, downs)
    g.validate()
    if g.end is not left_power(Jxz, 2 ** (i + 1) - 1):
        raise DirectingError("shrunk fence does not end at J^(2^(i+1)-1)")
    return g


@dataclass
class Core:
    k: int
    arrow: Arrow                 # x -> J^(2^k)(b, J^(2^k-1))
    b: Term
    fences: List[Fence]


def build_directed_core(k: int) -> Core:
    f = base_fence(k)
    fences = [f]
    for i in range(1, k):
        f = shrink_fence(f, k, i)
        fences.append(f)
    box = fence_to_box(f, k + 1, k)
    arrow = box_to_chain(box, k)
    Jxz = jterm(k)
    b = f.b[0]
    expected = binary(left_power(Jxz, 2 ** k), b, left_power(Jxz, 2 ** k - 1))
    if arrow.target is not expected:
        raise DirectingError("core endpoint differs from J^(2^k)(b, J^(2^k-1))")
    return Core(k, arrow, b, fences)


# ---------------------------------------------------------------------------
# directed chains


@dataclass
class DirectedResult:
    chain: TermChain
    certificate: Certificate
    b: Term

    @property
    def length(self) -> int:
        return len(self.chain)


def collapse_to_z(current: Term, k: int) -> List[Rewrite]:
    """J(2k+1)(u,v,v) -> v at the root until z remains."""
    top = jname(2 * k + 1)
    steps = []
    while current is not Z:
        if current.head != top or current.args[1] is not current.args[2]:
            raise DirectingError("endpoint is not a tower of J(u, v)")
        u, v = current.args[0], current.args[1]
        steps.append(Rewrite.make(HOLE_VAR, "J-collapse", "lr", {"x": u, "y": v}))
        current = v
    return steps


def direct_jonsson(k: int, core: Optional[Core] = None) -> DirectedResult:
    """Weak directed Jonsson chain with a full-mode certificate ending at z."""
    core = core or build_directed_core(k)
    steps = list(core.arrow.steps) + collapse_to_z(core.arrow.target, k)
    cert = Certificate(k, "full", X, Z, steps)
    chain = TermChain("DJ", tuple(cert.edges()), None, weak=True)
    return DirectedResult(chain, cert, core.b)


def gumm_tail(k: int, b: Term, p: str = "P") -> Term:
    """Q = Q_(2^(k+1)-1): Q0 = z, Q1 = P(x,y,z), then x- and b(x,y)-headed layers."""
    b_xy = substitute(b, {"z": Y}, strict=False)
    q = app(p, (X, Y, Z))
    for i in range(2, 2 ** (k + 1)):
        head = X if i < 2 ** k else b_xy
        q = app(p, (head, substitute(q, {"z": Y}, strict=False), q))
    return q


def direct_gumm(k: int, core: Optional[Core] = None) -> DirectedResult:
    """Weak directed Gumm chain D1..Dm, Q; the certificate stops at the core endpoint."""
    core = core or build_directed_core(k)
    cert = Certificate(k, "weak", X, core.arrow.target, list(core.arrow.steps))
    chain = TermChain("DG", tuple(cert.edges()), gumm_tail(k, core.b), weak=True)
    return DirectedResult(chain, cert, core.b)


def chain_length_formula(k: int) -> Fraction:
    """(2k+1)(k+1)((k+1)^(k-2) - 1)/k, exactly."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return Fraction(2 * k + 1) * (k + 1) * (Fraction(k + 1) ** (k - 2) - 1) / k
