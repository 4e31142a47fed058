"""Replayable proof objects for E-chains in the variety of Jonsson-chain axioms.

A certificate starts at a binary term and applies steps in order:

* ``Rewrite(ctx, axiom, dir, sub)`` -- ``ctx`` contains the hole ``_`` one or
  more times.  The current term must equal ``ctx[_ := L]`` and becomes
  ``ctx[_ := R]`` where ``L = R`` is the axiom instance under ``sub``
  (sides swapped for ``dir == "rl"``).  Several holes rewrite every shared
  copy of a subterm in one step.
* ``Edge(w)`` -- ``w`` must be in the grammar G ::= x | z | Ji(G, T, G).  The
  current term must equal ``w[y := x]`` and becomes ``w[y := z]``.

The checker matches by hash-consed identity only; there is no reasoning
modulo axioms.
"""
from __future__ import annotations

import base64
import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .algebra import (Evaluator, FiniteAlgebra, check_identity, interpret, projection_vectors)
from .terms import (HOLE, HOLE_VAR, Identity, Term, TermError, X, Y, Z, app, iter_dag,
                    print_term, substitute, var)

MODES = ("weak", "full")
_AXIOM_RE = re.compile(r"(J1-unit|J-collapse|odd-even\((\d+)\)|even-odd\((\d+)\)|idem\((\d+)\))\Z")


class CertificateError(ValueError):
    """Malformed certificate data (distinct from a replay rejection)."""


class ModelError(ValueError):
    """An audit model does not satisfy the axioms it is supposed to."""


def jname(i: int) -> str:
    return f"J{i}"


def J(i: int, a: Term, b: Term, c: Term) -> Term:
    return app(jname(i), (a, b, c))


# ---------------------------------------------------------------------------
# axioms


def axiom(ax_id: str, k: int, mode: str = "full") -> Identity:
    """The axiom named ``ax_id`` for chain parameter ``k``; ValueError if out of range."""
    m = _AXIOM_RE.match(ax_id)
    if not m:
        raise ValueError(f"unknown axiom {ax_id!r}")
    if ax_id == "J1-unit":
        return Identity(J(1, X, X, Y), X)
    if ax_id == "J-collapse":
        if mode != "full":
            raise ValueError("J-collapse is only available in full mode")
        return Identity(J(2 * k + 1, X, Y, Y), Y)
    if m.group(4) is not None:
        # derived: Jj(x,x,x) -> J(j-1)(x,x,x) -> ... -> x, see primitive_idem
        j = int(m.group(4))
        if not 1 <= j <= 2 * k + 1:
            raise ValueError(f"idem({j}) out of range for k={k}")
        return Identity(J(j, X, X, X), X)
    if m.group(2) is not None:
        i = int(m.group(2))
        if not 0 <= i <= k - 1:
            raise ValueError(f"odd-even({i}) out of range for k={k}")
        return Identity(J(2 * i + 1, X, Y, Y), J(2 * i + 2, X, Y, Y))
    i = int(m.group(3))
    if not 1 <= i <= k:
        raise ValueError(f"even-odd({i}) out of range for k={k}")
    return Identity(J(2 * i, X, X, Y), J(2 * i + 1, X, X, Y))


def axiom_ids(k: int, mode: str = "full") -> List[str]:
    ids = ["J1-unit"] + [f"odd-even({i})" for i in range(k)] + [f"even-odd({i})" for i in range(1, k + 1)]
    if mode == "full":
        ids.append("J-collapse")
    return ids


def variety_axioms(k: int, mode: str = "weak") -> List[Tuple[str, Identity]]:
    return [(a, axiom(a, k, mode)) for a in axiom_ids(k, mode)]


def derived_ids(k: int) -> List[str]:
    return [f"idem({j})" for j in range(1, 2 * k + 2)]


def primitive_idem(j: int, u: Term) -> List[Tuple[str, str, Dict[str, Term], Term, Term]]:
    """The j primitive steps Jj(u,u,u) -> ... -> u as (axiom, dir, sub, lhs, rhs)."""
    out = []
    for i in range(j, 0, -1):
        lower = J(i - 1, u, u, u) if i > 1 else u
        if i == 1:
            ax, d = "J1-unit", "lr"
        elif i % 2 == 0:
            ax, d = f"odd-even({(i - 2) // 2})", "rl"
        else:
            ax, d = f"even-odd({(i - 1) // 2})", "rl"
        out.append((ax, d, {"x": u, "y": u}, J(i, u, u, u), lower))
    return out


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class Rewrite:
    ctx: Term
    axiom: str
    dir: str
    sub: Tuple[Tuple[str, Term], ...]

    @staticmethod
    def make(ctx: Term, ax: str, direction: str, sub: Mapping[str, Term]) -> "Rewrite":
        return Rewrite(ctx, ax, direction, tuple(sorted(sub.items())))

    def instance(self, k: int, mode: str) -> Tuple[Term, Term]:
        ident = axiom(self.axiom, k, mode)
        sub = dict(self.sub)
        if set(sub) != set(ident.variables):
            raise ValueError(f"substitution must bind exactly {ident.variables}")
        lhs = substitute(ident.lhs, sub)
        rhs = substitute(ident.rhs, sub)
        return (lhs, rhs) if self.dir == "lr" else (rhs, lhs)


@dataclass(frozen=True)
class Edge:
    w: Term


Step = Union[Rewrite, Edge]


def edge_source(w: Term) -> Term:
    return substitute(w, {"y": X}, strict=False)


def edge_target(w: Term) -> Term:
    return substitute(w, {"y": Z}, strict=False)


def plug(ctx: Term, t: Term) -> Term:
    return substitute(ctx, {HOLE: t}, strict=False)


# ---------------------------------------------------------------------------
# the grammar G


@dataclass
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def _j_index(head: str, k: int) -> Optional[int]:
    if not head.startswith("J") or not head[1:].isdigit():
        return None
    i = int(head[1:])
    return i if 1 <= i <= 2 * k + 1 else None


def well_formed(t: Term, k: int, allowed_vars=("x", "y", "z")) -> Verdict:
    """Every symbol is some Ji with i <= 2k+1 used ternarily, every variable allowed."""
    for s in iter_dag(t):
        if s.args is None:
            if s.head not in allowed_vars:
                return Verdict(False, f"variable {s.head} not allowed here")
        elif _j_index(s.head, k) is None or len(s.args) != 3:
            return Verdict(False, f"symbol {s.head}/{len(s.args)} outside the signature for k={k}")
    return Verdict(True)


class _Checker:
    """Well-formedness and G-membership with memo tables shared across a replay."""

    def __init__(self, k: int):
        self.k = k
        self.formed: Dict[Term, bool] = {}
        self.in_g: Dict[Term, bool] = {}

    def _walk(self, t: Term, memo: Dict[Term, bool], leaf, node) -> bool:
        stack = [t]
        while stack:
            s = stack[-1]
            if s in memo:
                stack.pop()
                continue
            if s.args is None:
                memo[s] = leaf(s)
                stack.pop()
                continue
            pending = [a for a in s.args if a not in memo]
            if pending:
                stack.extend(pending)
                continue
            memo[s] = node(s, memo)
            stack.pop()
        return memo[t]

    def formed_ok(self, t: Term) -> bool:
        k = self.k
        return self._walk(t, self.formed, lambda s: s.head in ("x", "y", "z"),
                          lambda s, m: (_j_index(s.head, k) is not None and len(s.args) == 3
                                        and all(m[a] for a in s.args)))

    def g_ok(self, t: Term) -> bool:
        if not self.formed_ok(t):
            return False
        return self._walk(t, self.in_g, lambda s: s.head in ("x", "z"),
                          lambda s, m: m[s.args[0]] and m[s.args[2]])


def check_g_membership(t: Term, k: int) -> Verdict:
    """Accept iff ``t`` derives from G ::= x | z | Ji(G, T, G) with i <= 2k+1.

    The grammar is unambiguous, so the term is its own derivation tree.
    Middle arguments may be any well-formed ternary term.
    """
    wf = well_formed(t, k)
    if not wf:
        return wf
    ok: Dict[Term, bool] = {}
    for s in iter_dag(t):
        if s.args is None:
            ok[s] = s.head in ("x", "z")
        else:
            ok[s] = ok[s.args[0]] and ok[s.args[2]]
    if not ok[t]:
        return Verdict(False, "y occurs outside every middle argument")
    return Verdict(True)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    k: int
    mode: str
    start: Term
    end: Term
    steps: List[Step] = field(default_factory=list)

    def edges(self) -> List[Term]:
        return [s.w for s in self.steps if isinstance(s, Edge)]

    def counts(self) -> Dict[str, int]:
        e = sum(1 for s in self.steps if isinstance(s, Edge))
        return {"steps": len(self.steps), "edges": e, "rewrites": len(self.steps) - e}


@dataclass
class ReplayResult:
    ok: bool
    final: Optional[Term] = None
    index: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def replay(cert: Certificate, *, trace: bool = False, any_witness: bool = False):
    """Apply every step; returns ReplayResult (and the list of terms if ``trace``).

    ``any_witness`` accepts edge witnesses outside G (for checking F-arrows);
    they must still be well formed.
    """
    terms = [cert.start] if trace else None

    def fail(i, why):
        r = ReplayResult(False, None, i, why)
        return (r, terms) if trace else r

    if cert.mode not in MODES:
        return fail(None, f"unknown mode {cert.mode!r}")
    if cert.k < 1:
        return fail(None, "k must be at least 1")
    wf = well_formed(cert.start, cert.k, ("x", "z"))
    if not wf:
        return fail(None, f"start term: {wf.reason}")
    current = cert.start
    chk = _Checker(cert.k)
    for i, step in enumerate(cert.steps):
        if isinstance(step, Rewrite):
            if step.dir not in ("lr", "rl"):
                return fail(i, f"bad direction {step.dir!r}")
            if HOLE not in step.ctx.variables:
                return fail(i, "context has no hole")
            try:
                lhs, rhs = step.instance(cert.k, cert.mode)
            except (ValueError, TermError) as exc:
                return fail(i, str(exc))
            if plug(step.ctx, lhs) is not current:
                return fail(i, f"{step.axiom} ({step.dir}) does not match the current term")
            # the context around the hole already occurs in the current term
            for _, t in step.sub:
                if not chk.formed_ok(t) or "y" in t.variables or HOLE in t.variables:
                    return fail(i, "substitution uses a term outside the signature")
            current = plug(step.ctx, rhs)
        elif isinstance(step, Edge):
            if any_witness:
                if not chk.formed_ok(step.w):
                    return fail(i, "witness uses a term outside the signature")
            elif not chk.g_ok(step.w):
                g = check_g_membership(step.w, cert.k)
                return fail(i, f"witness not in G: {g.reason}")
            if edge_source(step.w) is not current:
                return fail(i, "witness(x,x,z) differs from the current term")
            current = edge_target(step.w)
        else:
            return fail(i, f"unknown step {step!r}")
        if trace:
            terms.append(current)
    if current is not cert.end:
        return fail(len(cert.steps), "final term differs from the claimed end")
    r = ReplayResult(True, current)
    return (r, terms) if trace else r


def expand_derived(cert: Certificate) -> Certificate:
    """Replace every derived idem(j) step by its j primitive axiom steps."""
    steps: List[Step] = []
    for st in cert.steps:
        if isinstance(st, Rewrite) and st.axiom.startswith("idem("):
            j = int(st.axiom[5:-1])
            u = dict(st.sub)["x"]
            prim = [Rewrite.make(st.ctx, ax, d, sub) for ax, d, sub, _, _ in primitive_idem(j, u)]
            if st.dir == "rl":
                prim = [Rewrite(r.ctx, r.axiom, "lr" if r.dir == "rl" else "rl", r.sub)
                        for r in reversed(prim)]
            steps.extend(prim)
        else:
            steps.append(st)
    return Certificate(cert.k, cert.mode, cert.start, cert.end, steps)


# ---------------------------------------------------------------------------
# JSON with a content-addressed term table


def _node_hash(payload: str) -> str:
    return base64.urlsafe_b64encode(hashlib.sha1(payload.encode()).digest()[:9]).decode()


def _encode_node(node) -> str:
    return node if isinstance(node, str) else " ".join(node)


class TermTable:
    """Hash-consed serialization.

    A node is a variable name or ``"head h1 h2 ..."`` listing child hashes;
    its key is a truncated sha1 of that text.
    """

    def __init__(self):
        self.nodes: Dict[str, str] = {}
        self._ref: Dict[Term, str] = {}

    def ref(self, t: Term) -> str:
        refs = self._ref
        stack = [t]
        while stack:
            s = stack[-1]
            if s in refs:
                stack.pop()
                continue
            if s.args is not None:
                pending = [a for a in s.args if a not in refs]
                if pending:
                    stack.extend(pending)
                    continue
                text = " ".join([s.head] + [refs[a] for a in s.args])
            else:
                text = s.head
            h = _node_hash(text)
            self.nodes[h] = text
            refs[s] = h
            stack.pop()
        return refs[t]


def load_terms(nodes: Mapping[str, str]) -> Dict[str, Term]:
    """Rebuild every node, checking each hash against its content."""
    built: Dict[str, Term] = {}
    for root in nodes:
        stack = [root]
        while stack:
            h = stack[-1]
            if h in built:
                stack.pop()
                continue
            text = nodes.get(h)
            if not isinstance(text, str):
                raise CertificateError(f"dangling or malformed term reference {h}")
            if _node_hash(text) != h:
                raise CertificateError(f"term {h} does not match its hash")
            parts = text.split(" ")
            if len(parts) == 1:
                try:
                    built[h] = HOLE_VAR if text == HOLE else var(text)
                except TermError as exc:
                    raise CertificateError(str(exc)) from None
                stack.pop()
                continue
            missing = [c for c in parts[1:] if c not in built]
            if missing:
                if any(c in stack for c in missing):
                    raise CertificateError(f"cyclic term reference at {h}")
                stack.extend(missing)
                continue
            built[h] = app(parts[0], (built[c] for c in parts[1:]))
            stack.pop()
    return built


def certificate_to_json(cert: Certificate) -> dict:
    table = TermTable()
    steps = []
    for s in cert.steps:
        if isinstance(s, Rewrite):
            steps.append({"t": "rw", "ax": s.axiom, "dir": s.dir, "ctx": table.ref(s.ctx),
                          "sub": {v: table.ref(t) for v, t in s.sub}})
        else:
            steps.append({"t": "edge", "w": table.ref(s.w)})
    out = {"k": cert.k, "mode": cert.mode, "start": table.ref(cert.start),
           "end": table.ref(cert.end)}
    out["terms"] = table.nodes
    out["steps"] = steps
    return out


def certificate_from_json(data: Mapping) -> Certificate:
    try:
        terms = load_terms(data["terms"])

        def get(h):
            if h not in terms:
                raise CertificateError(f"unknown term reference {h!r}")
            return terms[h]

        steps: List[Step] = []
        for i, s in enumerate(data["steps"]):
            if s["t"] == "rw":
                steps.append(Rewrite(get(s["ctx"]), str(s["ax"]), str(s["dir"]),
                                     tuple(sorted((v, get(h)) for v, h in s["sub"].items()))))
            elif s["t"] == "edge":
                steps.append(Edge(get(s["w"])))
            else:
                raise CertificateError(f"step {i}: unknown step type {s['t']!r}")
        k = data["k"]
        if not isinstance(k, int):
            raise CertificateError("k must be an integer")
        return Certificate(k, data["mode"], get(data["start"]), get(data["end"]), steps)
    except (KeyError, TypeError, AttributeError) as exc:
        raise CertificateError(f"malformed certificate: {exc!r}") from None


def save_certificate(cert: Certificate, path) -> None:
    with open(path, "w") as fh:
        json.dump(certificate_to_json(cert), fh, separators=(",", ":"))


def load_certificate(path) -> Certificate:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CertificateError(f"not JSON: {exc}") from None
    return certificate_from_json(data)


# ---------------------------------------------------------------------------
# audit against finite models


@dataclass
class AuditResult:
    ok: bool
    model: Optional[int] = None
    index: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def model_of(A: FiniteAlgebra, interpretation: Optional[Mapping[str, Term]], k: int) -> FiniteAlgebra:
    """A with J1..J(2k+1) available as operations."""
    names = [jname(i) for i in range(1, 2 * k + 2)]
    interpretation = dict(interpretation or {})
    needed = {n: interpretation[n] for n in names if n not in A.operations and n in interpretation}
    missing = [n for n in names if n not in A.operations and n not in interpretation]
    if missing:
        raise ModelError(f"model does not interpret {missing}")
    return interpret(A, needed) if needed else A


def check_model(M: FiniteAlgebra, k: int, mode: str) -> None:
    for ax_id, ident in variety_axioms(k, mode):
        res = check_identity(M, ident)
        if not res:
            raise ModelError(f"model fails {ax_id} at {res.counterexample}")


def soundness_audit(cert: Certificate,
                    models: Sequence[Tuple[FiniteAlgebra, Optional[Mapping[str, Term]]]]) -> AuditResult:
    """Evaluate every step of a replay-accepted certificate in finite models.

    Rewrites must preserve the value of the current term.  Each edge
    witness w must restrict to the current and next terms on the (a,a,c)
    and (a,c,c) coordinates, and when the model's Ji satisfy Ji(x,y,x)=x
    also w(a,b,a)=a.  Raises ModelError when a model fails the axioms.
    """
    rep, trace = replay(cert, trace=True)
    if not rep:
        return AuditResult(False, None, rep.index, f"replay: {rep.reason}")
    for mi, (A, interp) in enumerate(models):
        M = model_of(A, interp, cert.k)
        check_model(M, cert.k, cert.mode)
        n = M.size
        middle = all(check_identity(M, Identity(J(i, X, Y, X), X)) for i in range(1, 2 * cert.k + 2))
        px, pz = projection_vectors(n, 2)
        ev2 = Evaluator(M, {"x": px, "z": pz})
        tx, ty, tz = projection_vectors(n, 3)
        ev3 = Evaluator(M, {"x": tx, "y": ty, "z": tz})
        pairs = [(a, c) for a in range(n) for c in range(n)]
        idx_xxz = np.array([a * n * n + a * n + c for a, c in pairs])
        idx_xzz = np.array([a * n * n + c * n + c for a, c in pairs])
        idx_xyx = np.array([a * n * n + b * n + a for a in range(n) for b in range(n)])
        want_xyx = np.repeat(np.arange(n), n)
        for i, step in enumerate(cert.steps):
            before, after = ev2(trace[i]), ev2(trace[i + 1])
            if isinstance(step, Rewrite):
                if not np.array_equal(before, after):
                    return AuditResult(False, mi, i, f"{step.axiom} changes the value in model {mi}")
            else:
                w = ev3(step.w)
                if not (np.array_equal(w[idx_xxz], before) and np.array_equal(w[idx_xzz], after)):
                    return AuditResult(False, mi, i, f"edge endpoints disagree in model {mi}")
                if middle and not np.array_equal(w[idx_xyx], want_xyx):
                    return AuditResult(False, mi, i, f"witness fails w(x,y,x)=x in model {mi}")
    return AuditResult(True)
