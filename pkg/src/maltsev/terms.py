"""Terms over a finite signature.

Terms are immutable and hash-consed: two structurally equal terms are the
same Python object, so ``s is t`` is structural equality and every
traversal below can memoize on node identity.  This keeps the exponentially
large trees produced by left powers (``J^(2^k)``) tractable as DAGs.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

VARIABLES = ("x", "y", "z")
HOLE = "_"

_SYMBOL_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")
_VAR_RE = re.compile(r"(?:[xyz]|v[0-9]+)\Z")


class TermError(ValueError):
    """Base class for term construction and parsing errors."""


class TermSyntaxError(TermError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownSymbolError(TermError):
    pass


class ArityError(TermError):
    pass


class UnboundVariableError(TermError):
    pass


@dataclass(frozen=True)
class OpSymbol:
    name: str
    arity: int

    def __post_init__(self):
        if not self.name or not _SYMBOL_RE.match(self.name):
            raise TermError(f"bad operation symbol {self.name!r}")
        if self.arity < 0:
            raise TermError(f"negative arity for {self.name}")


@dataclass(frozen=True)
class Signature:
    symbols: Tuple[OpSymbol, ...] = ()
    _by_name: Dict[str, OpSymbol] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        table = {}
        for s in self.symbols:
            if s.name in table:
                raise TermError(f"duplicate symbol {s.name}")
            table[s.name] = s
        object.__setattr__(self, "_by_name", table)

    @classmethod
    def of(cls, **arities: int) -> "Signature":
        return cls(tuple(OpSymbol(n, a) for n, a in arities.items()))

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> OpSymbol:
        return self._by_name[name]

    def names(self) -> List[str]:
        return [s.name for s in self.symbols]

    def extend(self, other: "Signature") -> "Signature":
        merged = list(self.symbols)
        for s in other.symbols:
            if s.name in self._by_name:
                if self._by_name[s.name].arity != s.arity:
                    raise ArityError(f"conflicting arity for {s.name}")
            else:
                merged.append(s)
        return Signature(tuple(merged))


def jonsson_signature(k: int, extra: Sequence[str] = ()) -> Signature:
    """Ternary symbols J1..J(2k+1), plus any extra ternary symbols (e.g. P)."""
    names = [f"J{i}" for i in range(1, 2 * k + 2)] + list(extra)
    return Signature(tuple(OpSymbol(n, 3) for n in names))


class Term:
    """A variable (``args is None``) or an application ``head(args...)``.

    Never instantiate directly; use :func:`var` and :func:`app`.
    """

    __slots__ = ("head", "args", "_hash", "_vars", "_depth", "__weakref__")

    head: str
    args: Optional[Tuple["Term", ...]]

    def __hash__(self):
        return self._hash

    # identity equality is structural equality thanks to interning
    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __reduce__(self):
        if self.args is None:
            return (var, (self.head,))
        return (app, (self.head, self.args))

    @property
    def is_var(self) -> bool:
        return self.args is None

    @property
    def variables(self) -> frozenset:
        return self._vars

    @property
    def depth(self) -> int:
        return self._depth

    def __repr__(self):
        text = print_term(self) if dag_size(self) < 200 else f"<{self.head} ... dag={dag_size(self)}>"
        return f"Term({text})"

    def __str__(self):
        return print_term(self)


_INTERN: Dict[tuple, Term] = {}
# deeper terms are walked with an explicit stack
_RECURSION_DEPTH = 2000


def _make(head: str, args: Optional[Tuple[Term, ...]]) -> Term:
    key = (head, args)
    t = _INTERN.get(key)
    if t is not None:
        return t
    t = object.__new__(Term)
    t.head = head
    t.args = args
    t._hash = hash(key)
    if args is None:
        t._vars, t._depth = frozenset((head,)), 0
    elif not args:
        t._vars, t._depth = frozenset(), 0
    else:
        acc = args[0]._vars
        depth = args[0]._depth
        for a in args[1:]:
            if not a._vars <= acc:
                acc = acc | a._vars
            if a._depth > depth:
                depth = a._depth
        t._vars, t._depth = acc, depth + 1
    return _INTERN.setdefault(key, t)


def var(name: str) -> Term:
    if name != HOLE and not _VAR_RE.match(name):
        raise TermError(f"bad variable name {name!r}")
    return _make(name, None)


def app(head: str, args: Iterable[Term]) -> Term:
    args = tuple(args)
    for a in args:
        if not isinstance(a, Term):
            raise TypeError(f"argument {a!r} is not a Term")
    return _make(head, args)


X, Y, Z = var("x"), var("y"), var("z")
HOLE_VAR = var(HOLE)


def iter_dag(t: Term) -> Iterator[Term]:
    """Yield every distinct subterm once, children before parents."""
    seen = set()
    stack = [(t, False)]
    while stack:
        s, expanded = stack.pop()
        if expanded:
            yield s
            continue
        if s in seen:
            continue
        seen.add(s)
        stack.append((s, True))
        if s.args:
            for a in reversed(s.args):
                if a not in seen:
                    stack.append((a, False))


def dag_size(t: Term) -> int:
    return sum(1 for _ in iter_dag(t))


def tree_size(t: Term) -> int:
    """Number of nodes of the unshared tree (may be astronomically large)."""
    sizes: Dict[Term, int] = {}
    for s in iter_dag(t):
        sizes[s] = 1 + sum(sizes[a] for a in s.args) if s.args else 1
    return sizes[t]


def symbols_of(t: Term) -> Dict[str, int]:
    """Map each operation symbol occurring in ``t`` to its arity."""
    out: Dict[str, int] = {}
    for s in iter_dag(t):
        if s.args is not None:
            prev = out.setdefault(s.head, len(s.args))
            if prev != len(s.args):
                raise ArityError(f"symbol {s.head} used with arities {prev} and {len(s.args)}")
    return out


def is_binary(t: Term) -> bool:
    return t.variables <= {"x", "z"}


def substitute(t: Term, bindings: Mapping[str, Term], *, strict: bool = True) -> Term:
    """Simultaneous substitution of variables.

    With ``strict`` every variable of ``t`` must be bound; otherwise unbound
    variables are left in place.
    """
    if strict:
        missing = t.variables - set(bindings)
        if missing:
            raise UnboundVariableError(f"unbound variables {sorted(missing)}")
    bound = frozenset(bindings)
    if t._vars.isdisjoint(bound):
        return t
    # only nodes containing a bound variable are visited
    memo: Dict[Term, Term] = {}
    if t._depth < _RECURSION_DEPTH:
        def go(s: Term) -> Term:
            r = memo.get(s)
            if r is None:
                if s.args is None:
                    r = bindings.get(s.head, s)
                else:
                    r = _make(s.head, tuple(go(a) if not a._vars.isdisjoint(bound) else a
                                            for a in s.args))
                memo[s] = r
            return r
        return go(t)
    stack = [t]
    while stack:
        s = stack[-1]
        if s in memo:
            stack.pop()
            continue
        if s.args is None:
            memo[s] = bindings.get(s.head, s)
            stack.pop()
            continue
        pending = [a for a in s.args if a not in memo and not a.variables.isdisjoint(bound)]
        if pending:
            stack.extend(pending)
            continue
        memo[s] = _make(s.head, tuple(memo.get(a, a) for a in s.args))
        stack.pop()
    return memo[t]


def replace_subterm(t: Term, target: Term, replacement: Term, *, stop: Optional[Term] = None) -> Term:
    """Replace every occurrence of ``target`` in ``t``; never descend into ``stop``."""
    memo: Dict[Term, Term] = {}

    def go(s: Term) -> Term:
        r = memo.get(s)
        if r is not None:
            return r
        if s is target:
            r = replacement
        elif s is stop or s.args is None:
            r = s
        else:
            r = _make(s.head, tuple(go(a) for a in s.args))
        memo[s] = r
        return r

    return go(t)


def contains(t: Term, sub: Term) -> bool:
    if sub.is_var:
        return sub.head in t.variables
    return any(s is sub for s in iter_dag(t))


def left_power(a: Term, k: int) -> Term:
    """a^0 = z and a^(k+1)(x, z) = a(x, a^k); ``a`` must be a binary term."""
    if k < 0:
        raise ValueError("power must be non-negative")
    if not is_binary(a):
        raise TermError("left powers are defined only for terms in x and z")
    result = Z
    for _ in range(k):
        result = substitute(a, {"z": result}, strict=False)
    return result


# ---------------------------------------------------------------------------
# S-expressions


def print_term(t: Term) -> str:
    """Canonical S-expression text.  Linear in the *tree* size of ``t``."""
    parts: List[str] = []
    stack: List[object] = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        s = item
        if s.args is None:
            parts.append(s.head)
            continue
        parts.append("(" + s.head)
        stack.append(")")
        for a in reversed(s.args):
            stack.append(a)
            stack.append(" ")
    return "".join(parts)


# Shared text form: lines "@name term" define a subterm that later lines
# may cite as @name; every other non-blank line is one term of the list.
PLAIN_LIMIT = 200_000


def print_terms(terms: Sequence[Term], *, limit: int = PLAIN_LIMIT) -> List[str]:
    """Lines for ``terms``; plain S-expressions unless their trees exceed ``limit`` nodes."""
    if sum(tree_size(t) for t in terms) <= limit:
        return [print_term(t) for t in terms]
    return _print_shared(terms)


def _print_shared(terms: Sequence[Term]) -> List[str]:
    # parent-edge counts over the joint DAG, then name every node used twice
    uses: Dict[Term, int] = {}
    post: List[Term] = []
    seen = set()
    for t in terms:
        uses[t] = uses.get(t, 0) + 1
        for s in iter_dag(t):
            if s in seen:
                continue
            seen.add(s)
            post.append(s)
            for a in s.args or ():
                uses[a] = uses.get(a, 0) + 1
    names: Dict[Term, str] = {}
    lines: List[str] = []

    def show(s: Term, root: bool) -> str:
        parts: List[str] = []
        stack: List[object] = [(s, root)]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                parts.append(item)
                continue
            u, top = item
            if not top and u in names:
                parts.append(names[u])
            elif u.args is None:
                parts.append(u.head)
            else:
                parts.append("(" + u.head)
                stack.append(")")
                for a in reversed(u.args):
                    stack.append((a, False))
                    stack.append(" ")
        return "".join(parts)

    for s in post:
        if s.args and uses.get(s, 0) > 1:
            name = f"@{len(names) + 1}"
            lines.append(f"{name} {show(s, True)}")
            names[s] = name
    lines.extend(show(t, True) for t in terms)
    return lines


def parse_terms(lines: Iterable[str], sig: Optional[Signature] = None) -> List[Term]:
    """Inverse of :func:`print_terms`; blank lines and ``#`` comments are skipped."""
    refs: Dict[str, Term] = {}
    out: List[Term] = []
    for no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("@"):
                name, _, body = line.partition(" ")
                if name in refs:
                    raise TermSyntaxError(f"{name} defined twice", 0)
                refs[name] = parse_term(body, sig, refs=refs)
            else:
                out.append(parse_term(line, sig, refs=refs))
        except TermError as exc:
            raise TermError(f"line {no}: {exc}") from None
    return out


_TOKEN_RE = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokenize(text: str) -> List[Tuple[str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise TermSyntaxError("unexpected character", pos)
        tok = m.group(1) or m.group(2) or m.group(3)
        if tok is None:
            break
        tokens.append((tok, m.start(m.lastindex)))
        pos = m.end()
    return tokens


def parse_term(text: str, sig: Optional[Signature] = None, *, allow_hole: bool = False,
               refs: Optional[Mapping[str, Term]] = None) -> Term:
    """Parse one S-expression.

    With ``sig`` every head must be a declared symbol of matching arity.
    Without it, heads are accepted but must be used with a consistent arity.
    ``refs`` resolves ``@name`` tokens to previously defined subterms.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise TermSyntaxError("empty input", 0)
    seen_arity: Dict[str, int] = {}
    # iterative parser: frames of (head, head_pos, args)
    frames: List[Tuple[str, int, List[Term]]] = []
    result: Optional[Term] = None
    i = 0
    while i < len(tokens):
        tok, pos = tokens[i]
        if result is not None:
            raise TermSyntaxError("trailing input", pos)
        if tok == "(":
            if i + 1 >= len(tokens):
                raise TermSyntaxError("unterminated expression", pos)
            head, hpos = tokens[i + 1]
            if head in "()" or not _SYMBOL_RE.match(head):
                raise TermSyntaxError(f"expected operation symbol, got {head!r}", hpos)
            if sig is not None and head not in sig:
                raise UnknownSymbolError(f"unknown symbol {head!r} at position {hpos}")
            frames.append((head, hpos, []))
            i += 2
            continue
        if tok == ")":
            if not frames:
                raise TermSyntaxError("unbalanced ')'", pos)
            head, hpos, args = frames.pop()
            if not args:
                raise TermSyntaxError(f"application of {head} without arguments", hpos)
            expected = sig[head].arity if sig is not None else seen_arity.setdefault(head, len(args))
            if expected != len(args):
                raise ArityError(
                    f"{head} expects {expected} arguments, got {len(args)} at position {hpos}")
            node = app(head, args)
        else:
            if tok == HOLE and allow_hole:
                node = HOLE_VAR
            elif tok.startswith("@") and refs is not None:
                if tok not in refs:
                    raise TermSyntaxError(f"undefined reference {tok}", pos)
                node = refs[tok]
            elif _VAR_RE.match(tok):
                node = var(tok)
            elif sig is not None and tok in sig and sig[tok].arity == 0:
                node = app(tok, ())
            else:
                raise TermSyntaxError(f"bad variable {tok!r}", pos)
        if frames:
            frames[-1][2].append(node)
        else:
            result = node
        i += 1
    if frames:
        raise TermSyntaxError("unterminated expression", frames[-1][1])
    assert result is not None
    return result


@dataclass(frozen=True)
class Identity:
    lhs: Term
    rhs: Term

    @property
    def variables(self) -> List[str]:
        vs = self.lhs.variables | self.rhs.variables
        return sorted(vs, key=_var_order)

    def __str__(self):
        return f"{print_term(self.lhs)} = {print_term(self.rhs)}"


def _var_order(name: str):
    if name in VARIABLES:
        return (0, VARIABLES.index(name))
    if name.startswith("v"):
        return (1, int(name[1:]))
    return (2, 0)


def ordered_variables(names: Iterable[str]) -> List[str]:
    return sorted(names, key=_var_order)


def ternary(t: Term, a: Term, b: Term, c: Term) -> Term:
    """t(a, b, c): substitute x, y, z simultaneously."""
    return substitute(t, {"x": a, "y": b, "z": c}, strict=False)


def binary(t: Term, a: Term, c: Term) -> Term:
    """t(a, c) for a binary term t(x, z)."""
    return substitute(t, {"x": a, "z": c}, strict=False)
