import itertools

import pytest

from maltsev.directing import build_directed_core, direct_gumm, direct_jonsson


@pytest.fixture(scope="session")
def cores():
    cache = {}

    def get(k):
        if k not in cache:
            cache[k] = build_directed_core(k)
        return cache[k]
    return get


@pytest.fixture(scope="session")
def directed(cores):
    cache = {}

    def get(k, gumm=False):
        key = (k, gumm)
        if key not in cache:
            cache[key] = direct_gumm(k, cores(k)) if gumm else direct_jonsson(k, cores(k))
        return cache[key]
    return get


def naive_clone(size, ops, g):
    """Oracle: g-ary term operations as tuples, closed by plain set iteration."""
    points = list(itertools.product(range(size), repeat=g))
    elems = {tuple(p[i] for p in points) for i in range(g)}
    while True:
        new = set(elems)
        for f, r in ops:
            for args in itertools.product(sorted(elems), repeat=r):
                new.add(tuple(f(*(a[j] for a in args)) for j in range(len(points))))
        if new == elems:
            return elems
        elems = new


def boolean_clone3(table):
    """Oracle: ternary term operations of ({0,1}, f) as 8-bit masks over the
    points of {0,1}^3 in lexicographic order, closed semi-naively."""
    full = 0xFF
    minterms = [(a, b, c) for a in range(2) for b in range(2) for c in range(2) if table[4 * a + 2 * b + c]]

    def f(u, v, w):
        out = 0
        for a, b, c in minterms:
            out |= (u if a else ~u) & (v if b else ~v) & (w if c else ~w)
        return out & full
    # bit j of a mask is the value at point j, point 0 = (0,0,0) in the high bit
    proj = [sum(1 << (7 - j) for j in range(8) if (j >> (2 - i)) & 1) for i in range(3)]
    elems, new = set(proj), set(proj)
    while new:
        old = sorted(elems)
        found = set()
        for u, v, w in itertools.product(old, repeat=3):
            if u in new or v in new or w in new:
                r = f(u, v, w)
                if r not in elems:
                    found.add(r)
        elems |= found
        new = found
    return [tuple((m >> (7 - j)) & 1 for j in range(8)) for m in elems]


def certificate_mutations(cert, count, seed=0):
    """``count`` seeded single-step mutants of ``cert`` as (description, certificate)."""
    import numpy as np
    from maltsev.certificates import Certificate, Edge, Rewrite, axiom_ids, derived_ids
    from maltsev.terms import X, Z, app, substitute

    rng = np.random.default_rng(seed)
    steps = cert.steps
    ids = axiom_ids(cert.k, cert.mode) + derived_ids(cert.k)
    out = []

    def swap_xz(t):
        return substitute(t, {"x": Z, "z": X}, strict=False)

    def mutate(i, kind):
        s = steps[i]
        new = list(steps)
        if kind == "drop":
            del new[i]
        elif kind == "duplicate":
            new.insert(i, s)
        elif kind == "swap":
            if i + 1 >= len(steps) or steps[i + 1] == s:
                return None
            new[i], new[i + 1] = steps[i + 1], s
        elif isinstance(s, Rewrite):
            if kind == "flip":
                new[i] = Rewrite(s.ctx, s.axiom, "rl" if s.dir == "lr" else "lr", s.sub)
            elif kind == "axiom":
                others = [a for a in ids if a != s.axiom]
                new[i] = Rewrite(s.ctx, others[int(rng.integers(len(others)))], s.dir, s.sub)
            elif kind == "sub":
                v, t = s.sub[int(rng.integers(len(s.sub)))]
                t2 = swap_xz(t) if swap_xz(t) is not t else app("J1", (t, t, t))
                new[i] = Rewrite(s.ctx, s.axiom, s.dir, tuple((a, t2 if a == v else b) for a, b in s.sub))
            elif kind == "context":
                c2 = swap_xz(s.ctx)
                new[i] = Rewrite(c2 if c2 is not s.ctx else app("J1", (s.ctx, X, X)), s.axiom, s.dir, s.sub)
            else:
                return None
        else:
            w = s.w
            if kind == "flip":
                new[i] = Edge(swap_xz(w) if swap_xz(w) is not w else app(w.head, (w.args[2], w.args[1], w.args[0])))
            elif kind == "axiom":
                j = int(w.head[1:])
                new[i] = Edge(app(f"J{j % (2 * cert.k + 1) + 1}", w.args))
            elif kind == "sub":
                new[i] = Edge(app(w.head, (w.args[1], w.args[0], w.args[2])))
            elif kind == "context":
                new[i] = Edge(substitute(w, {"y": X}, strict=False))
            else:
                return None
        if new == steps:
            return None
        return f"{kind} at step {i}", Certificate(cert.k, cert.mode, cert.start, cert.end, new)

    kinds = ["drop", "duplicate", "swap", "flip", "axiom", "sub", "context"]
    while len(out) < count:
        got = mutate(int(rng.integers(len(steps))), kinds[len(out) % len(kinds)])
        if got is not None:
            out.append(got)
    return out


def pytest_addoption(parser):
    parser.addoption("--seed", type=int, default=0, help="seed for randomized acceptance checks")


@pytest.fixture(scope="session")
def seed(request):
    return request.config.getoption("--seed")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
