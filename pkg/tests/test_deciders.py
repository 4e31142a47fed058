import itertools
from collections import deque

import numpy as np
import pytest

from maltsev.algebra import BinRel, FiniteAlgebra
from maltsev.chains import TermChain, verify_chain
from maltsev.deciders import (NotIdempotentError, build_EF, decide_all, decide_hagemann_mitschke,
                              hm_reachable, path_is_sound, shortest_path, verify_gumm_preorder_property,
                              verify_preorder_collapse)
from maltsev.models import lattice, majority, pixley, projection, xor3
from maltsev.terms import X, Y, Z, app

from conftest import boolean_clone3


def test_majority_report():
    r = decide_all(majority())
    dj = r["directed_jonsson"]
    assert dj.found and [str(t) for t in dj.chain.terms] == ["(maj x y z)"]
    assert r["hagemann_mitschke"].status == "not-found"
    assert r["pixley"].status == "not-found"
    assert r["directed_gumm"].found


def test_lattice_report():
    r = decide_all(lattice())
    assert r["directed_jonsson"].found and r["jonsson"].found
    assert r["hagemann_mitschke"].status == "not-found"
    assert r["hagemann_mitschke"].params["kmax"] == 8


def test_affine_report():
    r = decide_all(xor3())
    assert r["directed_jonsson"].status == "not-found"
    hm = r["hagemann_mitschke"]
    assert hm.found and hm.k == 1
    dg = r["directed_gumm"]
    assert dg.found and dg.chain.terms == (X,) and dg.chain.tail is app("m", (X, Y, Z))


def test_pixley_report():
    r = decide_all(pixley())
    assert r["pixley"].found and r["pixley"].k == 1
    assert r["pixley"].chain.terms == (app("p", (X, Y, Z)),)


def test_projection_algebra_has_nothing():
    r = decide_all(projection())
    assert not any(res.found for res in r.results.values())


def test_non_idempotent_rejected_and_reduct_flag():
    A = FiniteAlgebra.from_functions(2, maj=lambda x, y, z: (x & y) | (y & z) | (x & z),
                                     neg=lambda x: 1 - x)
    with pytest.raises(NotIdempotentError):
        build_EF(A)
    r = decide_all(A, idempotent_reduct=True)
    assert r["directed_jonsson"].found
    assert verify_chain(A, None, r["directed_jonsson"].chain)


def test_resource_cap_reported():
    r = decide_all(lattice(), cap=3)
    assert all(res.status == "resource-exceeded" for res in r.results.values())
    assert "error" in r.stats


def test_report_json_shape():
    out = decide_all(xor3()).to_json()
    assert set(out) == {"conditions", "stats"}
    hm = out["conditions"]["hagemann_mitschke"]
    assert hm == {"status": "found", "k": 1, "kind": "HM", "chain": ["(m x y z)"], "path_length": 1,
                  "search": {"kmax": 8}}


def test_shortest_path_breaks_ties_by_order():
    rel = BinRel(4, {(0, 1), (0, 2), (1, 3), (2, 3)}, {(0, 1): X, (0, 2): Y, (1, 3): Z, (2, 3): Z})
    p = shortest_path(rel, [0], [3])
    assert p.nodes == [0, 1, 3]
    assert shortest_path(rel, [3], [0]) is None


# ---------------------------------------------------------------------------
# all 64 idempotent ternary operations on {0,1}, against a tuple-based oracle

PTS3 = list(itertools.product(range(2), repeat=3))


def _oracle(table):
    F3 = boolean_clone3(table)
    at = lambda t, p: t[PTS3.index(p)]
    pairs = [(a, c) for a in range(2) for c in range(2)]

    def restrict(t, pat):
        return tuple(at(t, tuple((a, c)[i] for i in pat)) for a, c in pairs)
    x, z = (0, 0, 1, 1), (0, 1, 0, 1)
    E, F, M = set(), set(), set()
    for t in F3:
        u, v = restrict(t, (0, 0, 1)), restrict(t, (0, 1, 1))
        F.add((u, v))
        if all(at(t, (a, b, a)) == a for a in range(2) for b in range(2)):
            E.add((u, v))
        if u == z:
            M.add(v)

    def dist(rel, src, targets):
        seen, q = {src: 0}, deque([src])
        while q:
            u = q.popleft()
            if u in targets:
                return seen[u]
            for a, b in rel:
                if a == u and b not in seen:
                    seen[b] = seen[u] + 1
                    q.append(b)
        return None
    return {"dj": dist(E, x, {z}), "hm": dist(F, z, {x}), "p": dist(E, z, {x}), "dg": dist(E, x, M)}


def _idempotent_tables():
    for bits in itertools.product(range(2), repeat=6):
        free = iter(bits)
        yield [0 if p == (0, 0, 0) else 1 if p == (1, 1, 1) else next(free) for p in PTS3]


@pytest.mark.parametrize("table", list(_idempotent_tables()), ids=lambda t: "".join(map(str, t)))
def test_two_element_ternary_exhaustive(table):
    A = FiniteAlgebra.from_tables(2, {"f": (3, table)})
    ef = build_EF(A)
    r = decide_all(A)
    want = _oracle(table)
    dj, hm, px, dg = (r[c] for c in ("directed_jonsson", "hagemann_mitschke", "pixley", "directed_gumm"))
    assert dj.found == (want["dj"] is not None)
    if dj.found:
        assert dj.path_length == want["dj"]
        assert verify_chain(A, None, dj.chain) and verify_chain(A, None, r["jonsson"].chain)
    assert hm.found == (want["hm"] is not None and want["hm"] <= 8)
    if hm.found:
        assert hm.k == want["hm"]
        assert all(hm_reachable(ef, k) for k in range(hm.k, 9))
        assert not hm_reachable(ef, hm.k - 1)
    assert px.found == (want["p"] is not None and want["p"] <= 8)
    if px.found:
        assert dj.found and hm.found and hm.k <= px.k
    assert dg.found == (want["dg"] is not None)
    if dj.found:
        assert dg.found
    for res in r.results.values():
        if res.found:
            assert verify_chain(A, None, res.chain)


def test_edge_witnesses_are_sound():
    ef = build_EF(lattice())
    p = shortest_path(ef.E, [ef.x], [ef.z])
    assert path_is_sound(ef, p)
    hm = decide_hagemann_mitschke(build_EF(xor3()))
    assert hm.found


# ---------------------------------------------------------------------------
# preorder checks

MAJ3 = TermChain("J", (app("maj", (X, Y, Z)),) * 3)


def test_preorder_collapse_holds_when_equal():
    A = majority()
    order = BinRel(2, {(0, 0), (0, 1), (1, 1)})
    assert verify_preorder_collapse(A, MAJ3, order, order).status == "holds"


def test_preorder_collapse_preconditions():
    A = majority()
    order = BinRel(2, {(0, 0), (0, 1), (1, 1)})
    diag = BinRel.diagonal(2)
    # the diagonal does not absorb the order: maj(0,1,0) = 0 but maj(0,1,1) = 1 pairs (0,1) off the diagonal
    res = verify_preorder_collapse(A, MAJ3, diag, order)
    assert res.status == "precondition-failed"
    assert verify_preorder_collapse(A, MAJ3, order, diag).status == "precondition-failed"
    assert verify_preorder_collapse(A, TermChain("J", (X, X, X)), order, order).status == "precondition-failed"


def test_gumm_property_on_affine():
    A = xor3()
    g = TermChain("G", (X,), app("m", (X, Y, Z)))
    res = verify_gumm_preorder_property(A, g, BinRel.diagonal(2), BinRel.full(2))
    assert res.status == "holds"
