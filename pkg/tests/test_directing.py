from fractions import Fraction

import pytest

from maltsev.certificates import Certificate, Edge, check_g_membership, replay, soundness_audit
from maltsev.chains import TermChain, convert_dj_to_simultaneous, verify_chain
from maltsev.directing import (Arrow, DirectingError, apply_special_endomorphism, base_fence,
                               box_to_chain, build_directed_core, chain_length_formula, collapse,
                               direct_jonsson, fence_to_box, fx, jterm, lift, power, shrink_fence)
from maltsev.models import gumm_models, jonsson_models, w_models
from maltsev.terms import X, Y, Z, app, binary, left_power

J = lambda i, a, b, c: app(f"J{i}", (a, b, c))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_base_fence(k):
    f = base_fence(k)
    assert f.n == k and f.end is jterm(k)
    for arrow in f.up + f.down:
        arrow.check(k)


def test_collapse_and_fx():
    t = J(2, J(1, X, X, X), X, J(3, X, X, X))
    arrow = collapse(t, X)
    assert arrow.target is X
    arrow.check(1)
    c = J(2, X, Z, Z)
    f = fx(c)
    assert f.kind == "F" and f.source is X and f.target is c
    f.check(1)


def test_lift_keeps_e_arrows_when_hole_is_middle():
    f = fx(J(2, X, Z, Z))
    assert lift(f, J(1, X, Y, Z)).kind == "E"
    assert lift(f, J(1, Y, X, Z)).kind == "F"


def test_special_endomorphism_and_power():
    k = 1
    f = base_fence(k)
    a = f.up[0]                      # x -> J1(x,z,z)
    b = a.target
    img = apply_special_endomorphism(a, X, b)
    assert img.source is X and img.target is binary(b, X, b)
    img.check(k)
    with pytest.raises(DirectingError):
        apply_special_endomorphism(a, Z, b)
    p = power(a, 3, k)
    assert p.source is left_power(X, 3) and p.target is left_power(b, 3)
    p.check(k)


@pytest.mark.parametrize("ell", [2, 3])
def test_box_from_fence(ell):
    f = base_fence(1)
    bx = fence_to_box(f, ell, 1)
    assert bx.n == ell
    for arrow in bx.qq + bx.pp + bx.pq + [bx.qb, bx.pd]:
        assert arrow.kind == "E"
        arrow.check(1)
    for arrow in bx.qp:
        arrow.check(1)
    if ell == 2:
        chain = box_to_chain(bx, 1)
        assert chain.kind == "E" and chain.source is X
        assert chain.target is J(3, bx.b, bx.d, bx.d)
        chain.check(1)


def test_shrink_fence_lengths():
    f = base_fence(3)
    g = shrink_fence(f, 3, 1)
    assert g.n == 2 and g.end is left_power(jterm(3), 3)
    with pytest.raises(DirectingError):
        shrink_fence(f, 3, 2)


@pytest.mark.parametrize("k", [1, 2])
def test_core_is_e_arrow(k, cores):
    core = cores(k)
    assert core.arrow.kind == "E" and core.arrow.source is X
    core.arrow.check(k)
    assert all(check_g_membership(w, k) for w in (s.w for s in core.arrow.steps if isinstance(s, Edge)))


@pytest.mark.parametrize("k", [1, 2])
def test_direct_jonsson(k, directed):
    res = directed(k)
    cert = res.certificate
    assert cert.mode == "full" and cert.start is X and cert.end is Z
    assert replay(cert)
    assert res.chain.terms == tuple(cert.edges())
    assert res.chain.kind == "DJ" and res.chain.weak
    for M in jonsson_models(k):
        chain = TermChain("DJ", res.chain.terms, weak=M.weak)
        check = verify_chain(M.algebra, M.interpretation, chain)
        assert check, (M.name, check.describe())
        j = convert_dj_to_simultaneous(chain)
        assert len(j) == 2 * len(chain) - 1
        assert verify_chain(M.algebra, M.interpretation, j)
    assert soundness_audit(cert, [M.pair() for M in jonsson_models(k)])


@pytest.mark.parametrize("k", [1, 2])
def test_direct_gumm(k, directed):
    res = directed(k, gumm=True)
    assert res.chain.kind == "DG"
    assert replay(res.certificate)
    assert soundness_audit(res.certificate, [M.pair() for M in w_models(k)])
    for M in gumm_models(k):
        assert verify_chain(M.algebra, M.interpretation, res.chain), M.name


def test_engine_is_deterministic():
    a, b = direct_jonsson(2), direct_jonsson(2, build_directed_core(2))
    assert a.chain.terms == b.chain.terms
    assert a.certificate.counts() == b.certificate.counts()


def test_length_formula():
    assert chain_length_formula(3) == 28
    assert chain_length_formula(4) == 270
    assert chain_length_formula(1) == -3
    assert chain_length_formula(2) == 0
    assert chain_length_formula(5) == Fraction(11 * 6 * (6 ** 3 - 1), 5)
    with pytest.raises(ValueError):
        chain_length_formula(0)
