import json

import pytest

from maltsev.algebra import FiniteAlgebra
from maltsev.certificates import (Certificate, CertificateError, Edge, ModelError, Rewrite, axiom,
                                  axiom_ids, certificate_from_json, certificate_to_json,
                                  check_g_membership, expand_derived, load_certificate, replay,
                                  save_certificate, soundness_audit, well_formed)
from maltsev.models import jonsson_models, majority_model, w_models
from maltsev.terms import HOLE_VAR, X, Y, Z, app, parse_term

from conftest import certificate_mutations

J = lambda i, a, b, c: app(f"J{i}", (a, b, c))


def test_axiom_ranges():
    assert str(axiom("odd-even(0)", 1)) == "(J1 x y y) = (J2 x y y)"
    assert str(axiom("even-odd(1)", 1)) == "(J2 x x y) = (J3 x x y)"
    assert str(axiom("J-collapse", 2)) == "(J5 x y y) = y"
    for bad in ("odd-even(1)", "even-odd(0)", "even-odd(2)", "idem(4)", "foo"):
        with pytest.raises(ValueError):
            axiom(bad, 1)
    with pytest.raises(ValueError):
        axiom("J-collapse", 1, "weak")
    assert axiom_ids(1, "weak") == ["J1-unit", "odd-even(0)", "even-odd(1)"]


def test_g_membership():
    assert check_g_membership(parse_term("(J1 x (J2 y y y) z)"), 1)
    assert check_g_membership(parse_term("(J3 (J1 x y z) x z)"), 1)
    assert not check_g_membership(parse_term("(J1 y x z)"), 1)
    assert not check_g_membership(parse_term("(J4 x y z)"), 1)
    assert not check_g_membership(parse_term("(f x y z)"), 1)
    assert not well_formed(parse_term("(J1 x x)"), 1)


def test_small_certificate_replays():
    # x = J1(x,x,z) -> J1(x,z,z) = J2(x,z,z) ; edge witness J1(x,y,z)
    steps = [Rewrite.make(HOLE_VAR, "J1-unit", "rl", {"x": X, "y": Z}),
             Edge(J(1, X, Y, Z)),
             Rewrite.make(HOLE_VAR, "odd-even(0)", "lr", {"x": X, "y": Z})]
    cert = Certificate(1, "weak", X, J(2, X, Z, Z), steps)
    assert replay(cert)
    bad = Certificate(1, "weak", X, J(2, X, Z, Z), [steps[0], Edge(J(1, Y, X, Z)), steps[2]])
    r = replay(bad)
    assert not r and r.index == 1


@pytest.mark.parametrize("k", [1, 2])
def test_engine_certificates_round_trip(k, directed, tmp_path):
    cert = directed(k).certificate
    data = certificate_to_json(cert)
    assert set(data) == {"k", "mode", "start", "end", "terms", "steps"}
    back = certificate_from_json(json.loads(json.dumps(data)))
    assert back.steps == cert.steps and back.start is cert.start and back.end is cert.end
    path = tmp_path / "c.json"
    save_certificate(cert, path)
    assert replay(load_certificate(path))


def test_json_tampering_detected(directed):
    data = certificate_to_json(directed(1).certificate)
    h = next(iter(data["terms"]))
    data["terms"][h] = "x" if data["terms"][h] != "x" else "z"
    with pytest.raises(CertificateError):
        certificate_from_json(data)
    with pytest.raises(CertificateError):
        certificate_from_json({"k": 1})


def test_k_and_mode_are_enforced(directed):
    cert = directed(2).certificate
    assert not replay(Certificate(1, cert.mode, cert.start, cert.end, cert.steps))
    assert not replay(Certificate(2, "weak", cert.start, cert.end, cert.steps))


def test_expand_derived_uses_primitive_axioms(directed):
    cert = directed(2).certificate
    full = expand_derived(cert)
    assert not any(isinstance(s, Rewrite) and s.axiom.startswith("idem") for s in full.steps)
    assert len(full.steps) > len(cert.steps)
    assert replay(full)


def test_truncated_certificate_rejected(directed):
    cert = directed(1).certificate
    r = replay(Certificate(cert.k, cert.mode, cert.start, cert.end, cert.steps[:-1]))
    assert not r and r.index == len(cert.steps) - 1


def test_audit_requires_models_of_the_axioms(directed):
    cert = directed(1).certificate
    bad = FiniteAlgebra.from_functions(2, J1=lambda x, y, z: z, J2=lambda x, y, z: x, J3=lambda x, y, z: x)
    with pytest.raises(ModelError):
        soundness_audit(cert, [(bad, None)])


def test_audit_on_weak_models(directed):
    cert = directed(2, gumm=True).certificate
    assert soundness_audit(cert, [M.pair() for M in w_models(2)])


def test_mutants_rejected(directed):
    cert = directed(1).certificate
    models = [M.pair() for M in jonsson_models(1)]
    for what, mutant in certificate_mutations(cert, 40, seed=3):
        assert not replay(mutant) or not soundness_audit(mutant, models), what
