import pytest
from hypothesis import given, settings, strategies as st

from maltsev.terms import (HOLE_VAR, X, Y, Z, ArityError, Identity, Signature, TermError,
                           TermSyntaxError, UnknownSymbolError, app, binary, contains, dag_size,
                           is_binary, jonsson_signature, left_power, parse_term, parse_terms,
                           print_term, print_terms, replace_subterm, substitute, symbols_of,
                           ternary, tree_size, var)


def terms(max_leaves=12):
    leaves = st.sampled_from([X, Y, Z])
    return st.recursive(
        leaves,
        lambda ch: st.builds(lambda h, a, b, c: app(h, (a, b, c)), st.sampled_from(["J1", "J2", "P"]),
                             ch, ch, ch),
        max_leaves=max_leaves)


def test_hash_consing_gives_identity_equality():
    a = app("f", (X, app("g", (Y, Z))))
    b = app("f", (var("x"), app("g", (var("y"), var("z")))))
    assert a is b
    assert app("f", (X, Y)) is not app("f", (Y, X))


@given(terms())
def test_print_parse_round_trip(t):
    assert parse_term(print_term(t)) is t


def test_canonical_text_uses_single_spaces():
    assert print_term(parse_term("( maj   x\n y  z )")) == "(maj x y z)"


@pytest.mark.parametrize("text, err", [
    ("(maj x y", TermSyntaxError),
    ("maj x y z)", TermSyntaxError),
    ("(maj x y z) x", TermSyntaxError),
    ("(f x (f x y))", None),
    ("(f x (f y))", ArityError),
    ("(1f x)", TermSyntaxError),
    ("(f w)", TermSyntaxError),
    ("", TermSyntaxError),
])
def test_parse_errors(text, err):
    if err is None:
        parse_term(text)
    else:
        with pytest.raises(err):
            parse_term(text)


def test_signature_checks():
    sig = jonsson_signature(1)
    assert parse_term("(J2 x y z)", sig) is app("J2", (X, Y, Z))
    with pytest.raises(UnknownSymbolError):
        parse_term("(J4 x y z)", sig)
    with pytest.raises(ArityError):
        parse_term("(J1 x y)", sig)
    with pytest.raises(TermError):
        Signature.of(**{"2bad": 1})


def test_hole_only_when_allowed():
    with pytest.raises(TermSyntaxError):
        parse_term("(f _ x)")
    assert parse_term("(f _ x)", allow_hole=True) is app("f", (HOLE_VAR, X))


def test_substitution_is_simultaneous():
    t = app("f", (X, Y))
    assert substitute(t, {"x": Y, "y": X}) is app("f", (Y, X))


def test_substitution_strict_requires_all_variables():
    with pytest.raises(TermError):
        substitute(app("f", (X, Y)), {"x": Z})
    assert substitute(app("f", (X, Y)), {"x": Z}, strict=False) is app("f", (Z, Y))


def test_dag_and_tree_sizes():
    t = X
    for _ in range(40):
        t = app("f", (t, t))
    assert dag_size(t) == 41
    assert tree_size(t) == 2 ** 41 - 1


def test_left_power():
    a = app("b", (X, Z))
    assert left_power(a, 0) is Z
    assert left_power(a, 1) is a
    assert left_power(a, 3) is app("b", (X, app("b", (X, app("b", (X, Z))))))
    with pytest.raises(TermError):
        left_power(app("f", (X, Y)), 2)


def test_helpers():
    t = parse_term("(J1 x (J2 x y z) (J2 x y z))")
    assert symbols_of(t) == {"J1": 3, "J2": 3}
    assert contains(t, app("J2", (X, Y, Z)))
    assert not is_binary(t)
    assert ternary(app("J2", (X, Y, Z)), X, X, Z) is app("J2", (X, X, Z))
    assert binary(app("m", (X, Z)), Z, X) is app("m", (Z, X))
    assert replace_subterm(t, app("J2", (X, Y, Z)), Z) is app("J1", (X, Z, Z))


def test_identity_variables_ordered():
    assert Identity(app("f", (Z, Y)), X).variables == ["x", "y", "z"]


@settings(max_examples=50)
@given(st.lists(terms(20), min_size=1, max_size=5))
def test_shared_text_round_trip(ts):
    lines = print_terms(ts, limit=0)
    back = parse_terms(lines)
    assert len(back) == len(ts) and all(a is b for a, b in zip(back, ts))


def test_shared_text_is_small_for_deep_terms():
    t = X
    for i in range(60):
        t = app("J1", (X, t, t))
    lines = print_terms([t, app("J2", (t, Y, t))])
    assert len(lines) < 200 and sum(map(len, lines)) < 5000
    assert parse_terms(lines)[1] is app("J2", (t, Y, t))


def test_shared_text_rejects_undefined_reference():
    with pytest.raises(TermError):
        parse_terms(["(f x @3)"])
