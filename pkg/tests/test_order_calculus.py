from __future__ import annotations

from fractions import Fraction
from math import comb

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from vel import order_calculus as oc
from vel.errors import LevelShiftBelowCurrent, NonPositivePower
from vel.order_calculus import Criticality, LevelShift, Op, Order, Term, VarKind

R, U, S_ = VarKind.R, VarKind.U, VarKind.S

small = st.integers(0, 6)
kinds = st.sampled_from(list(VarKind))


def half(x) -> Order:
    return Order.of(Fraction(x))


# ---------------------------------------------------------------- order_of
@pytest.mark.parametrize("k", range(5))
def test_free_boundary_term_is_supercritical_by_half(k):
    # r^k d^(2k) u~ at level k has order -1/2
    assert oc.order_of(Term(k, 2 * k, U), k) == half("-1/2")


def test_bare_sound_perturbation_order_zero():
    assert oc.order_of(Term(0, 0, R), 0) == 0


def test_r_d2_u_at_level_one():
    assert oc.order_of(Term(1, 2, U), 1) == half("-1/2")


@given(m=small, l=small, k=st.integers(0, 4), var=kinds)
def test_order_formula(m, l, k, var):
    expected = Fraction(m - l + k) - (0 if var is R else Fraction(1, 2))
    assert oc.order_of(Term(m, l, var), k).value == expected


def test_negative_powers_rejected():
    with pytest.raises(ValueError):
        Term(-1, 0, R)


def test_order_rejects_non_half_integers():
    with pytest.raises(ValueError):
        Order.of(Fraction(1, 3))


# ---------------------------------------------------------------- classify
@pytest.mark.parametrize("k", range(4))
def test_classify_examples(k):
    assert oc.classify(Term(k + 1, 2 * k, R), k) is Criticality.SUBCRITICAL
    assert oc.classify(Term(k, 2 * k, R), k) is Criticality.CRITICAL
    assert oc.classify(Term(k, 2 * k, U), k) is Criticality.SUPERCRITICAL


# ---------------------------------------------------------------- products
def test_product_examples():
    p = oc.product_order(half(0), half("1/2"))
    assert p.order == half("1/2") and p.estimable
    p = oc.product_order(half("-1/2"), half("1/2"))
    assert p.order == 0 and p.estimable
    assert oc.product_order(half("-1/2"), half(0)).estimable is oc.NotEstimable


@given(a=st.integers(-8, 8), b=st.integers(-8, 8))
def test_product_commutative(a, b):
    assert oc.product_order(Order(a), Order(b)) == oc.product_order(Order(b), Order(a))


@given(m=small, l=small, k=st.integers(0, 4), var=kinds)
def test_product_with_order_zero_factor(m, l, k, var):
    t = Term(m, l, var)
    assert oc.product_order(t, Order(0), k).order == oc.order_of(t, k)


# ---------------------------------------------------------------- operations
def test_dt_base_case_sound():
    res = oc.apply_op(Op.DT, Term(0, 0, R), 1)
    assert res.keys() == {(1, 1, U), (0, 0, U), (0, 0, R)}
    assert res.min_order(1) == half("1/2")


def test_mul_r_example():
    res = oc.apply_op(Op.MUL_R, Term(0, 2, U), 1)
    assert [t.key for t in res] == [(1, 2, U)]
    # d^2 u~ has order -3/2 at k = 1; one factor of r gains exactly one
    assert oc.order_of(Term(0, 2, U), 1) == half("-3/2")
    assert res.min_order(1) == half("-1/2")


def test_level_shift_example():
    t = Term(1, 2, U)
    assert oc.order_of(t, 1) == half("-1/2")
    res = oc.apply_op(LevelShift(2), t, 1)
    assert [x.key for x in res] == [t.key]
    assert res.min_order(2) == half("1/2")


def test_level_shift_below_current_raises():
    with pytest.raises(LevelShiftBelowCurrent):
        oc.apply_op(LevelShift(0), Term(0, 0, R), 1)


@given(m=small, l=small, k=st.integers(0, 4), var=kinds)
def test_mul_r_and_partial_orders(m, l, k, var):
    t = Term(m, l, var)
    o = oc.order_of(t, k)
    assert oc.apply_op(Op.MUL_R, t, k).min_order(k) == o + 1
    assert all(x == o - 1 for x in oc.apply_op(Op.PARTIAL, t, k).orders(k))


@given(m=small, l=small, k=st.integers(0, 4), var=kinds)
def test_dt_loses_exactly_half(m, l, k, var):
    t = Term(m, l, var)
    o = oc.order_of(t, k)
    res = oc.apply_op(Op.DT, t, k)
    assert res.min_order(k) == o - half("1/2")
    if l >= 1 or m >= 1:
        assert any(x >= o for x in res.orders(k))


@given(m=small, l=small, k=st.integers(0, 4), shift=st.integers(0, 4), var=kinds)
def test_level_shift_adds_difference(m, l, k, shift, var):
    t = Term(m, l, var)
    assert oc.order_of(t, k + shift) == oc.order_of(t, k) + shift


def test_dt_keeps_provenance_duplicates():
    # for r~ with l >= 1 the lemma lists r^m d^l u~ twice
    res = oc.apply_op(Op.DT, Term(0, 2, R), 1)
    assert res.counts()[(0, 2, U)] == 2


def test_transport_entropy_rule_is_sharper():
    t = Term(0, 1, S_)
    literal = oc.apply_op(Op.DT, t, 1, "as_velocity")
    transport = oc.apply_op(Op.DT, t, 1, "transport")
    assert (0, 2, R) in literal.keys() and (0, 2, R) not in transport.keys()
    with pytest.raises(ValueError):
        oc.apply_op(Op.DT, t, 1, "bogus")


# ---------------------------------------------------------------- D_t powers
def test_dt_power_examples():
    assert oc.dt_power_expand(S_, 1).keys() == {(0, 0, U)}
    assert oc.dt_power_expand(R, 2).keys() == {(0, 1, R), (1, 2, R)}
    assert oc.dt_power_expand(U, 2).keys() == {(0, 1, U), (1, 2, U), (0, 1, R)}


def test_dt_power_nonpositive():
    with pytest.raises(NonPositivePower):
        oc.dt_power_expand(R, 0)


@pytest.mark.parametrize("var", list(VarKind))
@pytest.mark.parametrize("i", range(1, 9))
def test_dt_power_members_at_worst_critical(var, i):
    k = oc.dt_power_level(i)
    ts = oc.dt_power_expand(var, i)
    assert ts.min_order(k) >= oc.dt_power_claimed_min(var, i)
    assert ts.keys() <= oc.dt_power_iterated(var, i).keys()


# ---------------------------------------------------------------- commutators
def test_commutator_examples():
    assert oc.commutator_expand("PartialDtN", 1).weights() == {(((0, 1),), 0): 1}
    assert oc.commutator_expand("DtPartialN", 1).weights() == {(((0, 1),), 0): -1}
    w = oc.commutator_expand("DtPartialN", 2).weights()
    assert w == {(((0, 1),), 1): -2, (((0, 2),), 0): -1}
    assert oc.commutator_expand("DtPartialN", 2).schematic() == {1: 1, 0: 1}


def _flow_1p1():
    t, x = sp.symbols("t x")
    u0, u1, phi = (sp.Function(n)(t, x) for n in ("u0", "u1", "phi"))
    coords = (t, x)
    u = (u0, u1)

    def Dt(f):
        return u0 * sp.diff(f, t) + u1 * sp.diff(f, x)

    def dnu(f, nu):
        return sp.diff(f, coords[nu])

    return x, u, phi, Dt, dnu


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_second_commutator_against_sympy(N):
    x, u, phi, Dt, dnu = _flow_1p1()
    lhs = Dt(sp.diff(phi, x, N)) - sp.diff(Dt(phi), x, N)
    rhs = 0
    for (factors, inner), c in oc.commutator_expand("DtPartialN", N).weights().items():
        ((b, a),) = factors
        assert b == 0
        rhs += c * sum(sp.diff(u[nu], x, a) * dnu(sp.diff(phi, x, inner), nu) for nu in range(2))
    assert sp.simplify(sp.expand(lhs - rhs)) == 0


def test_second_commutator_binomial_weights():
    for N in range(1, 7):
        w = oc.commutator_expand("DtPartialN", N).weights()
        for i in range(N):
            assert w[(((0, N - i),), i)] == -comb(N, i)


def test_first_commutator_n2_against_sympy():
    x, u, phi, Dt, dnu = _flow_1p1()
    lhs = sp.diff(Dt(Dt(phi)), x) - Dt(Dt(sp.diff(phi, x)))
    w = oc.commutator_expand("PartialDtN", 2).weights()
    du = [sp.diff(c, x) for c in u]
    chain = sum(du[nu] * dnu(u[mu], nu) * dnu(phi, mu) for nu in range(2) for mu in range(2))
    rhs = (w[(((0, 1),), 1)] * sum(du[nu] * dnu(Dt(phi), nu) for nu in range(2))
           + w[(((1, 1),), 0)] * sum(Dt(du[nu]) * dnu(phi, nu) for nu in range(2))
           + w[(((0, 1), (0, 1)), 0)] * chain)
    assert sp.simplify(sp.expand(lhs - rhs)) == 0


# ---------------------------------------------------------------- certifications
def test_dt2_splits():
    assert oc.certify_dt2_split(R).ok
    assert oc.certify_dt2_split(U).ok


@pytest.mark.parametrize("m", [1, 2, 3])
def test_weighted_commutator_classes(m):
    rep = oc.certify_weighted_commutator(m)
    assert rep.ok and rep.critical


def test_check_table_all_pass():
    rows = oc.check_table()
    assert rows and all(r.passed for r in rows)
