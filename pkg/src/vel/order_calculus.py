"""Book-keeping of free-boundary terms r^m d^l X by their H^{2k} order.

A term ``r^m d^l X`` with X one of the linearized unknowns has order

    O = m - l + k - 1/2   for X = s~ or u~,
    O = m - l + k         for X = r~,

at level k.  Negative order means the term cannot be controlled by the
H^{2k} norm (supercritical), zero is critical, positive subcritical.  Orders
are kept as doubled integers so every comparison is exact.

The module provides the operator actions (multiplication by r, a spatial
derivative, a convective derivative, a change of level), the closed-form
expansion of D_t^i, exact commutator schematics, and a few certifications
of operator splittings used by the elliptic estimates.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Union

from .errors import LevelShiftBelowCurrent, NonPositivePower


class VarKind(Enum):
    S = "s~"
    R = "r~"
    U = "u~"

    def __str__(self) -> str:
        return self.value


@total_ordering
@dataclass(frozen=True)
class Order:
    doubled: int

    @classmethod
    def of(cls, x) -> "Order":
        f = Fraction(x)
        if (2 * f).denominator != 1:
            raise ValueError(f"orders are half-integers, got {x}")
        return cls(int(2 * f))

    @property
    def value(self) -> Fraction:
        return Fraction(self.doubled, 2)

    def __add__(self, other) -> "Order":
        o = other if isinstance(other, Order) else Order.of(other)
        return Order(self.doubled + o.doubled)

    def __sub__(self, other) -> "Order":
        o = other if isinstance(other, Order) else Order.of(other)
        return Order(self.doubled - o.doubled)

    def __eq__(self, other) -> bool:
        if isinstance(other, Order):
            return self.doubled == other.doubled
        try:
            return self.doubled == Order.of(other).doubled
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other) -> bool:
        o = other if isinstance(other, Order) else Order.of(other)
        return self.doubled < o.doubled

    def __hash__(self) -> int:
        return hash(self.doubled)

    def __float__(self) -> float:
        return self.doubled / 2

    def __str__(self) -> str:
        return str(self.value)

    __repr__ = __str__


@dataclass(frozen=True)
class Term:
    """Schematic term r^m d^l X; ``note`` records which rewrite produced it."""

    m: int
    l: int
    var: VarKind
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.m < 0 or self.l < 0:
            raise ValueError("r power and derivative count must be non-negative")

    @property
    def key(self) -> tuple:
        return (self.m, self.l, self.var)

    def __str__(self) -> str:
        r = "" if self.m == 0 else ("r " if self.m == 1 else f"r^{self.m} ")
        d = "" if self.l == 0 else ("d " if self.l == 1 else f"d^{self.l} ")
        return f"{r}{d}{self.var}"



def order_of(t: Term, k: int) -> Order:
    half = 0 if t.var is VarKind.R else 1
    return Order(2 * (t.m - t.l + k) - half)


class Criticality(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def classify(t: Term, k: int) -> Criticality:
    d = order_of(t, k).doubled
    if d > 0:
        return Criticality.SUBCRITICAL
    if d == 0:
        return Criticality.CRITICAL
    return Criticality.SUPERCRITICAL


@dataclass(frozen=True)
class ProductOrder:
    order: Order
    estimable: bool


NotEstimable = False  # readability alias for ``ProductOrder.estimable``


def product_order(a: Union[Term, Order], b: Union[Term, Order], k: int | None = None) -> ProductOrder:
    """Order of a product: the sum of the factor orders.

    Estimable against the H^{2k} norm squared iff the sum is non-negative.
    """
    oa = order_of(a, k) if isinstance(a, Term) else a
    ob = order_of(b, k) if isinstance(b, Term) else b
    s = oa + ob
    return ProductOrder(s, s.doubled >= 0)


@dataclass(frozen=True)
class TermSum:
    terms: tuple[Term, ...] = ()

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "TermSum") -> "TermSum":
        return TermSum(self.terms + tuple(other.terms))

    def orders(self, k: int) -> list[Order]:
        return [order_of(t, k) for t in self.terms]

    def min_order(self, k: int) -> Order:
        if not self.terms:
            raise ValueError("empty term sum has no minimum order")
        return min(self.orders(k))

    def keys(self) -> set:
        return {t.key for t in self.terms}

    def counts(self) -> Counter:
        return Counter(t.key for t in self.terms)

    def unique(self) -> "TermSum":
        seen, out = set(), []
        for t in self.terms:
            if t.key not in seen:
                seen.add(t.key)
                out.append(t)
        return TermSum(tuple(out))

    def __str__(self) -> str:
        return " + ".join(str(t) for t in self.terms) or "0"


# ---------------------------------------------------------------- operators
class Op(Enum):
    MUL_R = "MulR"
    PARTIAL = "Partial"
    DT = "Dt"


@dataclass(frozen=True)
class LevelShift:
    K: int


ENTROPY_RULES = ("as_velocity", "transport")


def _dt_terms(t: Term, entropy_rule: str) -> list[Term]:
    m, l, v = t.m, t.l, t.var
    S_, R_, U_ = VarKind.S, VarKind.R, VarKind.U
    out: list[Term] = []
    if v is S_ and entropy_rule == "transport":
        # D_t s~ = -u~.ds : the entropy never loses half an order
        out.append(Term(m, l, U_, "source u~ ds"))
        out += [Term(m, i + 1, S_, f"commutator i={i}") for i in range(l)]
        if m >= 1:
            out.append(Term(m, l, S_, "D_t r^m"))
        return out
    if v is R_:
        out.append(Term(m + 1, l + 1, U_, "r d u~"))
        if l == 0:
            out.append(Term(m, 0, U_, "u~ dr"))
            out.append(Term(m, 0, R_, "undifferentiated r~ (absorbed)"))
        else:
            out.append(Term(m, l, U_, "dr d^l u~"))
            out.append(Term(m, l, U_, "d^l (u~ dr)"))
            out += [Term(m, i + 1, R_, f"commutator i={i}") for i in range(l)]
            if m >= 1:
                out.append(Term(m, l, R_, "D_t r^m"))
        return out
    # u~, and s~ under the rule "identical to u~"
    self_var = v
    out.append(Term(m, l + 1, R_, "d r~"))
    out.append(Term(m, l, U_, "source u~"))
    out.append(Term(m, l, S_, "source s~"))
    if l >= 1:
        out += [Term(m, i + 1, self_var, f"commutator i={i}") for i in range(l)]
    if m >= 1:
        out.append(Term(m, l, self_var, "D_t r^m"))
    return out


def apply_op(op: Union[Op, LevelShift, str], t: Term, k: int, entropy_rule: str = "as_velocity") -> TermSum:
    """Schematic action of one operation on a single term.

    ``entropy_rule`` selects how D_t acts on entropy terms: "as_velocity" treats s~
    exactly like u~, "transport" uses the sharper rule D_t s~ ~ u~.
    """
    if isinstance(op, str):
        op = Op(op)
    if isinstance(op, LevelShift):
        if op.K < k:
            raise LevelShiftBelowCurrent(f"K={op.K} < k={k}")
        return TermSum((t,))
    if op is Op.MUL_R:
        return TermSum((Term(t.m + 1, t.l, t.var, "r T"),))
    if op is Op.PARTIAL:
        out = [Term(t.m, t.l + 1, t.var, "d hits X")]
        if t.m >= 1:
            out.append(Term(t.m - 1, t.l, t.var, "d hits r^m"))
        return TermSum(tuple(out))
    if op is Op.DT:
        if entropy_rule not in ENTROPY_RULES:
            raise ValueError(f"entropy_rule must be one of {ENTROPY_RULES}")
        return TermSum(tuple(_dt_terms(t, entropy_rule)))
    raise ValueError(f"unknown operation {op!r}")


def claimed_min_order(op: Union[Op, LevelShift], t: Term, k: int) -> Order:
    """Minimum order each operation is claimed to produce."""
    o = order_of(t, k)
    if isinstance(op, LevelShift):
        return o + (op.K - k)
    return {Op.MUL_R: o + 1, Op.PARTIAL: o - 1, Op.DT: o - Fraction(1, 2)}[op]


def apply_op_to_sum(op, ts: TermSum, k: int, entropy_rule: str = "as_velocity") -> TermSum:
    out: tuple = ()
    for t in ts:
        out += apply_op(op, t, k, entropy_rule).terms
    return TermSum(out)


# ---------------------------------------------------------------- D_t powers
def dt_power_expand(var: VarKind, i: int) -> TermSum:
    """Critical and supercritical terms of D_t^i applied to a bare unknown."""
    if i < 1:
        raise NonPositivePower(f"power must be positive, got {i}")
    S_, R_, U_ = VarKind.S, VarKind.R, VarKind.U
    if var is S_:
        if i == 1:
            return TermSum((Term(0, 0, U_, "base"),))
        return dt_power_expand(U_, i - 1)
    out: list[Term] = []
    if var is R_:
        if i % 2 == 0:
            h = i // 2
            out = [Term(l, l + h, R_, "even") for l in range(h + 1)]
        else:
            h = (i - 1) // 2
            out = [Term(l, l + h, U_, "odd") for l in range((i + 1) // 2 + 1)]
        return TermSum(tuple(out))
    if i % 2 == 0:
        h = i // 2
        out = [Term(l, l + h, U_, "even u~") for l in range(h + 1)]
        out += [Term(j, j + h, R_, "even r~") for j in range(h)]
    else:
        h = (i - 1) // 2
        for l in range(h + 1):
            out.append(Term(l, l + h + 1, R_, "odd r~"))
            out.append(Term(l, l + h, U_, "odd u~"))
            out.append(Term(l, l + h, S_, "odd s~"))
    return TermSum(tuple(out))


def dt_power_level(i: int) -> int:
    """The level ceil(i/2) at which D_t^i terms are weighed."""
    return (i + 1) // 2


def dt_power_claimed_min(var: VarKind, i: int) -> Order:
    """Iterating the one-step loss of 1/2 from the bare unknown."""
    k = dt_power_level(i)
    steps = i - 1 if var is VarKind.S else i
    return order_of(Term(0, 0, var), k) - Fraction(steps, 2)


def dt_power_iterated(var: VarKind, i: int, entropy_rule: str = "as_velocity") -> TermSum:
    """D_t^i by repeated single-step rewriting, deduplicated per step."""
    ts = TermSum((Term(0, 0, var),))
    if var is VarKind.S and entropy_rule == "as_velocity":
        # the lemma starts entropy chains from D_t s~ ~ u~
        ts = TermSum((Term(0, 0, VarKind.U),))
        i -= 1
    for _ in range(i):
        ts = apply_op_to_sum(Op.DT, ts, 0, entropy_rule).unique()
    return ts


# ---------------------------------------------------------------- commutators
@dataclass(frozen=True)
class CommTerm:
    """coef * prod(D_t^b d^a u) * d_nu(W^i phi) with W = D_t or d."""

    coef: int
    factors: tuple[tuple[int, int], ...]
    inner: int

    def cls(self) -> str:
        f = " ".join(_factor_str(b, a) for b, a in self.factors)
        return f"{self.coef:+d} {f}"


def _factor_str(b: int, a: int) -> str:
    s = ""
    if b:
        s += "D_t" + (f"^{b}" if b > 1 else "") + " "
    s += "d" + (f"^{a}" if a > 1 else "")
    return f"({s} u)"


@dataclass(frozen=True)
class CommutatorExpansion:
    kind: str
    N: int
    terms: tuple[CommTerm, ...]

    def schematic(self) -> Counter:
        """Multiset {inner derivative count: number of coefficient classes}."""
        return Counter(t.inner for t in self.terms)

    def weights(self) -> dict:
        return {(t.factors, t.inner): t.coef for t in self.terms}


def _collect(terms: Iterable[CommTerm]) -> tuple[CommTerm, ...]:
    acc: dict = {}
    for t in terms:
        key = (tuple(sorted(t.factors)), t.inner)
        acc[key] = acc.get(key, 0) + t.coef
    return tuple(CommTerm(c, f, i) for (f, i), c in sorted(acc.items(), key=lambda kv: (-kv[0][1], kv[0][0])) if c != 0)


def _leibniz(t: CommTerm, which: int) -> list[CommTerm]:
    """Distribute one derivative (which=0 -> D_t, 1 -> d) over the factors."""
    out = []
    for j, (b, a) in enumerate(t.factors):
        nb = (b + 1, a) if which == 0 else (b, a + 1)
        out.append(CommTerm(t.coef, t.factors[:j] + (nb,) + t.factors[j + 1:], t.inner))
    return out


def commutator_expand(kind: str, N: int) -> CommutatorExpansion:
    """Exact expansion of [d, D_t^N] (kind "PartialDtN") or [D_t, d^N] ("DtPartialN").

    Uses [d, D_t] phi = (d u^nu) d_nu phi, the recursions
    [D_t, d^N] = [D_t, d] d^(N-1) + d [D_t, d^(N-1)] and
    [d, D_t^N] = [d, D_t] D_t^(N-1) + D_t [d, D_t^(N-1)],
    and D_t d_nu X = d_nu D_t X - (d_nu u^mu) d_mu X.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if kind == "DtPartialN":
        terms: tuple = (CommTerm(-1, ((0, 1),), 0),)
        for n in range(2, N + 1):
            new = [CommTerm(-1, ((0, 1),), n - 1)]
            for t in terms:
                new += _leibniz(t, 1)
                new.append(CommTerm(t.coef, t.factors, t.inner + 1))
            terms = _collect(new)
        return CommutatorExpansion(kind, N, _collect(terms))
    if kind == "PartialDtN":
        terms = (CommTerm(1, ((0, 1),), 0),)
        for n in range(2, N + 1):
            new = [CommTerm(1, ((0, 1),), n - 1)]
            for t in terms:
                new += _leibniz(t, 0)
                new.append(CommTerm(t.coef, t.factors, t.inner + 1))
                # D_t d_nu X -> d_nu D_t X - (d_nu u^mu) d_mu X
                new.append(CommTerm(-t.coef, t.factors + ((0, 1),), t.inner))
            terms = _collect(new)
        return CommutatorExpansion(kind, N, _collect(terms))
    raise ValueError("kind must be 'PartialDtN' or 'DtPartialN'")


# ---------------------------------------------------------------- certifications
def operator_schematic(name: str) -> TermSum:
    """Leading schematic terms of the good spatial operators."""
    R_, U_ = VarKind.R, VarKind.U
    table = {
        "L1": (Term(1, 2, R_, "r d^2 r~"), Term(0, 1, R_, "dr d r~")),
        "L2": (Term(1, 2, U_, "r d^2 u~"), Term(0, 1, U_, "dr d u~")),
        "L3": (Term(1, 2, U_, "r d^2 u~"), Term(0, 1, U_, "dr d u~")),
    }
    return TermSum(table[name])


@dataclass(frozen=True)
class SplitReport:
    matched: TermSum
    remainder: TermSum
    remainder_min: Order
    claimed: Order
    ok: bool


def certify_dt2_split(var: VarKind, k: int = 1, entropy_rule: str = "as_velocity") -> SplitReport:
    """D_t^2 r~ ~ L1 r~ + (order >= 1/2) and D_t^2 u~ ~ (L2+L3) u~ + (order >= 0)."""
    ops = {VarKind.R: ("L1",), VarKind.U: ("L2", "L3")}[var]
    claimed = {VarKind.R: Order.of(Fraction(1, 2)), VarKind.U: Order.of(0)}[var]
    ts = apply_op_to_sum(Op.DT, apply_op(Op.DT, Term(0, 0, var), k, entropy_rule), k, entropy_rule)
    op_keys = set()
    for o in ops:
        op_keys |= operator_schematic(o).keys()
    matched = TermSum(tuple(t for t in ts if t.key in op_keys))
    rest = TermSum(tuple(t for t in ts if t.key not in op_keys))
    rmin = rest.min_order(k)
    ok = rmin >= claimed and matched.keys() == op_keys
    return SplitReport(matched, rest, rmin, claimed, ok)


@dataclass(frozen=True)
class WeightedCommutatorReport:
    m: int
    b: float
    critical: dict          # (r power, phi derivative count, power of dr) -> coefficient
    min_remainder_order: Fraction
    has_supercritical: bool
    critical_classes_ok: bool

    @property
    def ok(self) -> bool:
        return (not self.has_supercritical) and self.critical_classes_ok and self.min_remainder_order >= Fraction(1, 2)


def certify_weighted_commutator(m: int, b: float = 0) -> WeightedCommutatorReport:
    """Exact one-dimensional [r^m d^(2m), L] phi for L = a(x)(r d^2 + (c+b) r' d).

    phi stands for D_t^(2j-2) r~, so a term r^p (derivatives of r, a) d^q phi
    has order p - q + m + 1 at level k = m + j (the leading part of phi is
    d^(j-1) r~).  Derivatives of r beyond the undifferentiated power and all
    derivatives of the prefactor a count as bounded coefficients.

    Checks that nothing is supercritical, that the critical terms fall in the
    classes r^m dr d^(2m+1) phi and r^(m-1) (dr)^2 d^(2m) phi, and that the
    remainder has order >= 1/2.
    """
    import sympy as sp

    x = sp.Symbol("x")
    c = sp.Symbol("c", positive=True)
    r = sp.Function("r")(x)
    a = sp.Function("a")(x)
    phi = sp.Function("phi")(x)
    bb = sp.nsimplify(b)

    def L(g):
        return a * (r * sp.diff(g, x, 2) + (c + bb) * sp.diff(r, x) * sp.diff(g, x))

    def A(g):
        return r ** m * sp.diff(g, x, 2 * m)

    expr = sp.expand(A(L(phi)) - L(A(phi)))
    top = 2 * m + 4
    R = sp.symbols(f"R0:{top}")
    Av = sp.symbols(f"A0:{top}")
    P = sp.symbols(f"P0:{top}")
    for n in range(top - 1, 0, -1):
        expr = expr.subs(sp.diff(phi, x, n), P[n]).subs(sp.diff(r, x, n), R[n]).subs(sp.diff(a, x, n), Av[n])
    expr = expr.subs(phi, P[0]).subs(r, R[0]).subs(a, Av[0])
    poly = sp.Poly(sp.expand(expr), *R, *Av, *P)
    critical: dict = {}
    min_rest = None
    superc = False
    for mon, co in poly.terms():
        p = mon[0]
        q = [n for n in range(top) if mon[2 * top + n]][0]
        dr_pow = mon[1]
        o = Fraction(p - q + m + 1)
        if o < 0:
            superc = True
        elif o == 0:
            key = (p, q, dr_pow, tuple(mon[2:top]), tuple(mon[top:2 * top]))
            critical[key] = critical.get(key, 0) + co
        else:
            min_rest = o if min_rest is None else min(min_rest, o)
    critical = {k_: sp.factor(v) for k_, v in critical.items() if sp.simplify(v) != 0}
    allowed = {(m, 2 * m + 1), (m - 1, 2 * m)}
    classes_ok = all((k_[0], k_[1]) in allowed for k_ in critical)
    return WeightedCommutatorReport(
        m=m, b=float(b),
        critical={(k_[0], k_[1], k_[2]): v for k_, v in critical.items()},
        min_remainder_order=min_rest if min_rest is not None else Fraction(10 ** 6),
        has_supercritical=superc, critical_classes_ok=classes_ok,
    )


# ---------------------------------------------------------------- exhaustive suite
@dataclass(frozen=True)
class CheckRow:
    term: str
    k: int
    op: str
    claimed_min_order: str
    computed_min_order: str
    passed: bool


def check_table(max_m: int = 6, max_l: int = 6, max_k: int = 4, max_i: int = 8,
                entropy_rule: str = "as_velocity") -> list[CheckRow]:
    """Every lemma statement on operation orders, evaluated exhaustively."""
    rows: list[CheckRow] = []
    for var in VarKind:
        for m in range(max_m + 1):
            for l in range(max_l + 1):
                t = Term(m, l, var)
                for k in range(max_k + 1):
                    o = order_of(t, k)
                    for op in (Op.MUL_R, Op.PARTIAL, Op.DT):
                        res = apply_op(op, t, k, entropy_rule)
                        claimed = claimed_min_order(op, t, k)
                        got = res.min_order(k)
                        ok = got == claimed
                        if op is Op.PARTIAL:
                            ok = ok and all(x == claimed for x in res.orders(k))
                        if op is Op.DT and (l >= 1 or m >= 1):
                            ok = ok and any(x >= o for x in res.orders(k))
                        rows.append(CheckRow(str(t), k, op.value, str(claimed), str(got), ok))
                    for K in range(k, max_k + 1):
                        shifted = order_of(t, K)
                        claimed = claimed_min_order(LevelShift(K), t, k)
                        rows.append(CheckRow(str(t), k, f"LevelShift({K})", str(claimed), str(shifted), shifted == claimed))
    # sums of orders
    for da in range(-4, 5):
        for db in range(-4, 5):
            pa, pb = product_order(Order(da), Order(db)), product_order(Order(db), Order(da))
            ok = pa == pb and pa.order.doubled == da + db and pa.estimable == (da + db >= 0)
            rows.append(CheckRow(f"O={Fraction(da, 2)}*O={Fraction(db, 2)}", 0, "Product",
                                 str(Order(da + db)), str(pa.order), ok))
    # D_t^i expansions
    for var in VarKind:
        for i in range(1, max_i + 1):
            k = dt_power_level(i)
            lemma = dt_power_expand(var, i)
            claimed = dt_power_claimed_min(var, i)
            got = lemma.min_order(k)
            iterated = dt_power_iterated(var, i, entropy_rule)
            ok = got == claimed and iterated.min_order(k) == claimed
            # every lemma family must be produced by repeated single steps
            ok = ok and lemma.keys() <= iterated.keys()
            rows.append(CheckRow(f"D_t^{i} {var}", k, "DtPower", str(claimed), str(got), ok))
    return rows
