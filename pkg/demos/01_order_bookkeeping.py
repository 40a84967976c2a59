"""Order bookkeeping for the differentiated linearized system.

Every term r^m d^l X (X one of s~, r~, u~) gets a half-integer "order" at
energy level k.  Positive order means the term is controlled by the energy,
zero is critical, negative would break the estimates.  This script walks
through the rules and then runs the full consistency table.
"""

from __future__ import annotations

from vel import order_calculus as oc

R, U, S = oc.VarKind.R, oc.VarKind.U, oc.VarKind.S


def show(t: oc.Term, k: int) -> None:
    print(f"  {str(t):<14} k={k}: order {oc.order_of(t, k).value!s:>5}  {oc.classify(t, k).name.lower()}")


print("Bare unknowns and weighted derivatives:")
for t in (oc.Term(0, 0, R), oc.Term(0, 0, U), oc.Term(1, 2, R), oc.Term(0, 2, U), oc.Term(2, 4, S)):
    show(t, 1)

# a spatial derivative costs a full unit, a factor of r buys one back
t = oc.Term(1, 1, U)
print("\nOne operation at a time on", t)
for op in (oc.Op.MUL_R, oc.Op.PARTIAL, oc.Op.DT):
    ts = oc.apply_op(op, t, 1)
    print(f"  {op.name:<8} -> min order {ts.min_order(1).value}, {len(ts.keys())} distinct terms")

print("\nProducts of two terms:")
for a, b in ((oc.Term(1, 1, R), oc.Term(0, 0, U)), (oc.Term(1, 2, R), oc.Term(0, 1, U))):
    p = oc.product_order(a, b, 1)
    print(f"  ({a}) ({b}): order {p.order.value}, estimable={p.estimable}")

print("\nIterated convective derivatives D_t^i r~ against the naive loss of 1/2 per step:")
for i in range(1, 5):
    got = oc.dt_power_iterated(R, i).min_order(oc.dt_power_level(i)).value
    print(f"  i={i}: iterated {got!s:>5}   claimed {oc.dt_power_claimed_min(R, i).value!s:>5}")

rows = oc.check_table(4, 4, 2, 4)
bad = [r for r in rows if not r.passed]
print(f"\nConsistency table: {len(rows)} rows, {len(bad)} failures")
