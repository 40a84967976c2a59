"""Refinement studies for the discrete identities.

Each identity should hold up to truncation error of the fourth-order
discretization, so the residual should fall like h^4.  Two negative controls
ride along: the L1 black-term list and higher-order sources in their printed
form, and a vorticity test on a background that does not solve the equations.
Neither should converge.
"""

from __future__ import annotations

from vel import verify
from vel.verify import RateTable, decomposition_error, system6_error

for test in verify.TESTS:
    for tab in verify.convergence_study(test):
        rates = ", ".join(f"{r:5.2f}" for r in tab.rates)
        print(f"{tab.test:<22} errors {tab.errors[0]:.2e} -> {tab.errors[-1]:.2e}  rates [{rates}]  "
              f"fit {tab.fitted:5.2f}  {'ok' if tab.ok else 'off target'}")

# the moving-domain identity converges faster than the scheme order; the
# integrated quantity is smoother than the pointwise residual
print()
levels = [16, 32, 64]
dec = RateTable("decomposition, printed terms", levels, [decomposition_error(n, printed=True) for n in levels], 0.0)
print(f"{dec.test:<30} fit {dec.fitted:5.2f}  (no convergence expected)")
levels = [32, 64, 128]
tab = RateTable("higher sources, printed weights", levels, [system6_error(n, printed=True) for n in levels], 0.0)
print(f"{tab.test:<30} fit {tab.fitted:5.2f}  (no convergence expected)")
