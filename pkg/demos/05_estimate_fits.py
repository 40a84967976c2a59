"""Fitted constants of the elliptic and div-curl estimates.

For a random family of smooth test fields we compute the ratio of the
weighted H^2 norm to the right-hand side of each estimate.  If the estimate
holds, the supremum stays bounded and settles as the grid is refined.
"""

from __future__ import annotations

from vel import elliptic as EL
from vel import verify
from vel.grid_norms import Grid
from vel import dynamics as D
from vel.thermo import GasParams

g = Grid.slab(32, 16, 1.0, 1.0)
r = D.localized_slab_background(g, GasParams(5 / 3)).state(0.0).r
print(f"localization constant of the background: {EL.localization_constant(g, r):.3f}")

for op in ("L1", "L2L3"):
    st = verify.estimate_fit_study(op, levels=(16, 32, 64))
    consts = ", ".join(f"{c:.4f}" for c in st.constants)
    print(f"{op:<5} constants under refinement: {consts}   drift {st.drift:.1e}")
