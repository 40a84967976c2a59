"""Energy monitoring on a gas slab with vacuum on both sides.

We evolve a random smooth perturbation of the manufactured slab background
and compare the k=1 energy against the Gronwall-type bound built from
measured equivalence constants and the measured energy growth rate.  The
basic (k=0) energy inequality is monitored alongside.
"""

from __future__ import annotations

from vel import verify

sc = verify.Scenario("slab_2d", n=16, n2=16, k=1, seed=4, t_final=0.5)
run = verify.run_scenario(sc)

print(f"{'t':>6} {'E0':>11} {'E0 bound':>11} {'|.|_H':>11} {'bound':>11}")
for row in run.rows[:: max(1, len(run.rows) // 10)]:
    print(f"{row['t']:6.3f} {row['E0']:11.4e} {row['E0_bound']:11.4e} {row['H2k']:11.4e} {row['gronwall_bound']:11.4e}")

info = run.info
print(f"\nsteps {info['steps']}, max r {info['r_max']:.3f}")
print(f"equivalence constants [{info['c_lo']:.3f}, {info['c_hi']:.3f}], worst margin {info['main_margin']:.2f}")
print(f"transport monitor margin {info['transport_margin']:.2f}")
for name, ok in run.flags.items():
    print(f"  {name:<16} {'pass' if ok else 'FAIL'}")
