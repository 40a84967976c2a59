"""Command-line entry point ``vel``.

Every subcommand writes a CSV (to ``--out`` or stdout) and exits with 0
iff all of its pass/fail flags hold.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import geometry
from . import order_calculus as oc
from . import verify
from .errors import UnsupportedK, VelError
from .io import read_config, write_csv


def _levels(text: str | None, test: str) -> list[int] | None:
    if text is None:
        return None
    if "," in text:
        return [int(x) for x in text.split(",")]
    count = int(text)
    defaults = {"decomposition": 16, "vorticity": 16, "vorticity_control": 16, "system6": 32}
    base = defaults.get(test, 64)
    return [base * 2**i for i in range(count)]


def cmd_run(a) -> bool:
    sc = verify.Scenario.from_config(read_config(a.config))
    run = verify.run_scenario(sc, family=not a.no_family)
    write_csv(run.columns, run.csv_rows(), a.out)
    for name, ok in run.flags.items():
        print(f"# {name}: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return run.ok


def cmd_order(a) -> bool:
    if a.action != "check":
        raise SystemExit("usage: vel order check ...")
    rows = oc.check_table(a.max_m, a.max_l, a.max_k, a.max_i)
    header = ("term", "k", "op", "claimed_min_order", "computed_min_order", "pass")
    write_csv(header, [(r.term, r.k, r.op, r.claimed_min_order, r.computed_min_order, r.passed) for r in rows],
              a.out)
    return all(r.passed for r in rows)


def cmd_identities(a) -> bool:
    res = geometry.identity_residuals(np.random.default_rng(a.seed), a.samples)
    res["elimination_nonlinear"], res["elimination_linearized"] = verify.elimination_oracle_gap(a.samples, a.seed)
    write_csv(("identity", "max_residual", "pass"), [(k, v, v < a.tol) for k, v in res.items()], a.out)
    return all(v < a.tol for v in res.values())


def cmd_elliptic(a) -> bool:
    if a.k != 1:
        raise UnsupportedK("estimate fits are provided at k = 1")
    st = verify.estimate_fit_study(a.op, a.family_size, tuple(a.levels))
    rep = st.reports[-1]
    rows = [(i, float(l), float(r), float(q)) for i, (l, r, q) in enumerate(zip(rep.lhs, rep.rhs, rep.ratios))]
    write_csv(("member_id", "lhs", "rhs", "ratio"), rows, a.out)
    print(f"# constants {st.constants}, drift {st.drift:.2e}", file=sys.stderr)
    return st.ok


def cmd_convergence(a) -> bool:
    tabs = verify.convergence_study(a.test, _levels(a.levels, a.test))
    rows = [row for t in tabs for row in t.csv_rows()]
    write_csv(("test", "level", "error", "rate", "fitted_rate"), rows, a.out)
    for t in tabs:
        print(f"# {t.test}: fitted rate {t.fitted:.2f} ({'pass' if t.ok else 'FAIL'})", file=sys.stderr)
    return all(t.ok for t in tabs)


def cmd_equivalence(a) -> bool:
    if a.config:
        sc = verify.Scenario.from_config(read_config(a.config))
    else:
        sc = verify.Scenario(a.scenario, n=a.n, n2=a.n2, seed=a.seed)
    sc.family_size = a.family_size
    rep = verify.equivalence_study(sc)
    write_csv(("level", "min_ratio", "max_ratio"), list(zip(rep.levels, rep.mins, rep.maxs)), a.out)
    print(f"# drift {rep.drift:.2e}", file=sys.stderr)
    return rep.ok()


def cmd_acceptance(a) -> bool:
    res = verify.run_acceptance(a.only)
    for c in res:
        print(c.line)
    write_csv(("criterion", "name", "pass", "seconds", "budget", "detail"),
              [(c.number, c.name, c.ok and c.seconds <= c.budget, round(c.seconds, 3), c.budget, c.detail)
               for c in res], a.out)
    return all(c.ok and c.seconds <= c.budget for c in res)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vel", description="Linearized relativistic Euler vacuum-boundary lab")
    sub = p.add_subparsers(dest="cmd", required=True)

    def out(sp):
        sp.add_argument("--out", default="-", help="CSV path, '-' for stdout")

    sp = sub.add_parser("run", help="evolve a configured scenario and monitor the bounds")
    sp.add_argument("--config", required=True)
    sp.add_argument("--no-family", action="store_true", help="equivalence constants from the run only")
    out(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("order", help="order-calculus table")
    sp.add_argument("action", choices=["check"])
    sp.add_argument("--max-m", type=int, default=6)
    sp.add_argument("--max-l", type=int, default=6)
    sp.add_argument("--max-k", type=int, default=4)
    sp.add_argument("--max-i", type=int, default=8)
    out(sp)
    sp.set_defaults(fn=cmd_order)

    sp = sub.add_parser("identities", help="algebraic identity and elimination fuzz")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-12)
    out(sp)
    sp.set_defaults(fn=cmd_identities)

    sp = sub.add_parser("elliptic", help="elliptic / div-curl estimate constant fits")
    sp.add_argument("--op", choices=["L1", "L2L3"], default="L1")
    sp.add_argument("--family-size", type=int, default=50)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--levels", type=int, nargs="+", default=[16, 32])
    out(sp)
    sp.set_defaults(fn=cmd_elliptic)

    sp = sub.add_parser("convergence", help="refinement studies")
    sp.add_argument("--test", choices=verify.TESTS, required=True)
    sp.add_argument("--levels", help="a count, or a comma list of resolutions")
    out(sp)
    sp.set_defaults(fn=cmd_convergence)

    sp = sub.add_parser("equivalence", help="E^2 versus H^2 ratio study")
    sp.add_argument("--config")
    sp.add_argument("--scenario", choices=verify.SCENARIOS, default="slab_2d")
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--n2", type=int, default=8)
    sp.add_argument("--seed", type=int, default=9)
    sp.add_argument("--family-size", type=int, default=50)
    out(sp)
    sp.set_defaults(fn=cmd_equivalence)

    sp = sub.add_parser("acceptance", help="run the acceptance criteria")
    sp.add_argument("--only", type=int, nargs="*")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_acceptance)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ok = args.fn(args)
    except VelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
