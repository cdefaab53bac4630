"""Tabulate finite beta moduli for small l_p spaces.

    python3 scripts/modulus_table.py --dims 2 3 --m 2 3 --step 0.1
"""
import argparse
import math

from beta_forge.modulus import beta_finite, grid_refine, tau
from beta_forge.spaces import SeqSpace


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", nargs="+", type=float, default=[1.0, 2.0, math.inf])
    ap.add_argument("--dims", nargs="+", type=int, default=[2])
    ap.add_argument("--m", nargs="+", type=int, default=[2, 3])
    ap.add_argument("--t", nargs="+", type=float, default=[0.5, 1.0, 1.5, 2.0])
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--heuristic", action="store_true", help="random-restart plus lattice refinement")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'space':<18}{'m':>3}{'t':>6}{'beta':>9}{'tau':>8}  method")
    for p in args.p:
        for dim in args.dims:
            sp = SeqSpace(p, dim)
            for m in args.m:
                for t in args.t:
                    if args.heuristic or dim > 3 or m > 3:
                        est = beta_finite(sp, t, m, "random-restart", seed=args.seed)
                        val = 1 - grid_refine(est)[0] if est.witness is not None else est.value
                        method = "heuristic+refine"
                    else:
                        est = beta_finite(sp, t, m, "grid", step=args.step)
                        val, method = est.value, f"grid (slack {est.slack:.3f})"
                    if est.vacuous:
                        method = "vacuous"
                    print(f"{str(sp):<18}{m:>3}{t:>6.2f}{val:>9.4f}{tau(val):>8.4f}  {method}")


if __name__ == "__main__":
    main()
