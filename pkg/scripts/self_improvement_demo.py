"""Run the self-improvement iteration on random-walk tree embeddings and a
James embedding, and print the per-level contraction table.

    python3 scripts/self_improvement_demo.py --seeds 3 --height 8 --branch 8
"""
import argparse

import numpy as np

from beta_forge.embeddings import certify, james_embedding
from beta_forge.pruned import GreedyTree
from beta_forge.selfimprove import ModulusProvider, materialize_support, random_walk_embedding, run
from beta_forge.spaces import SeqSpace


def show(name, trace):
    print(f"\n{name}: scale {trace.scale:.4f}  gamma/scale {trace.gamma_normalized:.4f}  tau {trace.tau}")
    print(f"{'n':>3}{'tau^n':>10}{'lip_obs':>10}{'branch':>8}{'nodes':>8}{'pairs':>10}  gamma_ok")
    for lv in trace.levels:
        bound = "-" if lv.lip_bound_paper is None else f"{lv.lip_bound_paper:.4f}"
        print(f"{lv.n:>3}{bound:>10}{lv.lip_observed:>10.4f}{lv.achieved_branching:>8}{lv.nodes:>8}"
              f"{lv.eligible_pairs:>10}  {lv.gamma_ok}")
    sel = trace.selections
    if sel and sel[0].bound is not None:
        slack = np.array([(s.bound - s.distance) / (2 * s.r) for s in sel if s.r > 0])
        print(f"forks {len(sel)}  bound holds {trace.bounds_pass}  min margin {slack.min():.4f}")
    print(f"monotone {trace.monotone}  gamma-consistent {trace.gamma_consistent}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--space", default="lp:p=2:dim=4")
    ap.add_argument("--height", type=int, default=8)
    ap.add_argument("--branch", type=int, default=8)
    ap.add_argument("--levels", type=int, default=2)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--modulus", default="random-restart:budget=4000:restarts=4")
    args = ap.parse_args()

    sp = SeqSpace.parse(args.space)
    tree = GreedyTree(0, args.height, args.branch)
    for seed in range(args.seeds):
        emb = materialize_support(random_walk_embedding(sp, seed), tree, args.levels)
        prov = ModulusProvider.parse(args.modulus, sp, seed=seed)
        show(f"random walk seed {seed} in {sp}", run(emb, certify(emb).gamma, args.levels, modulus=prov))

    dim = args.height * args.branch  # largest label the greedy tree uses
    emb = materialize_support(james_embedding(0.9, dim=dim), tree, args.levels)
    prov = ModulusProvider(emb.space, "const", const=0.0)
    show(f"James theta=0.9 in l_inf^{dim}", run(emb, certify(emb).gamma, args.levels, modulus=prov))


if __name__ == "__main__":
    main()
