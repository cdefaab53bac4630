"""Lift a James tree map through a coordinate-projection quotient and
compose a coarse Lipschitz map with it; prints the claim tables.

    python3 scripts/quotient_lift_demo.py --height 3 --branch 3
"""
import argparse

import numpy as np

from beta_forge.coarse import (QuotientConstants, SampledMap, check_covering, compose_cle, lift_quotient,
                               lip_d, omega, projection_sample)
from beta_forge.embeddings import certify, james_embedding
from beta_forge.pruned import GreedyTree
from beta_forge.tree import prefix_closure


def show(title, rep):
    print(f"\n{title}: k={rep.k} (minimal {rep.k_min})  nodes={rep.nodes}  passed={rep.passed}")
    for name, c in rep.claims.items():
        print(f"  {name:<12} value {c['value']:<10.4g} required {c['required']:<10.4g} pass {c['pass']}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--theta", type=float, default=0.9)
    ap.add_argument("--height", type=int, default=3)
    ap.add_argument("--branch", type=int, default=3)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--pad", type=float, default=0.5)
    args = ap.parse_args()

    gamma = args.theta / 2
    v = james_embedding(args.theta, dim=args.dim)
    T = GreedyTree(2, args.height, args.branch).materialize()
    pts = np.stack([v.point(w) for w in prefix_closure(T.vertices)])

    f = projection_sample(pts, pad=args.pad)
    consts = QuotientConstants(0, 1, 1.0)
    cov = check_covering(f, consts, [0.5, 1.0, 2.0])
    print(f"sample {len(f)} points  omega(1)={omega(f, 1.0):.3f}  Lip_1={lip_d(f, 1.0):.3f}  "
          f"covering (C=1, K=0) {cov.passed} over {cov.checked} checks")
    g, rep = lift_quotient(f, v, consts, gamma, height=args.height, branching=args.branch)
    show("lift", rep)
    c = certify(g)
    print(f"  lifted map: lip {c.lip_ancestor:.4f}  gamma {c.gamma:.4f}")

    tpts = np.stack([v.point(w) for w in T.vertices])
    f2 = SampledMap.from_function(lambda x: 2 * x, tpts, v.space, v.space)
    g2, rep2 = compose_cle(f2, v, gamma, 1.0, 0.5, 2.0, height=args.height, branching=args.branch)
    show("compose with 2x", rep2)


if __name__ == "__main__":
    main()
