"""Empirical covering constants for sampled quotient maps.

For each map, find the smallest C on a grid for which every ball of radius
r around f(x) is covered by the K-fattened image of the ball of radius Cr
around x (over the sample), for a few values of K.

    python3 scripts/covering_constants.py
"""
import argparse
import math

import numpy as np

from beta_forge.coarse import QuotientConstants, SampledMap, check_covering, lip_d
from beta_forge.spaces import SeqSpace


def smallest_C(f, K, radii, grid):
    for C in grid:
        if check_covering(f, QuotientConstants(K, C, 1.0), radii).passed:
            return C
    return math.inf


def maps(n):
    xs = np.linspace(-4, 4, n)[:, None]
    line = SeqSpace(2, 1)
    g = np.linspace(-2, 2, 9)
    plane = np.array([[a, b] for a in g for b in g])
    yield "floor on [-4, 4]", SampledMap.from_function(np.floor, xs, line, line)
    yield "projection R^2 -> R", SampledMap.from_function(lambda p: p[..., :1], plane, SeqSpace(2, 2), line)
    yield "folding |x|", SampledMap.from_function(np.abs, xs, line, line)
    yield "3x (lipschitz quotient)", SampledMap.from_function(lambda x: 3 * x, xs, line, line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=81)
    ap.add_argument("--K", nargs="+", type=float, default=[0.0, 0.5, 1.0])
    args = ap.parse_args()

    radii = [0.25, 0.5, 1.0, 2.0]
    grid = np.round(np.arange(0.25, 4.01, 0.25), 2)
    print(f"{'map':<26}{'Lip_1':>7}" + "".join(f"{'C(K=' + str(k) + ')':>11}" for k in args.K))
    for name, f in maps(args.n):
        cs = [smallest_C(f, k, radii, grid) for k in args.K]
        print(f"{name:<26}{lip_d(f, 1.0):>7.3f}" + "".join(f"{c:>11}" for c in cs))


if __name__ == "__main__":
    main()
