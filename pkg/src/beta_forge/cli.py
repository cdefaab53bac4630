"""Command-line front end.

Exit codes: 0 success or pass, 1 a check failed (the report says where),
2 usage or validation error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .coarse import (QuotientConstants, check_covering, compose_cle, lift_quotient, lip_d, omega,
                     projection_sample)
from .config import RunConfig
from .embeddings import certify, james_embedding, verify_characterization_iii
from .errors import BetaForgeError, LiftingError, MissingPointsError, ValidationError
from .modulus import METHODS, beta_finite
from .pruned import GreedyTree, inductive_refine, random_chooser, verify_pruned
from .selfimprove import ModulusProvider, materialize_support, random_walk_embedding, run
from .spaces import SeqSpace
from .tree import enumerate_truncation, truncation_size

log = logging.getLogger("beta_forge")

OK, FAIL, USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


class _Usage(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _space(text: str) -> SeqSpace:
    try:
        return SeqSpace.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _emit(doc: dict, path) -> None:
    io.write_json(doc, path)


# pruned

def cmd_pruned_build(a, cfg: RunConfig) -> int:
    if a.greedy:
        tree = GreedyTree(a.level, a.height, a.branch).materialize(cfg.vertex_budget)
    else:
        # refine a full truncation level by level with seeded random choices
        h0 = a.height * 2**a.level
        if truncation_size(h0, a.branch) > cfg.vertex_budget:
            raise ValidationError(f"source truncation of height {h0} exceeds the vertex budget {cfg.vertex_budget}")
        tree = enumerate_truncation(h0, a.branch, cfg.vertex_budget)
        choose = random_chooser(np.random.default_rng(cfg.seed))
        for _ in range(a.level):
            tree, _ = inductive_refine(tree, choose)
    io.save_tree(tree, a.output)
    return OK


def cmd_pruned_verify(a, cfg) -> int:
    tree = io.load_tree(a.tree)
    rep = verify_pruned(tree)
    _emit(io.report("pruned-verify", {"tree": tree.descriptor(), **rep.to_dict()}), a.output)
    return OK if rep.passed else FAIL


# modulus

def cmd_modulus_estimate(a, cfg) -> int:
    est = beta_finite(a.space, a.t, a.m, a.method, step=a.step, budget=a.budget or cfg.eval_budget,
                      seed=cfg.seed, restarts=a.restarts, threads=cfg.threads)
    _emit(io.report("modulus-estimate", {**est.to_dict(), "seed": cfg.seed}), a.output)
    return OK


# embeddings

def cmd_embed_james(a, cfg) -> int:
    tree = GreedyTree(a.level, a.height, a.branch).materialize(cfg.vertex_budget)
    io.save_embedding(james_embedding(a.theta, tree, a.dim), a.output)
    return OK


def cmd_embed_random(a, cfg) -> int:
    lazy = random_walk_embedding(a.space, cfg.seed, a.step)
    tree = GreedyTree(0, a.height, a.branch)
    if a.support_levels is not None:
        emb = materialize_support(lazy, tree, a.support_levels)
    else:
        full = tree.materialize(cfg.vertex_budget)
        lazy.points(full.vertices)
        emb = lazy.materialized(level=0)
    io.save_embedding(emb, a.output)
    return OK


def cmd_embed_certify(a, cfg) -> int:
    emb = io.load_embedding(a.emb)
    cert = certify(emb)
    _emit(io.report("embedding-certificate", {"space": str(emb.space), "tree": emb.source.descriptor(),
                                              **cert.to_dict()}), a.output)
    return OK


def cmd_embed_verify_iii(a, cfg) -> int:
    emb = io.load_embedding(a.emb)
    seq = [io.load_tree(p) for p in a.pruned]
    rep = verify_characterization_iii(emb, seq, a.C, a.L, a.gamma)
    _emit(io.report("characterization-check", {"C": a.C, "L": a.L, "gamma": a.gamma, **rep.to_dict()}),
          a.output)
    return OK if rep.passed else FAIL


# self-improvement

def cmd_selfimprove_run(a, cfg) -> int:
    emb = io.load_embedding(a.emb)
    space = a.space or emb.space
    provider = None if a.modulus is None else ModulusProvider.parse(a.modulus, space, seed=cfg.seed)
    if a.gamma == "auto":
        gamma = certify(emb).gamma
        if not np.isfinite(gamma):
            raise ValidationError("embedding has no eligible pairs; pass --gamma explicitly")
    else:
        gamma = float(a.gamma)
    trace = run(emb, gamma, a.levels, space, provider)
    _emit(io.report("contraction-trace", {**trace.to_dict(), "seed": cfg.seed}), a.output)
    csv_path = a.csv
    if csv_path is None and a.output not in (None, "-"):
        csv_path = str(Path(a.output).with_suffix(".csv"))
    if csv_path:
        io.write_trace_csv(trace, csv_path)
    ok = trace.monotone and trace.gamma_consistent and trace.bounds_pass is not False
    return OK if ok else FAIL


# coarse maps

def cmd_coarse_omega(a, cfg) -> int:
    f = io.load_map(a.map)
    _emit(io.report("omega", {"t": a.t, "value": omega(f, a.t), "samples": len(f)}), a.output)
    return OK


def cmd_coarse_lipd(a, cfg) -> int:
    f = io.load_map(a.map)
    _emit(io.report("lip-d", {"d": a.d, "value": lip_d(f, a.d), "samples": len(f)}), a.output)
    return OK


def cmd_coarse_covering(a, cfg) -> int:
    f = io.load_map(a.map)
    rep = check_covering(f, QuotientConstants(a.K, a.C, 1.0), a.r)
    _emit(io.report("covering", {"C": a.C, "K": a.K, "r": a.r, **rep.to_dict()}), a.output)
    return OK if rep.passed else FAIL


def cmd_coarse_compose(a, cfg) -> int:
    f = io.load_map(a.map)
    emb = io.load_embedding(a.emb)
    try:
        g, rep = compose_cle(f, emb, a.gamma, a.d, a.A, a.B)
    except MissingPointsError as exc:
        _emit(io.report("compose", {"passed": False, "error": str(exc), "missing": exc.missing}), a.output)
        return USAGE
    doc = io.report("compose", rep.to_dict())
    _emit(doc, a.output)
    if a.emit_embedding:
        io.save_embedding(g, a.emit_embedding)
    return OK if rep.passed else FAIL


def cmd_coarse_lift(a, cfg) -> int:
    f = io.load_map(a.map)
    emb = io.load_embedding(a.emb)
    try:
        g, rep = lift_quotient(f, emb, QuotientConstants(a.K, a.C, a.d), a.gamma,
                               lip_d_value=a.lip_d, omega_value=a.omega)
    except LiftingError as exc:
        _emit(io.report("lift", {"passed": False, "error": str(exc), "vertex": list(exc.vertex),
                                 "details": exc.details}), a.output)
        return FAIL
    _emit(io.report("lift", rep.to_dict()), a.output)
    if a.emit_embedding:
        io.save_embedding(g, a.emit_embedding)
    return OK if rep.passed else FAIL


def cmd_coarse_projection_sample(a, cfg) -> int:
    emb = io.load_embedding(a.emb)
    f = projection_sample(emb.source_matrix(), a.pad, a.stride, emb.space.p)
    io.save_map(f, a.output)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beta-forge", description="Pruned trees, finite moduli, tree embeddings and "
                                               "coarse-map checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=0, help="root seed for all randomness (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for restart searches (default: CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    groups = p.add_subparsers(dest="group", metavar="GROUP", parser_class=_Parser)
    groups.required = True

    def sub(group, name, fn, help_):
        q = group.add_parser(name, help=help_, description=help_)
        q.set_defaults(fn=fn)
        return q

    def out(q, default="-"):
        q.add_argument("-o", "--output", default=default, help="output path ('-' for stdout)")

    g = groups.add_parser("pruned", help="build and verify pruned trees").add_subparsers(
        dest="cmd", metavar="CMD", parser_class=_Parser, required=True)
    q = sub(g, "build", cmd_pruned_build, "build a pruned tree")
    q.add_argument("--level", type=int, required=True)
    q.add_argument("--height", type=int, required=True)
    q.add_argument("--branch", type=int, required=True)
    q.add_argument("--greedy", action="store_true", help="closed-form greedy tree instead of seeded refinement")
    out(q)
    q = sub(g, "verify", cmd_pruned_verify, "check a pruned tree file")
    q.add_argument("tree")
    out(q)

    g = groups.add_parser("modulus", help="finite modulus estimates").add_subparsers(
        dest="cmd", metavar="CMD", parser_class=_Parser, required=True)
    q = sub(g, "estimate", cmd_modulus_estimate, "estimate the finite modulus")
    q.add_argument("--space", type=_space, required=True, help="lp:p=<p|inf>:dim=<n>")
    q.add_argument("--t", type=float, required=True)
    q.add_argument("--m", type=int, default=2)
    q.add_argument("--method", choices=METHODS, default="grid")
    q.add_argument("--step", type=float, default=0.05)
    q.add_argument("--budget", type=int, default=None, help="evaluations per restart")
    q.add_argument("--restarts", type=int, default=16)
    out(q)

    g = groups.add_parser("embed", help="tree embeddings").add_subparsers(
        dest="cmd", metavar="CMD", parser_class=_Parser, required=True)
    q = sub(g, "james", cmd_embed_james, "James-type embedding of a greedy pruned tree into l_inf")
    q.add_argument("--theta", type=float, required=True)
    q.add_argument("--height", type=int, required=True)
    q.add_argument("--branch", type=int, required=True)
    q.add_argument("--level", type=int, default=0)
    q.add_argument("--dim", type=int, default=None)
    out(q)
    q = sub(g, "random-walk", cmd_embed_random, "seeded random-walk embedding of a truncation")
    q.add_argument("--space", type=_space, required=True)
    q.add_argument("--height", type=int, required=True)
    q.add_argument("--branch", type=int, required=True)
    q.add_argument("--step", type=float, default=1.0)
    q.add_argument("--support-levels", type=int, default=None,
                   help="only evaluate the vertices a run of this many levels touches")
    out(q)
    q = sub(g, "certify", cmd_embed_certify, "Lipschitz and separation constants of an embedding")
    q.add_argument("emb")
    out(q)
    q = sub(g, "verify-iii", cmd_embed_verify_iii, "check the two-sided bound and same-height separation")
    q.add_argument("emb")
    q.add_argument("--pruned", nargs="+", required=True)
    q.add_argument("--C", type=float, required=True)
    q.add_argument("--L", type=float, required=True)
    q.add_argument("--gamma", type=float, required=True)
    out(q)

    g = groups.add_parser("selfimprove", help="self-improvement runs").add_subparsers(
        dest="cmd", metavar="CMD", parser_class=_Parser, required=True)
    q = sub(g, "run", cmd_selfimprove_run, "iterate closest-grandchild refinement")
    q.add_argument("--emb", required=True)
    q.add_argument("--gamma", required=True, help="separation constant, or 'auto' for the certified value")
    q.add_argument("--levels", type=int, required=True)
    q.add_argument("--space", type=_space, default=None)
    q.add_argument("--modulus", default=None,
                   help="grid:step=h | random-restart:budget=N[:restarts=R] | anneal:budget=N | const:c")
    q.add_argument("--csv", default=None, help="trace CSV (default: next to -o)")
    out(q)

    g = groups.add_parser("coarse", help="sampled maps").add_subparsers(
        dest="cmd", metavar="CMD", parser_class=_Parser, required=True)
    q = sub(g, "omega", cmd_coarse_omega, "modulus of continuity on the sample")
    q.add_argument("map")
    q.add_argument("--t", type=float, required=True)
    out(q)
    q = sub(g, "lipd", cmd_coarse_lipd, "Lipschitz constant for large distances on the sample")
    q.add_argument("map")
    q.add_argument("--d", type=float, required=True)
    out(q)
    q = sub(g, "covering", cmd_coarse_covering, "check the ball covering inclusion on the sample")
    q.add_argument("map")
    q.add_argument("--C", type=float, required=True)
    q.add_argument("--K", type=float, required=True)
    q.add_argument("--r", type=_floats, required=True, help="comma-separated radii")
    out(q)
    q = sub(g, "compose", cmd_coarse_compose, "compose a coarse Lipschitz embedding with a tree embedding")
    q.add_argument("map")
    q.add_argument("emb")
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--d", type=float, required=True)
    q.add_argument("--A", type=float, default=None, help="estimated from the sample if omitted")
    q.add_argument("--B", type=float, default=None, help="estimated from the sample if omitted")
    q.add_argument("--emit-embedding", default=None)
    out(q)
    q = sub(g, "lift", cmd_coarse_lift, "lift a tree embedding through a sampled quotient")
    q.add_argument("map")
    q.add_argument("emb")
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--C", type=float, required=True)
    q.add_argument("--K", type=float, required=True)
    q.add_argument("--d", type=float, required=True)
    q.add_argument("--lip-d", type=float, default=None, help="estimated from the sample if omitted")
    q.add_argument("--omega", type=float, default=None, help="omega_f(d); estimated if omitted")
    q.add_argument("--emit-embedding", default=None)
    out(q)
    q = sub(g, "projection-sample", cmd_coarse_projection_sample,
            "sampled coordinate-projection quotient over an embedding's points")
    q.add_argument("emb")
    q.add_argument("--pad", type=float, default=0.5)
    q.add_argument("--stride", type=int, default=8)
    out(q)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except _Usage as exc:
        print(exc, file=sys.stderr)
        return USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_env(seed=a.seed, threads=a.threads or os.cpu_count() or 1,
                                 output_path=getattr(a, "output", None))
        return a.fn(a, cfg)
    except LiftingError as exc:
        print(f"beta-forge: {exc}", file=sys.stderr)
        return FAIL
    except BetaForgeError as exc:
        print(f"beta-forge: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
