"""File formats and report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .coarse import SampledMap
from .config import SCHEMA_TAG
from .embeddings import Embedding
from .errors import BetaForgeError, ValidationError
from .spaces import SeqSpace
from .tree import PrunedTree, make_vertex

TRACE_COLUMNS = ("level", "lip_bound_paper", "lip_observed", "branching")


class ArtifactError(BetaForgeError):
    """Reading or writing an artifact failed; the message names the path."""


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def report(kind: str, payload: dict) -> dict:
    return {"schema": SCHEMA_TAG, "kind": kind, **payload}


def _write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc.strerror}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror}") from exc


def write_json(obj: dict, path=None) -> None:
    _write_text(dumps(obj), path)


def read_json(path) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


# pruned trees

def tree_to_dict(tree: PrunedTree) -> dict:
    return report("pruned-tree", {
        "level": tree.level, "height": tree.height, "branching": tree.branching,
        "nodes": [{"vertex": list(v), "parent_index": int(p)} for v, p in zip(tree.vertices, tree.parents)],
    })


def tree_from_dict(doc: dict) -> PrunedTree:
    try:
        nodes = doc["nodes"]
        vertices = [make_vertex(n["vertex"]) for n in nodes]
        parents = [int(n["parent_index"]) for n in nodes]
        return PrunedTree(vertices, parents, level=int(doc["level"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed pruned tree document: missing {exc}") from exc


def save_tree(tree: PrunedTree, path) -> None:
    write_json(tree_to_dict(tree), path)


def load_tree(path) -> PrunedTree:
    return tree_from_dict(read_json(path))


# embeddings

def embedding_lines(emb: Embedding) -> str:
    """JSON lines: header ``{"space", "tree"}`` then one ``{"vertex", "point"}`` per vertex."""
    vertices = emb.source.vertices if emb.source is not None else sorted(emb.table, key=lambda v: (len(v), v))
    tree = emb.source.descriptor() if emb.source is not None else "table"
    out = io.StringIO()
    out.write(json.dumps({"space": str(emb.space), "tree": tree}, sort_keys=True) + "\n")
    for v in vertices:
        out.write(json.dumps({"vertex": list(v), "point": [float(x) for x in emb.point(v)]}, sort_keys=True) + "\n")
    return out.getvalue()


def save_embedding(emb: Embedding, path) -> None:
    _write_text(embedding_lines(emb), path)


def _descriptor_level(desc: str) -> int:
    for part in desc.split(":"):
        if part.startswith("level="):
            return int(part[6:])
    return 0


def load_embedding(path) -> Embedding:
    lines = [ln for ln in _read_text(path).splitlines() if ln.strip()]
    if not lines:
        raise ArtifactError(f"{path}: empty embedding file")
    try:
        head = json.loads(lines[0])
        space = SeqSpace.parse(head["space"])
        table = {}
        for ln in lines[1:]:
            rec = json.loads(ln)
            table[make_vertex(rec["vertex"])] = rec["point"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise ArtifactError(f"{path}: malformed embedding file ({exc})") from exc
    src = PrunedTree.from_vertices(table.keys(), level=_descriptor_level(head.get("tree", "")))
    return Embedding(space, table, source=src)


# sampled maps

def map_to_dict(f: SampledMap) -> dict:
    if f.domain is None:
        raise ValidationError("only point-domain maps serialize to the map file format")
    doc = {"domain_space": str(f.domain_space), "codomain_space": str(f.codomain_space),
           "points": [{"x": x.tolist(), "fx": y.tolist()} for x, y in zip(f.domain, f.values)]}
    if f.codomain_points is not None:
        doc["codomain_points"] = f.codomain_points.tolist()
    return doc


def map_from_dict(doc: dict) -> SampledMap:
    try:
        X = SeqSpace.parse(doc["domain_space"])
        Y = SeqSpace.parse(doc["codomain_space"])
        pts = doc["points"]
        if not pts:
            raise ValidationError("sampled map has no points")
        x = np.array([p["x"] for p in pts], dtype=float)
        fx = np.array([p["fx"] for p in pts], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed sampled map document: missing {exc}") from exc
    return SampledMap(x, fx, Y, X, codomain_points=doc.get("codomain_points"))


def save_map(f: SampledMap, path) -> None:
    write_json(map_to_dict(f), path)


def load_map(path) -> SampledMap:
    return map_from_dict(read_json(path))


# traces

def trace_csv(rows) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in TRACE_COLUMNS})
    return out.getvalue()


def write_trace_csv(trace, path) -> None:
    _write_text(trace_csv(trace.csv_rows()), path)


def load_schema(kind: str) -> dict:
    """Published JSON schema for a report ``kind`` (or ``sampled-map``)."""
    try:
        return json.loads(resources.files("beta_forge").joinpath("schemas", f"{kind}.json").read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"no schema for {kind!r}") from exc
