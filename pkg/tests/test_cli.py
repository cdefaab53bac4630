import csv
import json

import jsonschema
import numpy as np
import pytest

from beta_forge import io
from beta_forge.cli import main
from beta_forge.embeddings import james_embedding
from beta_forge.pruned import greedy_pruned
from beta_forge.spaces import SeqSpace


def call(tmp_path, *argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


def valid(doc, kind=None):
    jsonschema.validate(doc, io.load_schema(kind or doc["kind"]))
    assert doc.get("schema", "beta-forge/1") == "beta-forge/1"


def test_pruned_build_and_verify(tmp_path):
    good = tmp_path / "good.json"
    assert call(tmp_path, "pruned", "build", "--level", 1, "--height", 2, "--branch", 3, "--greedy", "-o", good) == 0
    valid(load(good))
    rep = tmp_path / "rep.json"
    assert call(tmp_path, "pruned", "verify", good, "-o", rep) == 0
    valid(load(rep))
    assert load(rep)["passed"] is True


def test_pruned_verify_bad(tmp_path):
    doc = io.tree_to_dict(greedy_pruned(1, 1, 3))
    doc["nodes"][1]["vertex"], doc["nodes"][3]["vertex"] = doc["nodes"][3]["vertex"], doc["nodes"][1]["vertex"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    rep = tmp_path / "rep.json"
    assert call(tmp_path, "pruned", "verify", bad, "-o", rep) == 1
    out = load(rep)
    valid(out)
    assert out["passed"] is False and out["condition"] == "c" and out["witness"]


def test_seeded_refinement_build(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert call(tmp_path, "--seed", 5, "pruned", "build", "--level", 2, "--height", 1, "--branch", 4, "-o", p) == 0
    assert a.read_bytes() == b.read_bytes()
    assert call(tmp_path, "pruned", "verify", a, "-o", tmp_path / "r.json") == 0


def test_modulus_vacuous_range(tmp_path, capsys):
    assert call(tmp_path, "modulus", "estimate", "--space", "lp:p=2:dim=2", "--t", 3.0) == 2
    assert "exceeds" in capsys.readouterr().err


def test_modulus_estimate_report(tmp_path):
    out = tmp_path / "est.json"
    assert call(tmp_path, "modulus", "estimate", "--space", "lp:p=2:dim=2", "--t", 2.0, "--m", 2,
                "--method", "grid", "--step", 0.1, "-o", out) == 0
    doc = load(out)
    valid(doc)
    for key in ("space", "t", "m", "method", "value", "slack", "witness", "evaluations"):
        assert key in doc


@pytest.mark.parametrize("argv", [["frobnicate"], ["pruned"], ["pruned", "build", "--level", "x"],
                                  ["modulus", "estimate", "--space", "l2", "--t", "1"]])
def test_usage_errors(tmp_path, argv):
    assert main(argv) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "selfimprove" in capsys.readouterr().out


def test_budget_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BETA_FORGE_BUDGET", "50")
    assert call(tmp_path, "pruned", "build", "--level", 0, "--height", 4, "--branch", 3, "--greedy",
                "-o", tmp_path / "t.json") == 2
    monkeypatch.setenv("BETA_FORGE_BUDGET", "vertex=1000,eval=10")
    assert call(tmp_path, "pruned", "build", "--level", 0, "--height", 4, "--branch", 3, "--greedy",
                "-o", tmp_path / "t.json") == 0


def test_embed_certify_and_verify_iii(tmp_path):
    emb = tmp_path / "emb.jsonl"
    assert call(tmp_path, "embed", "james", "--theta", 0.9, "--height", 4, "--branch", 4, "-o", emb) == 0
    head = json.loads(emb.read_text().splitlines()[0])
    assert head == {"space": "lp:p=inf:dim=16", "tree": "pruned:level=0:height=4:branch=4"}
    cert = tmp_path / "cert.json"
    assert call(tmp_path, "embed", "certify", emb, "-o", cert) == 0
    doc = load(cert)
    valid(doc)
    assert doc["colip_ancestor"] == pytest.approx(0.9) and doc["gamma"] == pytest.approx(0.45)
    trees = []
    for lvl, h, b in ((0, 4, 4), (1, 2, 2)):
        p = tmp_path / f"t{lvl}.json"
        call(tmp_path, "pruned", "build", "--level", lvl, "--height", h, "--branch", b, "--greedy", "-o", p)
        trees.append(p)
    rep = tmp_path / "iii.json"
    assert call(tmp_path, "embed", "verify-iii", emb, "--pruned", *trees, "--C", 1.12, "--L", 1,
                "--gamma", 0.45, "-o", rep) == 0
    valid(load(rep))
    assert call(tmp_path, "embed", "verify-iii", emb, "--pruned", *trees, "--C", 1.12, "--L", 1,
                "--gamma", 0.99, "-o", rep) == 1
    assert load(rep)["condition"] == "b"


def test_selfimprove_trace_and_csv(tmp_path):
    emb = tmp_path / "rw.jsonl"
    assert call(tmp_path, "--seed", 1, "embed", "random-walk", "--space", "lp:p=2:dim=3", "--height", 4,
                "--branch", 4, "--support-levels", 2, "-o", emb) == 0
    out = tmp_path / "trace.json"
    assert call(tmp_path, "--seed", 1, "selfimprove", "run", "--emb", emb, "--gamma", "auto", "--levels", 2,
                "--modulus", "random-restart:budget=800:restarts=2", "-o", out) == 0
    doc = load(out)
    valid(doc)
    sel = doc["levels"][1]["selections"][0]
    for key in ("r", "s", "chosen_distance", "bound", "pass"):
        assert key in sel
    rows = list(csv.DictReader((tmp_path / "trace.csv").open()))
    assert list(rows[0]) == ["level", "lip_bound_paper", "lip_observed", "branching"]
    assert [int(r["level"]) for r in rows] == [0, 1, 2]


def test_selfimprove_precondition_is_usage_error(tmp_path):
    emb = tmp_path / "emb.jsonl"
    call(tmp_path, "embed", "james", "--theta", 0.9, "--height", 2, "--branch", 2, "-o", emb)
    assert call(tmp_path, "selfimprove", "run", "--emb", emb, "--gamma", 0.45, "--levels", 2) == 2


def test_coarse_commands(tmp_path):
    emb = tmp_path / "e.jsonl"
    assert call(tmp_path, "embed", "james", "--theta", 0.9, "--level", 2, "--height", 2, "--branch", 3,
                "-o", emb) == 0
    m = tmp_path / "map.json"
    assert call(tmp_path, "coarse", "projection-sample", emb, "-o", m) == 0
    valid(load(m), "sampled-map")
    for argv, kind in ((["omega", m, "--t", 1.0], "omega"), (["lipd", m, "--d", 1.0], "lip-d"),
                       (["covering", m, "--C", 1, "--K", 0, "--r", "0.5,1,2"], "covering"),
                       (["lift", m, emb, "--gamma", 0.45, "--C", 1, "--K", 0, "--d", 1], "lift")):
        out = tmp_path / f"{kind}.json"
        assert call(tmp_path, "coarse", *argv, "-o", out) == 0, kind
        valid(load(out))
    assert load(tmp_path / "lipd.json".replace("lipd", "lip-d"))["value"] == pytest.approx(1.0)


def test_coarse_compose_cli(tmp_path):
    phi = james_embedding(0.9, greedy_pruned(2, 2, 3))
    emb = tmp_path / "e.jsonl"
    io.save_embedding(phi, emb)
    pts = phi.source_matrix()
    doc = {"domain_space": str(phi.space), "codomain_space": str(phi.space),
           "points": [{"x": p.tolist(), "fx": (2 * p).tolist()} for p in pts]}
    m = tmp_path / "map.json"
    m.write_text(json.dumps(doc))
    out = tmp_path / "c.json"
    assert call(tmp_path, "coarse", "compose", m, emb, "--gamma", 0.45, "--d", 1, "--A", 0.5, "--B", 2,
                "-o", out) == 0
    valid(load(out))
    doc["points"] = doc["points"][:-1]
    m.write_text(json.dumps(doc))
    assert call(tmp_path, "coarse", "compose", m, emb, "--gamma", 0.45, "--d", 1, "--A", 0.5, "--B", 2,
                "-o", out) == 2
    assert len(load(out)["missing"]) == 1


def test_lift_failure_exit_code(tmp_path):
    phi = james_embedding(0.9, greedy_pruned(2, 2, 3))
    emb = tmp_path / "e.jsonl"
    io.save_embedding(phi, emb)
    pts = phi.source_matrix()[:-1]
    doc = {"domain_space": str(phi.space), "codomain_space": str(phi.space),
           "points": [{"x": p.tolist(), "fx": p.tolist()} for p in pts]}
    m = tmp_path / "map.json"
    m.write_text(json.dumps(doc))
    out = tmp_path / "lift.json"
    assert call(tmp_path, "coarse", "lift", m, emb, "--gamma", 0.45, "--C", 1, "--K", 0, "--d", 1, "-o", out) == 1
    assert load(out)["passed"] is False


def test_missing_file_is_usage_error(tmp_path, capsys):
    assert call(tmp_path, "pruned", "verify", tmp_path / "nope.json") == 2
    assert "nope.json" in capsys.readouterr().err


def test_roundtrips(tmp_path):
    t = greedy_pruned(1, 2, 3)
    io.save_tree(t, tmp_path / "t.json")
    assert io.load_tree(tmp_path / "t.json") == t
    e = james_embedding(0.7, t)
    io.save_embedding(e, tmp_path / "e.jsonl")
    back = io.load_embedding(tmp_path / "e.jsonl")
    assert back.source == t and back.space == e.space
    assert all(np.array_equal(back.point(v), e.point(v)) for v in t.vertices)
