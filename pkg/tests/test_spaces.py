import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from beta_forge.errors import ValidationError
from beta_forge.spaces import SeqSpace, midpoint, norm

ps = st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf])
coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vecs(dim):
    return arrays(np.float64, dim, elements=coords)


def test_norm_examples():
    assert norm(SeqSpace(1, 3), [1, -2, 0]) == 3
    assert norm(SeqSpace(math.inf, 2), [0.3, -0.9]) == 0.9
    assert norm(SeqSpace(2, 2), [3, 4]) == 5


def test_midpoint_examples():
    x = np.array([0.2, -0.7])
    assert np.array_equal(midpoint(SeqSpace(2, 2), x, x, 0.5), x)
    sp = SeqSpace(2, 2)
    m = midpoint(sp, [0, 0], [2, 0], 0.25)
    assert np.allclose(m, [0.5, 0]) and sp.dist([0, 0], m) == 0.5
    sp1 = SeqSpace(1, 2)
    m = midpoint(sp1, [1, 1], [-1, 1], 0.5)
    assert np.allclose(m, [0, 1])
    assert sp1.dist([1, 1], m) == 1 and sp1.dist(m, [-1, 1]) == 1


@pytest.mark.parametrize("lam", [0, 1, -0.1, 1.5])
def test_midpoint_rejects_lambda(lam):
    with pytest.raises(ValidationError):
        midpoint(SeqSpace(2, 2), [0, 0], [1, 1], lam)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        SeqSpace(2, 3).norm([1, 2])


@pytest.mark.parametrize("p,dim", [(0.5, 2), (2, 0), (2, 1.5)])
def test_invalid_space(p, dim):
    with pytest.raises(ValidationError):
        SeqSpace(p, dim)


@pytest.mark.parametrize("text,p,dim", [("lp:p=2:dim=4", 2, 4), ("lp:p=inf:dim=3", math.inf, 3),
                                         ("lp:p=1.5:dim=2", 1.5, 2)])
def test_parse_roundtrip(text, p, dim):
    sp = SeqSpace.parse(text)
    assert (sp.p, sp.dim) == (p, dim)
    assert SeqSpace.parse(str(sp)) == sp


def test_parse_rejects_garbage():
    for bad in ("l2:4", "lp:p=2", "lp:p=x:dim=2"):
        with pytest.raises(ValidationError):
            SeqSpace.parse(bad)


@given(ps, vecs(3), vecs(3), st.floats(-5, 5))
def test_norm_axioms(p, x, y, c):
    sp = SeqSpace(p, 3)
    nx, ny = sp.norm(x), sp.norm(y)
    assert nx >= 0
    assert abs(sp.norm(c * x) - abs(c) * nx) <= 1e-12 * max(1, abs(c) * nx)
    assert sp.norm(x + y) <= nx + ny + 1e-12 * max(1, nx + ny)


@given(ps, vecs(4), vecs(4), st.floats(0.01, 0.99))
def test_metric_convexity(p, x, y, lam):
    sp = SeqSpace(p, 4)
    m = midpoint(sp, x, y, lam)
    d = sp.dist(x, y)
    assert abs(sp.dist(x, m) - lam * d) <= 1e-12 * max(1, d)
    assert abs(sp.dist(m, y) - (1 - lam) * d) <= 1e-12 * max(1, d)


@given(ps, arrays(np.float64, (5, 3), elements=coords))
def test_pairwise_matches_norm(p, X):
    sp = SeqSpace(p, 3)
    D = sp.pairwise(X)
    ref = sp.norm(X[:, None, :] - X[None, :, :])
    assert np.allclose(D, ref, rtol=1e-12, atol=1e-12)


def test_in_ball():
    sp = SeqSpace(math.inf, 2)
    assert sp.in_ball([1, -1]) and not sp.in_ball([1.01, 0])
