import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sweepopt.geometry import (Ball, Box, DimensionError, NotInSetError,
                               ProductSet, WholeSpace, kkt_residual,
                               normal_cone_contains, project,
                               project_tangent_cone, set_from_config)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec2 = arrays(np.float64, 2, elements=finite)
vec3 = arrays(np.float64, 3, elements=finite)

BOX2 = Box.cube(-1, 1, 2)
BOX1 = Box.cube(-1, 1, 1)
BALL2 = Ball([0.0, 0.0], 1.0)


def test_box_examples():
    assert np.array_equal(project(BOX2, [1.7, 0.3]), [1.0, 0.3])
    assert np.array_equal(project(BOX2, [0.2, -0.5]), [0.2, -0.5])


def test_ball_example():
    assert np.allclose(project(BALL2, [3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_tangent_examples():
    assert np.array_equal(project_tangent_cone(BOX1, [1.0], [0.5]), [0.0])
    assert np.array_equal(project_tangent_cone(BOX1, [0.0], [0.5]), [0.5])
    assert np.allclose(project_tangent_cone(BALL2, [1.0, 0.0], [1.0, 1.0]), [0.0, 1.0])


def test_ball_tangent_matches_brute_force():
    # minimize ||d - v|| over tangent directions {d : d_1 <= 0} sampled on a grid
    v = np.array([1.0, 1.0])
    grid = np.arange(-2.0, 2.0 + 1e-9, 1e-3)
    d1 = grid[grid <= 0]
    best = min(((a - v[0]) ** 2, a) for a in d1)[1]
    got = project_tangent_cone(BALL2, [1.0, 0.0], v)
    assert abs(got[0] - best) <= 1e-3 and got[1] == 1.0


def test_kkt_examples():
    assert kkt_residual(BOX1, [0.0], [0.3]) == 0.0
    assert kkt_residual(BOX1, [-2.0], [1.0]) == 0.0
    assert kkt_residual(BOX1, [-2.0], [0.0]) == 2.0


def test_normal_cone_examples():
    assert normal_cone_contains(BOX1, [0.0], [0.0])
    assert normal_cone_contains(BOX1, [1.0], [3.0])
    assert not normal_cone_contains(BOX1, [0.0], [1.0])


def test_errors():
    with pytest.raises(DimensionError):
        project(BOX2, [1.0, 2.0, 3.0])
    with pytest.raises(NotInSetError):
        project_tangent_cone(BOX1, [2.0], [1.0])
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)


def test_whole_space_is_identity():
    s = WholeSpace()
    x = np.array([1e6, -3.0])
    assert np.array_equal(s.project(x), x)
    assert np.array_equal(s.project_tangent(x, -x), -x)


def test_product_set_blockwise():
    s = ProductSet(WholeSpace(2), BOX2)
    x = np.array([5.0, -5.0, 5.0, -5.0])
    assert np.array_equal(s.project(x), [5.0, -5.0, 1.0, -1.0])
    t = s.project_tangent([5.0, -5.0, 1.0, -1.0], [1.0, 1.0, 1.0, -1.0])
    assert np.array_equal(t, [1.0, 1.0, 0.0, 0.0])


def test_config_round_trip():
    for s in (BOX2, BALL2, WholeSpace(3)):
        again = set_from_config(s.to_config())
        assert again.to_config() == s.to_config()
    assert set_from_config({"type": "box", "lower": -1, "upper": 1}, 3).dim == 3


SETS = [BOX2, Box([-1.0, 0.0], [0.5, 2.0]), BALL2, Ball([0.5, -0.2], 0.7)]


@pytest.mark.parametrize("s", SETS)
@settings(max_examples=200, deadline=None)
@given(x=vec2)
def test_idempotent(s, x):
    p = s.project(x)
    if isinstance(s, Box):
        assert np.array_equal(s.project(p), p)
    else:
        assert np.allclose(s.project(p), p, atol=1e-12, rtol=0)


@pytest.mark.parametrize("s", SETS)
def test_nonexpansive(s, rng):
    x = rng.uniform(-5, 5, (1000, 2))
    y = rng.uniform(-5, 5, (1000, 2))
    for a, b in zip(x, y):
        assert (np.linalg.norm(s.project(a) - s.project(b))
                <= np.linalg.norm(a - b) + 1e-12)


@pytest.mark.parametrize("s", SETS)
def test_variational_inequality(s, rng):
    ys = np.array([s.project(v) for v in rng.uniform(-3, 3, (200, 2))])
    for x in rng.uniform(-5, 5, (1000, 2)):
        p = s.project(x)
        assert np.max((ys - p) @ (x - p)) <= 1e-10


def _boundary_points(s, rng, n):
    pts = [s.project(v) for v in rng.uniform(-4, 4, (n, 2))]
    pts += [s.project(v) for v in rng.uniform(-0.3, 0.3, (n, 2))]
    return pts


@pytest.mark.parametrize("s", SETS)
def test_moreau_decomposition(s, rng):
    for x in _boundary_points(s, rng, 200):
        v = rng.normal(size=2) * 3
        t = s.project_tangent(x, v)
        n = v - t
        assert s.normal_cone_contains(x, n, 1e-10)
        assert abs(float(t @ n)) <= 1e-10


@pytest.mark.parametrize("s", SETS)
def test_kkt_zero_on_normal_cone(s, rng):
    for x in _boundary_points(s, rng, 200):
        v = rng.normal(size=2)
        n = v - s.project_tangent(x, v)  # a normal vector at x
        if s.normal_cone_contains(x, n, 0.0):
            assert kkt_residual(s, -n, x) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(x=vec3, v=vec3)
def test_box_tangent_never_points_outward(x, v):
    s = Box.cube(-1, 1, 3)
    p = s.project(x)
    t = s.project_tangent(p, v)
    assert np.all(t[p == 1.0] <= 0) and np.all(t[p == -1.0] >= 0)
    interior = (p > -1) & (p < 1)
    assert np.array_equal(t[interior], v[interior])
