import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sweepopt.geometry import Box, WholeSpace, kkt_residual
from sweepopt.objectives import anchors_from_seed, six_hump_camel, sum_quadratic
from sweepopt.psp import (ContinuousTrajectory, Interpolant, KappaClock,
                          LyapunovPair, SpanError, VectorField, contraction_test,
                          eval_lyapunov_along, gradient_field, pnag_field,
                          pnag_lyapunov_pair, pnag_set, run_decaying_scheme,
                          solve_reference, window_error, zero_field)
from sweepopt.schedules import Constant, HarmonicShift, steps_to_reach

BOX2 = Box.cube(-1, 1, 2)


def quad_field(c):
    return gradient_field(sum_quadratic([c]))


def test_reference_matches_exponential_decay():
    c = np.array([0.4, -1.3, 2.0])
    x0 = np.array([3.0, 1.0, -2.0])
    tr = solve_reference(quad_field(c), WholeSpace(), x0, 5.0, 1e-3)
    exact = c + np.exp(-tr.ts)[:, None] * (x0 - c)
    err = np.linalg.norm(tr.xs - exact, axis=1) / np.linalg.norm(exact, axis=1)
    assert np.max(err) < 1e-2
    assert tr.ts[0] == 0.0 and tr.ts[-1] == 5.0


def test_reference_zero_field():
    tr = solve_reference(zero_field(), BOX2, [0.3, 1.0], 2.0, 1e-2)
    assert np.all(tr.xs == [0.3, 1.0])


def test_reference_leaves_boundary_when_pushed_inward():
    # minimizer at the origin, start on the face x_0 = 1
    tr = solve_reference(quad_field([0.0, 0.0]), BOX2, [1.0, 0.5], 0.01, 1e-3)
    assert tr.xs[1][0] < 1.0
    t = BOX2.project_tangent([1.0, 0.5], -np.array([1.0, 0.5]))
    assert np.allclose((tr.xs[1] - tr.xs[0]) / 1e-3, t)


def test_reference_states_feasible(rng):
    obj = six_hump_camel()
    for x0 in rng.uniform(-1, 1, (5, 2)):
        tr = solve_reference(gradient_field(obj), BOX2, x0, 3.0, 1e-3)
        assert np.all(np.abs(tr.xs) <= 1.0)


def test_scheme_zero_field():
    it = run_decaying_scheme(zero_field(), BOX2, [0.1, 0.2], HarmonicShift(), n_steps=20,
                             fast_forward=False)
    assert np.all(it.zs == [0.1, 0.2])


def test_scheme_hand_step():
    field = VectorField(lambda t, x: x, "identity", autonomous=True)
    with pytest.warns(RuntimeWarning):
        it = run_decaying_scheme(field, Box.cube(-1, 1, 1), [1.0], Constant(0.5), n_steps=1)
    assert it.zs[1][0] == 0.5 and it.ts[1] == 0.5


def test_scheme_converges_to_anchor_mean():
    A = anchors_from_seed(1)
    it = run_decaying_scheme(gradient_field(sum_quadratic(A)), Box.cube(-1, 1, 10),
                             np.zeros(10), HarmonicShift(), n_steps=200)
    assert np.max(np.abs(it.zs[-1] - A.mean(axis=0))) < 1e-12


def test_scheme_and_reference_agree_for_constant_step():
    obj = six_hump_camel()
    field = gradient_field(obj)
    h = 1e-3
    ref = solve_reference(field, BOX2, [0.9, -0.2], 2.0, h)
    with pytest.warns(RuntimeWarning):
        it = run_decaying_scheme(field, BOX2, [0.9, -0.2], Constant(h), n_steps=2000)
    bound = 2 * h * max(np.linalg.norm(obj.gradient(x)) for x in ref.xs)
    assert np.max(np.linalg.norm(it.zs - ref.xs, axis=1)) <= bound


def test_window_error_zero_field():
    it = run_decaying_scheme(zero_field(), BOX2, [0.1, 0.2], HarmonicShift(), t_end=3.0)
    assert window_error(it, zero_field(), BOX2, 1.0, 1.0, 1e-3) == 0.0


def test_window_error_self_shadowing():
    field = gradient_field(six_hump_camel())
    ref = solve_reference(field, BOX2, [0.5, 0.5], 4.0, 1e-3)
    it = Interpolant.from_trajectory(ref)
    assert window_error(it, field, BOX2, 1.0, 2.0, 1e-3) <= 1e-10


def test_window_error_tracks_step_size():
    sch = HarmonicShift()
    field = quad_field([0.3, -0.4])
    it = run_decaying_scheme(field, BOX2, [1.0, 1.0], sch, t_end=10.0)
    for s in (1.0, 2.0, 4.0, 8.0):
        h = sch.step(steps_to_reach(sch, s) + 1)
        assert window_error(it, field, BOX2, s, 1.0, 1e-3) < 0.1 * h


def test_window_span_checked():
    it = run_decaying_scheme(quad_field([0.0, 0.0]), BOX2, [1.0, 1.0], HarmonicShift(),
                             n_steps=10, fast_forward=False)
    with pytest.raises(SpanError):
        window_error(it, quad_field([0.0, 0.0]), BOX2, it.span_end, 1.0)


def test_stall_fast_forward_matches_plain_run():
    field = gradient_field(six_hump_camel())
    sch = HarmonicShift()
    fast = run_decaying_scheme(field, BOX2, [0.5, -0.5], sch, t_end=7.0)
    assert fast.meta["stalled_at"] is not None
    n = steps_to_reach(sch, 7.0)
    slow = run_decaying_scheme(field, BOX2, [0.5, -0.5], sch, n_steps=n, fast_forward=False)
    k = fast.meta["stalled_at"]
    assert np.all(slow.zs[k:] == slow.zs[k])
    assert np.array_equal(slow.zs[: k + 1], fast.zs)
    for s in (2.0, 5.0, 5.9):
        assert (window_error(fast, field, BOX2, s, 1.0, 1e-3)
                == window_error(slow, field, BOX2, s, 1.0, 1e-3))


def test_no_fast_forward_for_time_dependent_field():
    base = gradient_field(six_hump_camel())
    field = VectorField(base.psi, "timed", autonomous=False)
    it = run_decaying_scheme(field, BOX2, [0.5, -0.5], HarmonicShift(), n_steps=400)
    assert it.meta["stalled_at"] is None and it.zs.shape[0] == 401


def test_contraction_examples():
    rep = contraction_test(quad_field([0.0, 0.0]), BOX2, [1.0, 0.0], [0.0, 1.0], 1.0, 5.0)
    assert rep.max_ratio <= 1.1
    assert rep.ratios[0] == 1.0
    rep = contraction_test(quad_field([0.0, 0.0]), BOX2, [0.5, 0.5], [0.5, 0.5], 1.0, 1.0)
    assert rep.degenerate and np.all(rep.distances == 0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_contraction_random_triples(seed):
    r = np.random.default_rng(seed)
    c, x0, y0 = r.uniform(-1, 1, (3, 2))
    rep = contraction_test(quad_field(c), BOX2, x0, y0, 1.0, 3.0, 1e-3)
    assert rep.degenerate or rep.max_ratio <= 1.1


def test_lyapunov_gradient_flow():
    obj = sum_quadratic(anchors_from_seed(0))
    tr = solve_reference(gradient_field(obj), Box.cube(-1, 1, 10), np.ones(10), 3.0, 1e-3)
    pair = LyapunovPair(lambda t, x: obj.value(x), lambda t, x: 0.0)
    rep = eval_lyapunov_along(pair, tr)
    assert rep.max_increase < 1e-8
    assert np.all(np.diff(rep.V) <= 1e-12)


def test_lyapunov_constant_at_kkt_point():
    A = anchors_from_seed(0)
    obj = sum_quadratic(A)
    s = Box.cube(-1, 1, 10)
    xs = A.mean(axis=0)
    z = np.concatenate([xs, xs])
    tr = ContinuousTrajectory(np.linspace(0, 2, 21), np.tile(z, (21, 1)), 0.1)
    rep = eval_lyapunov_along(pnag_lyapunov_pair(obj, s, 0.1, 0.5), tr)
    assert np.all(rep.V == rep.V[0])
    assert np.max(rep.W) < 1e-25


def test_pnag_energy_error_is_first_order():
    obj = sum_quadratic(anchors_from_seed(0))
    s = Box.cube(-1, 1, 10)
    z0 = np.full(20, 0.9)
    incs = []
    for h in (1e-2, 1e-3):
        tr = solve_reference(pnag_field(obj, 0.1, 0.5), pnag_set(s), z0, 2.0, h)
        incs.append(eval_lyapunov_along(pnag_lyapunov_pair(obj, s, 0.1, 0.5), tr).max_increase)
    assert 5 < incs[0] / incs[1] < 20


def test_pnag_field_equilibria():
    obj = sum_quadratic(anchors_from_seed(0))
    xs = anchors_from_seed(0).mean(axis=0)
    f = pnag_field(obj, 0.1, 0.5)
    assert np.allclose(f(0.0, np.concatenate([xs, xs])), 0.0, atol=1e-14)
    assert f(3.0, np.zeros(20)).shape == (20,)
    # minimizer on the boundary of a smaller box: projected drift vanishes
    small = Box.cube(-0.01, 0.01, 10)
    p = small.project(xs)
    prod = pnag_set(small)
    z = np.concatenate([p, p])
    g = obj.gradient(p)
    # x-block equilibrium needs x = y - gamma grad f(y)
    z[:10] = p - 0.1 * g
    drift = prod.project_tangent(z, -f(0.0, z))
    assert kkt_residual(small, g, p) < 1e-15
    assert np.linalg.norm(drift) < 1e-14
    zz = np.concatenate([np.zeros(10), np.zeros(10)])
    assert np.linalg.norm(prod.project_tangent(zz, -f(0.0, zz))) > 0


def test_kappa_clock():
    clock = KappaClock()
    assert clock(0.0) == 1.0
    for k in range(200):
        assert clock(clock.tau(k)) == math.sqrt(k + 1)
    grid = np.linspace(0, 300, 5000)
    vals = [clock(t) for t in grid]
    assert np.all(np.diff(vals) >= 0)
