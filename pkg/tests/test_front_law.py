import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellphase.asymptotics import phi_of_v, solve_v0
from cellphase.errors import ConfigurationError, DomainError, RootNotFoundError, TopologyError
from cellphase.front_law import (
    FrontCurve,
    circle,
    curvature_and_normals,
    ellipse,
    enclosed_area,
    evolve_curve,
    hausdorff,
    integrate_front_1d,
    is_simple,
    isoperimetric_ratio,
    make_curve,
    reparametrize,
    solve_velocity_1d,
    solve_velocity_field_2d,
    total_turning,
)


def budget(curve):
    h = reparametrize(curve).edge_lengths().min()
    return 0.1 * h * h


# ---------------------------------------------------------------- 1D law


def test_velocity_1d_examples(profile):
    assert solve_velocity_1d(0.0, 0.0, profile) == (pytest.approx(0.0, abs=1e-14), 1)
    X, m = solve_velocity_1d(profile.c0, 0.0, profile)
    assert X == pytest.approx(-1.0, abs=1e-12) and m == 1


def test_velocity_1d_scan_oracle(profile):
    F, beta = 0.02, 0.3
    X, m = solve_velocity_1d(F, beta, profile)
    grid = np.arange(-500, 501) * 1e-2
    res = np.array([profile.c0 * v + beta * phi_of_v(v, profile) + F for v in grid])
    changes = np.flatnonzero(res[:-1] * res[1:] < 0)
    assert m == changes.size == 1
    assert grid[changes[0]] <= X <= grid[changes[0] + 1]
    assert abs(profile.c0 * X + beta * phi_of_v(X, profile) + F) <= 1e-12


def test_velocity_1d_no_root(profile):
    with pytest.raises(RootNotFoundError):
        solve_velocity_1d(1.0, 0.0, profile)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_velocity_matches_solvability(profile, F, beta):
    X, _ = solve_velocity_1d(F, beta, profile)
    assert solve_v0(F, beta, profile) == pytest.approx(-X, abs=1e-9)


def test_front_1d_constant_velocity(profile):
    tr = integrate_front_1d(lambda t: profile.c0, 0.0, 0.3, (0.0, 1.0), 1e-2, profile)
    assert np.max(np.abs(tr.x0 - (0.3 - tr.t))) <= 1e-8


def test_front_1d_without_forcing(profile):
    tr = integrate_front_1d(lambda t: 0.0, 0.0, -0.2, (0.0, 1.0), 1e-2, profile)
    assert np.all(tr.x0 == -0.2)
    # Phi(0) > 0, so with coupling the unforced front drifts at a constant speed
    tr = integrate_front_1d(lambda t: 0.0, 0.4, -0.2, (0.0, 1.0), 1e-2, profile)
    X, _ = solve_velocity_1d(0.0, 0.4, profile)
    assert X < 0
    assert np.allclose(tr.x0, -0.2 + X * tr.t, atol=1e-12)


def test_front_1d_second_order(profile):
    F = lambda t: 0.02 * np.sin(3 * t) + 0.01  # noqa: E731
    xs = [integrate_front_1d(F, 0.1, 0.0, (0.0, 1.0), dt, profile).x0[-1]
          for dt in (1e-2, 5e-3, 2.5e-3)]
    ratio = (xs[0] - xs[1]) / (xs[1] - xs[2])
    assert 3.5 <= ratio <= 4.5


def test_front_1d_continuity(profile):
    F = lambda t: 0.05 * np.cos(t)  # noqa: E731
    tr = integrate_front_1d(F, 0.2, 0.0, (0.0, 2.0), 1e-2, profile)
    dx = np.abs(np.diff(tr.x0))
    assert np.all(dx <= (np.abs(tr.v).max() + 1) * 1e-2)
    assert np.all(tr.branch_flags == 1)


def test_front_1d_rejects_coarse_step(profile):
    with pytest.raises(ConfigurationError):
        integrate_front_1d(lambda t: 0.0, 0.0, 0.0, (0.0, 1.0), 0.1, profile)


# ---------------------------------------------------------------- curves


def test_area_examples():
    sq = make_curve([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert enclosed_area(sq) == 1.0
    c = circle(1.0, 512)
    assert enclosed_area(c) == pytest.approx(np.pi, abs=1e-4)
    moved = FrontCurve(c.nodes + np.array([3.0, -7.0]))
    assert enclosed_area(moved) == pytest.approx(enclosed_area(c), abs=1e-12)


def test_circle_curvature_and_normals():
    c = curvature_and_normals(circle(2.0, 256))
    assert np.max(np.abs(c.curvature - 0.5)) <= 1e-4
    inward = -c.nodes / np.hypot(*c.nodes.T)[:, None]
    assert np.max(np.abs(c.normals - inward)) <= 1e-3
    rev = curvature_and_normals(FrontCurve(c.nodes[::-1].copy()))
    assert np.allclose(np.sort(rev.curvature), np.sort(c.curvature), atol=1e-12)
    assert enclosed_area(rev) > 0


def test_ellipse_curvature():
    e = curvature_and_normals(ellipse(2.0, 1.0, 512))
    k_at = lambda p: e.curvature[np.argmin(np.hypot(*(e.nodes - p).T))]  # noqa: E731
    assert k_at([2, 0]) == pytest.approx(2.0, abs=1e-3)
    assert k_at([-2, 0]) == pytest.approx(2.0, abs=1e-3)
    assert k_at([0, 1]) == pytest.approx(0.25, abs=1e-3)


def test_collinear_triple_has_zero_curvature():
    pts = np.array([[0, 0], [1, 0], [2, 0], [3, 0]] + [[3 - 0.2 * k, 1.0 + 0.01 * k] for k in range(16)])
    c = curvature_and_normals(make_curve(pts))
    assert c.curvature[1] == 0.0 and c.curvature[2] == 0.0


def test_too_few_nodes():
    with pytest.raises(DomainError):
        curvature_and_normals(circle(1.0, 8))


def test_reparametrize_uniform_and_turning():
    pts = ellipse(1.5, 0.6, 200, uniform=False)
    r = reparametrize(pts, 128)
    e = r.edge_lengths()
    assert np.ptp(e) / e.mean() <= 0.01
    assert total_turning(r) == pytest.approx(2 * np.pi, abs=1e-6)
    assert is_simple(r)


def test_self_intersection_detected():
    bowtie = FrontCurve(np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float))
    assert not is_simple(bowtie)


def test_velocity_field_beta_zero():
    c = curvature_and_normals(circle(1.0, 64))
    assert np.max(np.abs(solve_velocity_field_2d(c, 0.0, None))) <= 1e-12
    e = curvature_and_normals(ellipse(2.0, 1.0, 64))
    w = e.node_weights() / e.node_weights().sum()
    V = solve_velocity_field_2d(e, 0.0, None)
    assert np.array_equal(V, e.curvature - np.dot(w, e.curvature))


def test_velocity_field_zero_mean(profile):
    e = curvature_and_normals(ellipse(2.0, 1.0, 64))
    V = solve_velocity_field_2d(e, 0.3, profile)
    assert abs(e.arclength_mean(V)) <= 1e-10
    g = e.curvature + 0.3 / profile.c0 * np.array([phi_of_v(v, profile) for v in V])
    assert np.max(np.abs(V - (g - e.arclength_mean(g)))) <= 1e-9


def test_velocity_field_rejects_large_beta(profile):
    e = curvature_and_normals(ellipse(2.0, 1.0, 64))
    with pytest.raises(ConfigurationError):
        solve_velocity_field_2d(e, 0.6, profile)


def test_evolve_circle_stationary(profile):
    c = circle(1.0, 64)
    curves, _ = evolve_curve(c, 0.0, (0.0, 1.0), budget(c), profile, record_every=10**9)
    assert np.max(np.abs(np.hypot(*curves[-1].nodes.T) - 1.0)) <= 1e-3


@pytest.fixture(scope="module")
def ellipse_run(profile):
    e = ellipse(2.0, 1.0, 64)
    dt = budget(e)
    curves, times = evolve_curve(e, 0.0, (0.0, 1.0), dt, profile)
    return curves, times, dt


def test_evolve_ellipse_area_and_ratio(ellipse_run):
    curves, _, _ = ellipse_run
    A = np.array([enclosed_area(c) for c in curves])
    r = np.array([isoperimetric_ratio(c) for c in curves])
    assert abs(A[-1] - A[0]) / A[0] <= 1e-3
    assert np.all(np.diff(r) > 0)


def test_evolve_per_step_area_change(ellipse_run):
    curves, _, dt = ellipse_run
    A = np.array([enclosed_area(c) for c in curves])
    assert np.max(np.abs(np.diff(A))) <= 10 * dt**2


def test_evolve_area_conservation_bound(ellipse_run):
    curves, _, dt = ellipse_run
    h = curves[0].edge_lengths().min()
    drift = abs(enclosed_area(curves[-1]) - enclosed_area(curves[0])) / enclosed_area(curves[0])
    assert drift <= 5 * (dt + h**2) / h


def test_evolve_matches_independent_curvature_flow(profile):
    # hand-rolled volume-preserving curvature flow with the same discretization
    e = ellipse(2.0, 1.0, 64)
    dt = budget(e)
    curves, _ = evolve_curve(e, 0.0, (0.0, 20 * dt), dt, profile)
    cur = curvature_and_normals(reparametrize(e))
    for k in range(1, 21):
        w = cur.node_weights()
        V = cur.curvature - np.sum(w * cur.curvature) / np.sum(w)
        cur = curvature_and_normals(reparametrize(FrontCurve(cur.nodes + dt * V[:, None] * cur.normals)))
        assert np.max(np.abs(cur.nodes - curves[k].nodes)) <= 1e-10


def test_evolve_with_coupling(profile):
    e = ellipse(2.0, 1.0, 64)
    curves, _ = evolve_curve(e, 0.3, (0.0, 0.2), budget(e), profile, record_every=10**9)
    assert is_simple(curves[-1])
    assert enclosed_area(curves[-1]) == pytest.approx(enclosed_area(curves[0]), rel=1e-3)


def test_evolve_rejects_large_step(profile):
    c = circle(1.0, 64)
    with pytest.raises(ConfigurationError):
        evolve_curve(c, 0.0, (0.0, 1.0), 2 * budget(c), profile)


def test_evolve_topology_error(profile):
    s = 2 * np.pi * np.arange(64) / 64
    figure_eight = FrontCurve(np.c_[np.sin(s), np.sin(s) * np.cos(s)])
    with pytest.raises(TopologyError) as info:
        evolve_curve(figure_eight, 0.0, (0.0, 1e-4), 1e-6, profile)
    assert info.value.step == 1


def test_hausdorff_symmetric():
    a, b = circle(1.0, 64), circle(1.1, 64)
    assert hausdorff(a, b) == pytest.approx(0.1, abs=1e-12)
    assert hausdorff(a, b) == hausdorff(b, a)
