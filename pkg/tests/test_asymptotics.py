import time

import numpy as np
import pytest
from scipy.integrate import quad

from cellphase.asymptotics import (
    build_expansion,
    defect_norm,
    phi_of_v,
    phi_table,
    scan_roots,
    solve_advected,
    solve_psi0,
    solve_v0,
    theta_residual,
    velocity_roots,
)
from cellphase.errors import (
    ConfigurationError,
    ResolutionError,
    RootMultiplicityError,
    RootNotFoundError,
)
from cellphase.profiles import build_profile, linearized_ac_apply, standing_wave

# Green's-function quadrature of psi'' - psi = -theta0' (adaptive quad on the
# closed-form derivative), computed independently of the finite-difference build.
PSI0_AT_0 = 0.1505195013042763
PSI0_AT_3 = 0.07413962364716883
PHI_AT_0 = 0.014962092391534702


def green_psi0(y):
    d1 = lambda s: standing_wave(s)[1]  # noqa: E731
    a = quad(lambda s: np.exp(s - y) * d1(s), -np.inf, y, epsabs=1e-14, epsrel=1e-13)[0]
    b = quad(lambda s: np.exp(y - s) * d1(s), y, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    return 0.5 * (a + b)


def test_frozen_oracle_values_reproduce():
    assert green_psi0(0.0) == pytest.approx(PSI0_AT_0, abs=1e-13)
    assert green_psi0(3.0) == pytest.approx(PSI0_AT_3, abs=1e-13)


def test_psi0_zero_coupling(profile):
    assert np.all(solve_psi0(0.3, 0.0, profile).values == 0.0)


@pytest.mark.parametrize("V", [-2.0, 0.0, 0.7])
def test_psi0_linear_in_beta(profile, V):
    a = solve_psi0(V, 0.2, profile).values
    b = solve_psi0(V, 0.4, profile).values
    assert np.max(np.abs(b - 2 * a)) <= 1e-12


@pytest.mark.parametrize("V", [-5.0, 0.0, 5.0])
def test_psi0_decays_at_ends(profile, V):
    vals = solve_psi0(V, 1.0, profile).values
    assert abs(vals[0]) <= 1e-8 and abs(vals[-1]) <= 1e-8


def test_psi0_green_oracle(profile):
    psi = solve_psi0(0.0, 1.0, profile).values
    idx = np.flatnonzero(np.abs(profile.grid) <= 20)[::50]
    oracle = np.array([green_psi0(y) for y in profile.grid[idx]])
    assert np.max(np.abs(psi[idx] - oracle)) <= 1e-6


def test_advected_solve_rejects_large_velocity(profile):
    with pytest.raises(ConfigurationError):
        solve_advected(5.5, np.zeros(profile.n), profile)


def test_phi_beta_independent(profile):
    for V in (-1.3, 0.0, 2.2):
        direct = phi_of_v(V, profile)
        psi3 = solve_psi0(-V, 3.0, profile).values
        via3 = profile.integrate(psi3 * profile.dtheta0**2) / 3.0
        assert direct == pytest.approx(via3, abs=1e-12)


def test_phi_zero_oracle(profile):
    assert phi_of_v(0.0, profile) == pytest.approx(PHI_AT_0, abs=1e-6)


def test_phi_even_and_table(profile):
    Vs, phis = phi_table(profile)
    assert Vs.shape == (10001,) and Vs[0] == -5.0 and Vs[-1] == 5.0
    assert np.max(np.abs(phis - phis[::-1])) < 1e-12
    assert phis[5000] == pytest.approx(phi_of_v(0.0, profile), abs=1e-15)


@pytest.mark.parametrize("V", [-1.0, 0.0, 1.0])
def test_phi_richardson(V):
    vals = [phi_of_v(V, build_profile(40.0, h)) for h in (0.08, 0.04, 0.02)]
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert 3.5 <= ratio <= 4.5


def test_solve_v0_examples(profile):
    assert solve_v0(0.0, 0.0, profile) == pytest.approx(0.0, abs=1e-12)
    assert solve_v0(profile.c0, 0.0, profile) == pytest.approx(1.0, abs=1e-12)


def test_solve_v0_scan_oracle(profile):
    F, beta = 0.05, 0.1
    V0 = solve_v0(F, beta, profile)
    g = lambda V: profile.c0 * V - beta * phi_of_v(-V, profile) - F  # noqa: E731
    assert abs(g(V0)) <= 1e-10
    grid = np.arange(-5000, 5001) * 1e-3
    vals = np.array([g(V) for V in grid[::10]])
    changes = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    assert changes.size == 1
    assert grid[::10][changes[0]] <= V0 <= grid[::10][changes[0] + 1]


def test_solve_v0_no_root(profile):
    with pytest.raises(RootNotFoundError):
        solve_v0(1.0, 0.1, profile)


def test_solve_v0_rejects_large_beta(profile):
    with pytest.raises(ConfigurationError):
        solve_v0(0.0, 0.8, profile)


def test_multiplicity_reported():
    grid = np.linspace(-3, 3, 601)
    f = lambda v: (v - 1.0) * (v + 1.0) * v  # noqa: E731
    roots = scan_roots(f, f(grid), grid)
    assert roots == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)
    err = RootMultiplicityError(roots)
    assert err.roots == roots


def test_velocity_roots_unique_small_beta(profile):
    for beta in (-0.5, 0.25, 0.5):
        assert len(velocity_roots(0.02, beta, profile)) == 1


def test_expansion_trivial_cascade(profile):
    t = np.linspace(0, 1, 5)
    ex = build_expansion(1, 0.0, 0.0, t, profile)
    assert np.all(ex.V[0] == 0) and np.all(ex.theta == 0) and np.all(ex.psi[0] == 0)


def test_expansion_constant_forcing(profile):
    t = np.linspace(0, 1, 5)
    ex = build_expansion(1, profile.c0, 0.0, t, profile)
    assert np.allclose(ex.V[0], 1.0, atol=1e-12)
    th1 = ex.theta[0, 2]
    f = -profile.dtheta0 + profile.c0
    lhs = linearized_ac_apply(th1, profile, bc="neumann").values
    assert np.max(np.abs(lhs - f)[1:-1]) <= 10 * profile.h**2
    assert abs(profile.inner(th1, profile.dtheta0)) <= 1e-8


def test_expansion_orthogonality_and_residuals(profile):
    t = np.linspace(0, 1, 9)
    F = lambda s: 0.02 * np.sin(s) + 0.01  # noqa: E731
    ex = build_expansion(3, F, 0.1, t, profile)
    for i in range(1, 4):
        for k in range(t.size):
            assert abs(profile.inner(ex.theta[i - 1, k], profile.dtheta0)) <= 1e-8
            assert np.max(np.abs(theta_residual(ex, i, k))) <= 10 * profile.h**2
    assert np.allclose(ex.V[0], [solve_v0(F(s), 0.1, profile) for s in t], atol=1e-9)


def test_expansion_rejects_order(profile):
    with pytest.raises(ConfigurationError):
        build_expansion(4, 0.0, 0.0, [0.0, 1.0], profile)


def test_defect_exact_standing_wave(profile):
    ex = build_expansion(0, 0.0, 0.0, np.linspace(0, 1, 5), profile)
    d_rho, d_P = defect_norm(ex, 0.05, 0.0, 0.0)
    assert d_rho <= 10 * profile.h**2 and d_P == 0.0


def test_defect_needs_resolution():
    ex_profile = build_profile(40.0, 0.1)
    ex = build_expansion(0, 0.0, 0.0, [0.0, 0.5, 1.0], ex_profile)
    defect_norm(ex, 0.05, 0.0, 0.0)
    with pytest.raises(ResolutionError):
        defect_norm(build_expansion(0, 0.0, 0.0, [0.0, 1.0], ex_profile), 0.05, 0.0, 0.0)


DEFECT_EPS = (0.1, 0.05, 0.025)


@pytest.fixture(scope="module")
def defects(profile):
    F = lambda s: 0.02 * np.sin(s) + 0.01  # noqa: E731
    t = np.linspace(0, 1, 41)
    out = {}
    for N in (0, 1):
        ex = build_expansion(N, F, 0.1, t, profile)
        out[N] = [defect_norm(ex, e, F, 0.1)[0] for e in DEFECT_EPS]
    return out


def test_defect_order_one_beats_order_zero(defects):
    assert all(d1 < d0 for d0, d1 in zip(defects[0], defects[1]))


@pytest.mark.xfail(strict=True, reason="order-1 defect scales like eps^(1/2) in the x-space-time norm; see README")
def test_defect_order_one_slope(defects):
    slope = np.polyfit(np.log(DEFECT_EPS), np.log(defects[1]), 1)[0]
    assert slope >= 1.5


def test_psi_solve_fast(profile):
    t0 = time.perf_counter()
    solve_psi0(0.0, 1.0, profile)
    assert time.perf_counter() - t0 < 1.0
