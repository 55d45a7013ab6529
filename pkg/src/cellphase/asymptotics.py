"""Inner expansion of the one-dimensional traveling front.

The ansatz in the moving coordinate ``y = (x - x_eps(t)) / eps`` is

    rho ~ theta0 + eps theta1 + ... + eps^N thetaN
    P   ~ Psi0   + eps Psi1   + ... + eps^N PsiN

with front velocity ``V = -dx_eps/dt = V0 + eps V1 + ...``.  Each order
requires a solve with the linearized Allen-Cahn operator (see
:mod:`cellphase.profiles`) and an advected screened-Poisson solve
``Psi'' - V0 Psi' - Psi = rhs`` with homogeneous Dirichlet ends.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (
    CellPhaseError,
    ConfigurationError,
    DomainError,
    ResolutionError,
    RootMultiplicityError,
    RootNotFoundError,
)
from .profiles import LineField, linearized_ac_solve, potential_eval

V_MAX = 5.0
SCAN_STEP = 1e-3
MAX_ORDER = 3
BETA_MAX = 0.5
#: half-width (in y) of the window on which defects are measured
DEFECT_WINDOW = 30.0


@njit(cache=True)
def _advected_solve(h, V, rhs, out):
    # Psi'' - V Psi' - Psi = rhs on interior nodes, Psi = 0 at both end nodes
    n = rhs.shape[0]
    lo = 1.0 / (h * h) + V / (2.0 * h)
    up = 1.0 / (h * h) - V / (2.0 * h)
    di = -2.0 / (h * h) - 1.0
    cp = np.empty(n)
    cp[0] = 0.0
    out[0] = 0.0
    for i in range(1, n - 1):
        den = di - lo * cp[i - 1]
        cp[i] = up / den
        out[i] = (rhs[i] - lo * out[i - 1]) / den
    out[n - 1] = 0.0
    for i in range(n - 2, 0, -1):
        out[i] -= cp[i] * out[i + 1]


@njit(cache=True)
def _phi_many(h, Vs, dtheta, weights):
    # Phi(V) = int Psi0(y; -V, beta=1) (theta0')^2 dy for each V
    n = dtheta.shape[0]
    rhs = -dtheta
    psi = np.empty(n)
    wsq = weights * dtheta * dtheta
    out = np.empty(Vs.shape[0])
    for k in range(Vs.shape[0]):
        _advected_solve(h, -Vs[k], rhs, psi)
        s = 0.0
        for i in range(n):
            s += psi[i] * wsq[i]
        out[k] = s
    return out


def solve_advected(V, rhs, profile):
    """Solve ``Psi'' - V Psi' - Psi = rhs`` on the profile grid (Dirichlet 0 at +-L)."""
    if not abs(V) <= V_MAX:
        raise ConfigurationError(f"|V| must be <= {V_MAX}, got {V}")
    rhs = np.ascontiguousarray(rhs, dtype=float)
    out = np.empty_like(rhs)
    _advected_solve(profile.h, float(V), rhs, out)
    return out


@dataclass(frozen=True, eq=False)
class PsiProfile:
    grid: np.ndarray
    values: np.ndarray
    V: float
    beta: float

    def as_field(self):
        return LineField(self.grid, self.values)


def solve_psi0(V, beta, profile):
    """Orientation profile: ``Psi'' - V Psi' - Psi = -beta theta0'``."""
    vals = solve_advected(V, -beta * profile.dtheta0, profile)
    return PsiProfile(profile.grid, vals, float(V), float(beta))


def phi_of_v(V, profile):
    """Interface response ``Phi(V) = int Psi0(y; -V, beta=1) (theta0')^2 dy``.

    Defined with unit coupling, so it carries no dependence on beta.
    """
    if not abs(V) <= V_MAX:
        raise ConfigurationError(f"|V| must be <= {V_MAX}, got {V}")
    return float(
        _phi_many(profile.h, np.array([float(V)]), profile.dtheta0, profile.weights)[0]
    )


def phi_table(profile):
    """``(V, Phi(V))`` on the scan grid ``[-5, 5]`` with step ``1e-3`` (cached)."""
    tab = profile._cache.get("phi_table")
    if tab is None:
        m = int(round(V_MAX / SCAN_STEP))
        Vs = SCAN_STEP * np.arange(-m, m + 1, dtype=float)
        phis = _phi_many(profile.h, Vs, profile.dtheta0, profile.weights)
        Vs.setflags(write=False)
        phis.setflags(write=False)
        tab = (Vs, phis)
        profile._cache["phi_table"] = tab
    return tab


def phi_interpolant(profile):
    """Cubic spline through :func:`phi_table`, for vectorized evaluation."""
    spl = profile._cache.get("phi_spline")
    if spl is None:
        Vs, phis = phi_table(profile)
        spl = CubicSpline(Vs, phis)
        profile._cache["phi_spline"] = spl
    return spl


# ---------------------------------------------------------------------------
# velocity roots


def scan_roots(func, table_values, grid, tol=1e-14):
    """Refined roots of ``func`` from sign changes of ``table_values`` on ``grid``.

    ``table_values`` are samples of ``func`` on ``grid``; each bracket found
    there is polished with Brent's method on ``func`` itself.
    """
    g = np.asarray(table_values)
    roots = []
    zero = g == 0.0
    for k in np.flatnonzero(zero):
        roots.append(float(grid[k]))
    brackets = np.flatnonzero((g[:-1] * g[1:] < 0.0))
    for k in brackets:
        a, b = float(grid[k]), float(grid[k + 1])
        fa, fb = func(a), func(b)
        if fa == 0.0:
            roots.append(a)
        elif fb == 0.0:
            roots.append(b)
        elif fa * fb < 0.0:
            roots.append(brentq(func, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200))
        else:
            # table and direct evaluation disagree in sign at a bracket end; bisect the table cell
            roots.append(0.5 * (a + b))
    return sorted(set(roots))


def _solvability_residual(profile, F_value, beta):
    # g(V) = c0 V - beta Phi(-V) - F
    c0 = profile.c0

    def g(V):
        return c0 * V - beta * phi_of_v(-V, profile) - F_value

    Vs, phis = phi_table(profile)
    table = c0 * Vs - beta * phis[::-1] - F_value
    return g, Vs, table


def velocity_roots(F_value, beta, profile):
    """All roots of ``c0 V - beta Phi(-V) = F`` on ``[-5, 5]``."""
    g, Vs, table = _solvability_residual(profile, float(F_value), float(beta))
    return scan_roots(g, table, Vs)


def solve_v0(F_value, beta, profile):
    """Leading-order front velocity from the first solvability condition.

    Solves ``c0 V0 = int Psi0(y; V0) (theta0')^2 dy + F`` (using
    ``int theta0' = 1``), i.e. ``c0 V0 - beta Phi(-V0) = F``, by a scan at
    step ``1e-3`` on ``[-5, 5]`` followed by Brent polishing.

    Raises
    ------
    RootNotFoundError
        No sign change on the bracket.
    RootMultiplicityError
        More than one root; the error lists them.
    """
    if not abs(beta) <= BETA_MAX:
        raise ConfigurationError(f"|beta| must be <= {BETA_MAX}, got {beta}")
    roots = velocity_roots(F_value, beta, profile)
    if not roots:
        raise RootNotFoundError(f"no root of c0 V - beta Phi(-V) = {F_value} on [-5, 5]")
    if len(roots) > 1:
        raise RootMultiplicityError(roots)
    return roots[0]


# ---------------------------------------------------------------------------
# order-N expansion


def _as_series(F, t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if callable(F):
        return np.array([float(F(t)) for t in t_grid])
    arr = np.asarray(F, dtype=float)
    if arr.ndim == 0:
        return np.full(t_grid.shape, float(arr))
    if arr.shape != t_grid.shape:
        raise DomainError("F series must match the time grid")
    return arr


def _time_derivative(arr, t_grid):
    # arr: (nt, ny); second-order central inside, one-sided at the ends
    if t_grid.shape[0] < 3:
        if t_grid.shape[0] == 1:
            return np.zeros_like(arr)
        return np.gradient(arr, t_grid, axis=0)
    return np.gradient(arr, t_grid, axis=0, edge_order=2)


def _dy(arr, h):
    return np.gradient(arr, h, axis=-1, edge_order=2)


def _dW(thetas, i, theta0):
    # nonlinear remainder (dW)^(i) of W'(theta0 + sum eps^k theta_k)
    if i < 2:
        return 0.0
    w3 = potential_eval(theta0, 3)
    out = 0.0
    for i1 in range(1, i):
        out = out + 0.5 * w3 * thetas[i1] * thetas[i - i1]
    for i1 in range(1, i):
        for i2 in range(1, i - i1):
            i3 = i - i1 - i2
            out = out + thetas[i1] * thetas[i2] * thetas[i3]  # W''''/6 = 1
    return out


@dataclass(frozen=True, eq=False)
class ExpansionSet:
    """Order-N inner expansion sampled on a time grid.

    Attributes
    ----------
    theta : ndarray, shape (N, nt, ny)
        ``theta[i-1]`` is the order-i correction theta_i.
    psi : ndarray, shape (N+1, nt, ny)
        ``psi[i]`` is Psi_i.
    V : ndarray, shape (max(N, 1), nt)
        Velocity coefficients ``V0 .. V_{N-1}``.  ``V0`` is always present
        because Psi0 depends on it.
    x : ndarray, shape (max(N, 1), nt)
        Position coefficients with ``dx_i/dt = -V_i`` and ``x_i(t0) = 0``.
    """

    order: int
    profile: object
    t: np.ndarray
    F: np.ndarray
    beta: float
    theta: np.ndarray
    psi: np.ndarray
    V: np.ndarray
    x: np.ndarray
    alpha: float

    def theta_field(self, i, k):
        if i == 0:
            return self.profile.field(self.profile.theta0)
        return self.profile.field(self.theta[i - 1, k])

    def psi_field(self, i, k):
        return self.profile.field(self.psi[i, k])

    def rho_tilde(self, eps, k):
        out = np.array(self.profile.theta0, dtype=float)
        for i in range(1, self.order + 1):
            out += eps**i * self.theta[i - 1, k]
        return out

    def P_tilde(self, eps, k):
        out = np.zeros(self.profile.n)
        for i in range(self.order + 1):
            out += eps**i * self.psi[i, k]
        return out

    def frame_velocity(self, eps):
        """Truncated velocity ``sum_{j<N} eps^j V_j`` (``V0`` when ``N = 0``)."""
        return sum(eps**j * self.V[j] for j in range(self.V.shape[0]))


def build_expansion(N, F, beta, t_grid, profile, alpha=None, solvability_tol=1e-8):
    """Construct theta_1..theta_N, Psi_0..Psi_N and V_0..V_{N-1}.

    Order by order: V_{i-1} is fixed by the order-i solvability condition
    (nonlinear for i = 1, linear afterwards), theta_i is obtained from the
    bordered linearized Allen-Cahn solve with ``<theta_i, theta0'> = 0``,
    and Psi_i from the advected solve.  Psi_i depends affinely on V_i, which
    is only known at the next order, so Psi_i is carried as a particular
    part plus V_i times a sensitivity; V_N (never determined) is set to 0.
    Time derivatives use second-order finite differences on ``t_grid``.

    F enters the orders only through the first equation.
    """
    if not (isinstance(N, (int, np.integer)) and 0 <= N <= MAX_ORDER):
        raise ConfigurationError(f"expansion order must be an integer in 0..{MAX_ORDER}, got {N!r}")
    if not abs(beta) <= BETA_MAX:
        raise ConfigurationError(f"|beta| must be <= {BETA_MAX}, got {beta}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.shape[0] < 1 or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("time grid must be strictly increasing")
    Fs = _as_series(F, t_grid)
    nt, ny, h = t_grid.shape[0], profile.n, profile.h
    d0 = profile.dtheta0

    V = np.zeros((max(N, 1), nt))
    for k in range(nt):
        try:
            V[0, k] = solve_v0(Fs[k], beta, profile)
        except CellPhaseError as exc:
            raise _annotate(exc, 1, t_grid[k])
    psi = np.zeros((N + 1, nt, ny))
    theta = np.zeros((N, nt, ny))
    for k in range(nt):
        psi[0, k] = solve_advected(V[0, k], -beta * d0, profile)

    thetas = {0: None}
    dthetas = {0: np.broadcast_to(d0, (nt, ny))}
    psi_sens = None  # d Psi_{i-1} / d V_{i-1}
    psi_dot = {0: _time_derivative(psi[0], t_grid)}
    theta_dot = {}

    for i in range(1, N + 1):
        rhs = np.zeros((nt, ny))
        if i - 2 >= 1:
            rhs -= theta_dot[i - 2]
        for j in range(0, i - 1):
            rhs -= V[j][:, None] * dthetas[i - 1 - j]
        for j in range(0, i):
            if j == i - 1 and i >= 2:
                continue  # Psi_{i-1} still carries the unknown V_{i-1}
            rhs += psi[j] * dthetas[i - 1 - j]
        rhs -= _dW(thetas, i, profile.theta0)
        if i == 1:
            rhs -= V[0][:, None] * d0
            rhs += Fs[:, None]
        else:
            # known part of Psi_{i-1}, then fix V_{i-1} by solvability
            rhs += psi[i - 1] * d0
            sens_coef = -d0[None, :] + psi_sens * d0[None, :]
            num = rhs @ (profile.weights * d0)
            den = sens_coef @ (profile.weights * d0)
            V[i - 1] = -num / den
            rhs += V[i - 1][:, None] * sens_coef
            psi[i - 1] += V[i - 1][:, None] * psi_sens
            psi_dot[i - 1] = _time_derivative(psi[i - 1], t_grid)

        th = np.empty((nt, ny))
        for k in range(nt):
            try:
                th[k] = linearized_ac_solve(rhs[k], profile, tol=solvability_tol, bc="neumann").values
            except CellPhaseError as exc:
                raise _annotate(exc, i, t_grid[k])
        theta[i - 1] = th
        thetas[i] = th
        dthetas[i] = _dy(th, h)
        theta_dot[i] = _time_derivative(th, t_grid)

        # Psi_i with V_i := 0, plus its sensitivity to V_i
        prhs = -beta * dthetas[i] + psi_dot[i - 1]
        for j in range(1, i):
            prhs += V[j][:, None] * _dy(psi[i - j], h)
        dpsi0 = _dy(psi[0], h)
        sens = np.empty((nt, ny))
        for k in range(nt):
            psi[i, k] = solve_advected(V[0, k], prhs[k], profile)
            sens[k] = solve_advected(V[0, k], dpsi0[k], profile)
        psi_sens = sens

    x = np.zeros_like(V)
    if nt > 1:
        dt = np.diff(t_grid)
        x[:, 1:] = -np.cumsum(0.5 * dt * (V[:, 1:] + V[:, :-1]), axis=1)
    if alpha is None:
        alpha = max(1.0, N - 0.5)
    return ExpansionSet(
        order=N, profile=profile, t=t_grid, F=Fs, beta=float(beta), theta=theta,
        psi=psi, V=V, x=x, alpha=float(alpha),
    )


def _annotate(exc, order, t):
    exc.args = (f"order {order}, t={t:.6g}: {exc.args[0] if exc.args else exc}",)
    return exc


def theta_residual(expansion, i, k):
    """Plug-back residual of the defining ODE for theta_i at time node k.

    Returns ``-theta_i'' + W''(theta0) theta_i - rhs_i`` on interior nodes,
    with rhs_i rebuilt from the stored coefficients.
    """
    ex, p = expansion, expansion.profile
    h = p.h
    thetas = {j: ex.theta[j - 1] for j in range(1, ex.order + 1)}
    dth = {0: p.dtheta0}
    for j in thetas:
        dth[j] = _dy(thetas[j][k], h)
    rhs = np.zeros(p.n)
    for j in range(0, i):
        rhs += (ex.psi[j, k] - ex.V[j, k]) * dth[i - 1 - j]
    if i == 1:
        rhs += ex.F[k]
    if i >= 3:
        rhs -= _time_derivative(thetas[i - 2], ex.t)[k]
    rhs -= _dW({j: thetas[j][k] for j in thetas}, i, p.theta0)
    th = thetas[i][k]
    lap = (th[2:] - 2 * th[1:-1] + th[:-2]) / h**2
    return -lap + potential_eval(p.theta0[1:-1], 2) * th[1:-1] - rhs[1:-1]


def defect_norm(expansion, eps, F, beta, window=DEFECT_WINDOW):
    """Space-time L2 defect of the truncated ansatz in the 1D model system.

    Both equations are evaluated at ``rho = rho_tilde``, ``P = P_tilde`` in
    the frame ``y = (x - x_eps(t)) / eps`` moving with the truncated velocity
    ``sum_{j<N} eps^j V_j``.  Spatial derivatives use the same discrete
    stencils as the construction; the norm is taken in the physical variable
    ``x`` (``dx = eps dy``) over ``|y| <= window`` and the time grid.

    Returns
    -------
    (float, float)
        ``(defect_rho, defect_P)``.
    """
    ex, p = expansion, expansion.profile
    if not 0.0 < eps <= 0.5:
        raise ConfigurationError(f"eps must lie in (0, 0.5], got {eps}")
    if p.h > 0.1:
        raise ResolutionError(f"profile spacing {p.h} does not resolve eps/10 after rescaling")
    if ex.t.shape[0] < 3:
        raise ResolutionError("defect needs at least three time nodes")
    if window > p.L - 5.0:
        raise ConfigurationError("defect window must stay 5 units inside the profile grid")
    Fs = _as_series(F, ex.t)
    h = p.h
    nt = ex.t.shape[0]
    rho = np.stack([ex.rho_tilde(eps, k) for k in range(nt)])
    P = np.stack([ex.P_tilde(eps, k) for k in range(nt)])
    Vf = ex.frame_velocity(eps)

    rho_y = np.empty_like(rho)
    rho_y[:] = p.dtheta0
    rho_yy = np.empty_like(rho)
    rho_yy[:] = p.d2theta0
    for i in range(1, ex.order + 1):
        th = ex.theta[i - 1]
        rho_y += eps**i * _dy(th, h)
        lap = np.zeros_like(th)
        lap[:, 1:-1] = (th[:, 2:] - 2 * th[:, 1:-1] + th[:, :-2]) / h**2
        rho_yy += eps**i * lap
    P_y = _dy(P, h)
    P_yy = np.zeros_like(P)
    P_yy[:, 1:-1] = (P[:, 2:] - 2 * P[:, 1:-1] + P[:, :-2]) / h**2
    rho_t = _time_derivative(rho, ex.t)
    P_t = _time_derivative(P, ex.t)

    d_rho = (
        Vf[:, None] / eps * rho_y + rho_t
        - (rho_yy / eps**2 - potential_eval(rho, 1) / eps**2 + P * rho_y / eps + Fs[:, None] / eps)
    )
    d_P = Vf[:, None] / eps * P_y + P_t - (P_yy / eps - P / eps + beta * rho_y / eps)

    mask = np.abs(p.grid) <= window
    wy = p.weights[mask] * eps
    wt = np.zeros(nt)
    dt = np.diff(ex.t)
    wt[:-1] += 0.5 * dt
    wt[1:] += 0.5 * dt
    norm_rho = float(np.sqrt(wt @ (d_rho[:, mask] ** 2 @ wy)))
    norm_P = float(np.sqrt(wt @ (d_P[:, mask] ** 2 @ wy)))
    return norm_rho, norm_P
