"""Planar phase-field system with a mass-conserving Lagrange multiplier.

The model on a rectangle is

    rho_t = Lap rho - W'(rho)/eps^2 - P . grad rho + lambda(t),
    P_t   = eps Lap P - P/eps - beta grad rho,
    lambda = |Omega|^-1 int (W'(rho)/eps^2 + P . grad rho),

with ``d rho/d nu = 0`` and ``P = 0`` on the boundary.  Unknowns live at
cell centres; integrals use the midpoint rule; the Neumann closure
reflects ``rho`` into the ghost cells and the Dirichlet closure mirrors
``P`` with a sign flip, so that ``P`` vanishes on the wall itself.

The step is first-order IMEX.  The Laplacians (and ``-P/eps``) are
implicit through a factored pair of tridiagonal sweeps, one per axis;
everything else is explicit.  The cell-centred Neumann sweeps preserve the
discrete mass exactly, and a final constant shift removes the quadrature
mismatch between the analytic multiplier and the discrete constraint.
The shift divided by ``dt`` is added to the reported multiplier.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from skimage.measure import find_contours, points_in_poly

from ._banded import thomas_factor
from .asymptotics import solve_psi0
from .errors import ConfigurationError, DivergenceError, TopologyError
from .front_law import FrontCurve, make_curve, reparametrize
from .profiles import potential_eval, standing_wave

POINTS_PER_EPS = 8
BAND_TOLERANCE = 0.10  # relative excess that triggers a warning


class BandViolationWarning(UserWarning):
    """rho left the maximum-principle band by more than 10% of its width."""


@dataclass(frozen=True)
class PlaneGrid:
    """Cell-centred uniform grid on ``[x_lo, x_hi] x [y_lo, y_hi]``."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int

    @property
    def hx(self):
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def hy(self):
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def area(self):
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def x(self):
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self):
        return self.y_lo + (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self):
        """Cell-centre coordinates, ``indexing='ij'`` (first axis is x)."""
        return np.meshgrid(self.x, self.y, indexing="ij")


def square_grid(n, side, center=(0.0, 0.0)):
    cx, cy = center
    half = 0.5 * side
    return PlaneGrid(cx - half, cx + half, cy - half, cy + half, int(n), int(n))


@dataclass(frozen=True)
class PlaneState:
    """Snapshot of ``rho`` and the two components of ``P``.

    ``rho`` and ``Px``, ``Py`` have shape ``(nx, ny)``; ``mass0`` is the
    midpoint-rule integral of the initial ``rho``.
    """

    grid: PlaneGrid
    rho: np.ndarray
    Px: np.ndarray
    Py: np.ndarray
    t: float
    eps: float
    beta: float
    mass0: float

    def mass(self):
        return float(self.rho.sum() * self.grid.cell_area)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E_eps: float
    F_eps: float
    lam: float
    rho_min: float
    rho_max: float
    band_ok: bool


def check_resolution(grid, eps):
    h = max(grid.hx, grid.hy)
    if h > eps / POINTS_PER_EPS * (1 + 1e-9):
        raise ConfigurationError(f"spacing {h:.4g} exceeds eps/{POINTS_PER_EPS} = {eps / POINTS_PER_EPS:.4g}")


def stability_budget(eps, h):
    """``min(eps^2/K_W, h^2/4)`` with ``K_W = max |W''|`` on the padded band."""
    q = eps**0.25 + 0.1
    k_w = float(max(abs(potential_eval(-q, 2)), abs(potential_eval(1 + q, 2)), 0.5))
    return min(eps**2 / k_w, h**2 / 4.0)


# ---------------------------------------------------------------------------
# stencils


@njit(cache=True)
def _gradient(u, hx, hy, odd, gx, gy):
    # centred differences; ghost value = u (even, Neumann) or -u (odd, Dirichlet)
    nx, ny = u.shape
    s = -1.0 if odd else 1.0
    for i in range(nx):
        for j in range(ny):
            left = u[i - 1, j] if i > 0 else s * u[i, j]
            right = u[i + 1, j] if i < nx - 1 else s * u[i, j]
            down = u[i, j - 1] if j > 0 else s * u[i, j]
            up = u[i, j + 1] if j < ny - 1 else s * u[i, j]
            gx[i, j] = (right - left) / (2.0 * hx)
            gy[i, j] = (up - down) / (2.0 * hy)


def gradient(u, grid, odd=False):
    gx = np.empty_like(u)
    gy = np.empty_like(u)
    _gradient(np.ascontiguousarray(u, dtype=float), grid.hx, grid.hy, odd, gx, gy)
    return gx, gy


@njit(cache=True)
def _sweep_x(u, a, cp, inv):
    # Thomas solve along the first axis for every column at once
    nx, ny = u.shape
    for j in range(ny):
        u[0, j] *= inv[0]
    for i in range(1, nx):
        for j in range(ny):
            u[i, j] = (u[i, j] - a[i] * u[i - 1, j]) * inv[i]
    for i in range(nx - 2, -1, -1):
        for j in range(ny):
            u[i, j] -= cp[i] * u[i + 1, j]


@njit(cache=True)
def _sweep_y(u, a, cp, inv):
    nx, ny = u.shape
    for i in range(nx):
        u[i, 0] *= inv[0]
        for j in range(1, ny):
            u[i, j] = (u[i, j] - a[j] * u[i, j - 1]) * inv[j]
        for j in range(ny - 2, -1, -1):
            u[i, j] -= cp[j] * u[i, j + 1]


def _line_operator(n, r, odd):
    # I - r * D2 on a cell-centred line with reflected (even) or mirrored (odd) ghosts
    lo = np.full(n, -r)
    up = np.full(n, -r)
    dg = np.full(n, 1.0 + 2.0 * r)
    corner = 1.0 + 3.0 * r if odd else 1.0 + r
    dg[0] = dg[-1] = corner
    return thomas_factor(lo, dg, up)


@njit(cache=True)
def _imex_steps(rho, Px, Py, nsteps, dt, hx, hy, eps, beta, mass0, cell,
                rxa, rxc, rxi, rya, ryc, ryi, pxa, pxc, pxi, pya, pyc, pyi,
                lam_out, stats):
    # stats: [max |mass - mass0|, running min rho, running max rho, failed step]
    nx, ny = rho.shape
    gx = np.empty_like(rho)
    gy = np.empty_like(rho)
    wr = np.empty_like(rho)
    inv_e2 = 1.0 / (eps * eps)
    p_scale = 1.0 / (1.0 + dt / eps)
    area = cell * nx * ny
    for k in range(nsteps):
        _gradient(rho, hx, hy, False, gx, gy)
        acc = 0.0
        for i in range(nx):
            for j in range(ny):
                r = rho[i, j]
                w1 = 0.5 * r * (1.0 - r) * (1.0 - 2.0 * r) * inv_e2
                adv = Px[i, j] * gx[i, j] + Py[i, j] * gy[i, j]
                wr[i, j] = w1 + adv
                acc += w1 + adv
        lam = acc * cell / area
        for i in range(nx):
            for j in range(ny):
                wr[i, j] = rho[i, j] + dt * (lam - wr[i, j])
                Px[i, j] = (Px[i, j] - dt * beta * gx[i, j]) * p_scale
                Py[i, j] = (Py[i, j] - dt * beta * gy[i, j]) * p_scale
        _sweep_x(wr, rxa, rxc, rxi)
        _sweep_y(wr, rya, ryc, ryi)
        _sweep_x(Px, pxa, pxc, pxi)
        _sweep_y(Px, pya, pyc, pyi)
        _sweep_x(Py, pxa, pxc, pxi)
        _sweep_y(Py, pya, pyc, pyi)
        total = 0.0
        for i in range(nx):
            for j in range(ny):
                total += wr[i, j]
        shift = (mass0 - total * cell) / area
        total = 0.0
        lo = np.inf
        hi = -np.inf
        for i in range(nx):
            for j in range(ny):
                v = wr[i, j] + shift
                rho[i, j] = v
                total += v
                lo = min(lo, v)
                hi = max(hi, v)
        lam_out[k] = lam + shift / dt
        if not (np.isfinite(total) and np.isfinite(Px[0, 0] + Py[0, 0])):
            stats[3] = k
            return
        stats[0] = max(stats[0], abs(total * cell - mass0))
        stats[1] = min(stats[1], lo)
        stats[2] = max(stats[2], hi)


class _Stepper:
    def __init__(self, grid, eps, dt):
        rx, ry = dt / grid.hx**2, dt / grid.hy**2
        a = dt * eps / (1.0 + dt / eps)
        self.factors = (
            _line_operator(grid.nx, rx, False) + _line_operator(grid.ny, ry, False)
            + _line_operator(grid.nx, a / grid.hx**2, True)
            + _line_operator(grid.ny, a / grid.hy**2, True)
        )
        self.grid, self.eps, self.dt = grid, eps, dt

    def advance(self, rho, Px, Py, beta, mass0, nsteps, t0=0.0, step0=0):
        """Advance in place; returns ``(lambdas, max mass drift, rho_min, rho_max)``."""
        g = self.grid
        lam = np.empty(nsteps)
        stats = np.array([0.0, np.inf, -np.inf, -1.0])
        _imex_steps(rho, Px, Py, nsteps, self.dt, g.hx, g.hy, self.eps, beta, mass0,
                    g.cell_area, *self.factors, lam, stats)
        if stats[3] >= 0:
            k = int(stats[3]) + 1
            raise DivergenceError(step0 + k, t0 + k * self.dt)
        return lam, stats[0], stats[1], stats[2]


# ---------------------------------------------------------------------------
# diagnostics


def lagrange_multiplier(state):
    """Midpoint-rule average of ``W'(rho)/eps^2 + P . grad rho``."""
    gx, gy = gradient(state.rho, state.grid)
    integrand = potential_eval(state.rho, 1) / state.eps**2 + state.Px * gx + state.Py * gy
    return float(integrand.mean())


def energies(state):
    """``(E_eps, F_eps)`` by the midpoint rule with centred gradients."""
    g = state.grid
    gx, gy = gradient(state.rho, g)
    e = 0.5 * state.eps * (gx**2 + gy**2) + potential_eval(state.rho, 0) / state.eps
    p2 = state.Px**2 + state.Py**2
    return float(e.sum() * g.cell_area), float((p2 + p2**2).sum() * g.cell_area)


@dataclass(frozen=True)
class BandCheck:
    rho_min: float
    rho_max: float
    inside: bool
    sharp_bound: float
    inside_sharp: bool
    excess: float


def max_principle_check(state, sup_lambda=0.0, rho_min=None, rho_max=None):
    """Compare the extrema of rho with ``[-eps^{1/4}, 1 + eps^{1/4}]``.

    The sharper band ``[-2 eps^2 S, 1 + 2 eps^2 S]`` with ``S = sup |lambda|``
    is evaluated as well.  ``excess`` is the distance outside the wide
    band relative to ``eps^{1/4}``.
    """
    lo = float(state.rho.min()) if rho_min is None else float(rho_min)
    hi = float(state.rho.max()) if rho_max is None else float(rho_max)
    q = state.eps**0.25
    sharp = 2.0 * state.eps**2 * abs(sup_lambda)
    excess = max(-q - lo, hi - 1.0 - q, 0.0) / q
    return BandCheck(
        lo, hi, bool(lo >= -q and hi <= 1.0 + q), sharp,
        bool(lo >= -sharp and hi <= 1.0 + sharp), excess,
    )


def _record(state, lam, rho_min=None, rho_max=None):
    E, F = energies(state)
    check = max_principle_check(state, rho_min=rho_min, rho_max=rho_max)
    if check.excess > BAND_TOLERANCE:
        warnings.warn(
            f"rho outside the maximum-principle band at t={state.t:.6g} "
            f"(range [{check.rho_min:.4f}, {check.rho_max:.4f}])",
            BandViolationWarning,
            stacklevel=3,
        )
    return DiagnosticsRecord(state.t, E, F, float(lam), check.rho_min, check.rho_max, check.inside)


# ---------------------------------------------------------------------------
# time stepping


def _check_dt(state, dt):
    budget = stability_budget(state.eps, min(state.grid.hx, state.grid.hy))
    if not 0 < dt <= budget * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:.3e} outside the stability budget min(eps^2/K_W, h^2/4)={budget:.3e}"
        )


def _copy_fields(state):
    return (np.array(state.rho, dtype=float, order="C"),
            np.array(state.Px, dtype=float, order="C"),
            np.array(state.Py, dtype=float, order="C"))


def step_2d(state, dt):
    """One IMEX step; returns the new state and its diagnostics record."""
    _check_dt(state, dt)
    rho, Px, Py = _copy_fields(state)
    lam, _, _, _ = _Stepper(state.grid, state.eps, dt).advance(
        rho, Px, Py, state.beta, state.mass0, 1, t0=state.t)
    new = replace(state, rho=rho, Px=Px, Py=Py, t=state.t + dt)
    return new, _record(new, lam[0])


@dataclass(frozen=True)
class PlaneRun:
    """Output of :func:`run_2d`.

    ``records`` are taken at the record times; ``max_mass_drift``,
    ``rho_min`` and ``rho_max`` are accumulated over every step.
    """

    records: list
    states: list
    lambdas: np.ndarray
    dt: float
    steps: int
    max_mass_drift: float
    rho_min: float
    rho_max: float
    final: PlaneState

    @property
    def sup_lambda(self):
        return float(np.max(np.abs(self.lambdas))) if self.lambdas.size else 0.0


def run_2d(state, T, dt=None, n_records=11, keep_states=False):
    """Integrate to ``t0 + T`` recording diagnostics ``n_records`` times."""
    budget = stability_budget(state.eps, min(state.grid.hx, state.grid.hy))
    dt = budget if dt is None else float(dt)
    segments = max(n_records - 1, 1)
    per_segment = int(np.ceil(T / segments / dt - 1e-9))
    dt = T / (segments * per_segment)
    _check_dt(state, dt)
    stepper = _Stepper(state.grid, state.eps, dt)
    rho, Px, Py = _copy_fields(state)
    cur = state
    records = [_record(cur, lagrange_multiplier(cur))]
    states = [cur] if keep_states else []
    lams = []
    drift, lo, hi = abs(cur.mass() - cur.mass0), float(rho.min()), float(rho.max())
    for r in range(1, segments + 1):
        k0 = (r - 1) * per_segment
        lam, d, l, h = stepper.advance(rho, Px, Py, state.beta, state.mass0, per_segment,
                                       t0=state.t + k0 * dt, step0=k0)
        lams.append(lam)
        drift, lo, hi = max(drift, d), min(lo, l), max(hi, h)
        cur = replace(state, rho=rho.copy(), Px=Px.copy(), Py=Py.copy(),
                      t=state.t + r * per_segment * dt)
        records.append(_record(cur, lam[-1], rho_min=cur.rho.min(), rho_max=cur.rho.max()))
        if keep_states:
            states.append(cur)
    return PlaneRun(records, states, np.concatenate(lams) if lams else np.zeros(0), dt,
                    segments * per_segment, drift, lo, hi, cur)


# ---------------------------------------------------------------------------
# initial data and interface extraction


def signed_distance(curve, grid, chunk=4096):
    """Distance from each cell centre to the polygon, positive inside."""
    X, Y = grid.mesh()
    pts = np.c_[X.ravel(), Y.ravel()]
    a = curve.nodes
    b = np.roll(a, -1, axis=0)
    ab = b - a
    len2 = np.maximum((ab**2).sum(axis=1), 1e-300)
    dist = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        p = pts[s:s + chunk, None, :]
        t = np.clip(((p - a) * ab).sum(axis=2) / len2, 0.0, 1.0)
        d = p - (a + t[..., None] * ab)
        dist[s:s + chunk] = np.sqrt((d**2).sum(axis=2)).min(axis=1)
    inside = points_in_poly(pts, a)
    return np.where(inside, dist, -dist).reshape(X.shape)


def init_from_curve(curve, grid, eps, beta, profile=None, polarized=True):
    """Diffuse-interface data ``rho = theta0(d/eps)`` around ``curve``.

    ``d`` is the signed distance (positive inside).  When ``polarized`` and
    ``beta != 0``, ``P = psi(d/eps) grad d`` with ``psi'' - psi = beta theta0'``,
    the stationary layer profile of the orientation equation; otherwise
    ``P = 0``.
    """
    check_resolution(grid, eps)
    d = signed_distance(curve, grid)
    z = d / eps
    rho, _, _ = standing_wave(z)
    Px = np.zeros_like(rho)
    Py = np.zeros_like(rho)
    if polarized and beta != 0.0:
        if profile is None:
            raise ConfigurationError("a profile table is required for polarized data")
        psi = solve_psi0(0.0, -beta, profile).values
        amp = np.interp(z, profile.grid, psi, left=0.0, right=0.0)
        gx, gy = np.gradient(d, grid.hx, grid.hy)
        norm = np.maximum(np.hypot(gx, gy), 1e-12)
        Px, Py = amp * gx / norm, amp * gy / norm
    rho = np.ascontiguousarray(rho)
    mass0 = float(rho.sum() * grid.cell_area)
    return PlaneState(grid, rho, np.ascontiguousarray(Px), np.ascontiguousarray(Py),
                      0.0, float(eps), float(beta), mass0)


def polygon(vertices, n=256):
    """Closed polygon through ``vertices`` resampled to ``n`` uniform nodes."""
    verts = np.asarray(vertices, dtype=float)
    closed = np.vstack([verts, verts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = s[-1] * np.arange(n) / n
    pts = np.c_[np.interp(target, s, closed[:, 0]), np.interp(target, s, closed[:, 1])]
    return make_curve(pts)


def extract_contour(state, n_nodes=None):
    """Level set ``rho = 1/2`` as a counterclockwise uniform-arclength curve."""
    g = state.grid
    contours = find_contours(state.rho, 0.5)
    closed = [c for c in contours if np.allclose(c[0], c[-1])]
    if len(contours) != 1 or len(closed) != 1:
        raise TopologyError(
            f"level set 1/2 has {len(contours)} components ({len(closed)} closed)",
            n_components=len(contours),
        )
    c = closed[0]
    pts = np.c_[g.x_lo + (c[:, 0] + 0.5) * g.hx, g.y_lo + (c[:, 1] + 0.5) * g.hy]
    curve = make_curve(pts)
    n = curve.n if n_nodes is None else int(n_nodes)
    return reparametrize(curve, n)


__all__ = [
    "BandCheck", "BandViolationWarning", "DiagnosticsRecord", "PlaneGrid", "PlaneRun",
    "PlaneState", "check_resolution", "energies", "extract_contour", "gradient",
    "init_from_curve", "lagrange_multiplier", "max_principle_check", "polygon",
    "run_2d", "signed_distance", "square_grid", "stability_budget", "step_2d",
]
