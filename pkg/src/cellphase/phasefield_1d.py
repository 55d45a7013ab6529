"""One-dimensional phase-field system on a truncated line.

The model is

    rho_t = rho_xx - W'(rho)/eps^2 + P rho_x + F(t)/eps,
    P_t   = eps P_xx - P/eps + beta rho_x,

with rho -> 0 on the left and rho -> 1 on the right.  Note the coupling
signs (+P rho_x and +F/eps) differ from the planar model in
:mod:`cellphase.phasefield_2d`; both are kept as posed.

Time stepping is a first-order IMEX splitting: diffusion and -P/eps are
implicit (tridiagonal solves with precomputed Thomas factors), the
reaction, coupling and forcing terms are explicit.  rho has homogeneous
Neumann ends, P is pinned to zero at both ends.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ._banded import thomas_apply, thomas_factor
from .asymptotics import build_expansion
from .errors import ConfigurationError, DivergenceError, FrontLostError
from .profiles import LineField, potential_eval

MIN_MARGIN = 20.0  # in units of eps
POINTS_PER_EPS = 10


def band(eps, pad=0.0):
    """Maximum-principle interval ``[-eps^{1/4} - pad, 1 + eps^{1/4} + pad]``."""
    q = eps**0.25
    return -q - pad, 1.0 + q + pad


def stability_budget(eps, h):
    """Largest admissible step, ``min(eps^2 / K_W, h^2 / 4)``.

    ``K_W`` is the maximum of ``|W''|`` over the soft band (the hard band
    widened by 0.1); ``W''`` is a convex quadratic, so the maximum sits at
    an endpoint.
    """
    lo, hi = band(eps, pad=0.1)
    k_w = float(max(abs(potential_eval(lo, 2)), abs(potential_eval(hi, 2)), 0.5))
    return min(eps**2 / k_w, h**2 / 4.0)


@dataclass(frozen=True)
class LineState:
    """Snapshot of ``(rho, P)`` on a uniform grid."""

    grid: np.ndarray
    rho: np.ndarray
    P: np.ndarray
    t: float
    eps: float
    beta: float

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def n(self):
        return self.grid.shape[0]

    def band_violation(self, soft=False):
        """Largest excursion of rho outside the band (0 when inside)."""
        lo, hi = band(self.eps, pad=0.1 if soft else 0.0)
        return float(max(lo - self.rho.min(), self.rho.max() - hi, 0.0))


def make_grid(x_lo, x_hi, h):
    """Uniform node grid on ``[x_lo, x_hi]`` with spacing at most ``h``."""
    if not x_hi > x_lo or not h > 0:
        raise ConfigurationError("need x_lo < x_hi and h > 0")
    n = int(np.ceil((x_hi - x_lo) / h - 1e-9)) + 1
    return np.linspace(x_lo, x_hi, n)


def default_grid(eps, x_front, T=1.0, speed=0.0):
    """Grid centred on ``x_front`` with half-width ``30 eps + T * speed``.

    ``speed`` is an upper bound on the front speed, so the padding keeps
    the travelling layer away from the truncation; spacing is ``eps/10``.
    """
    half = 30.0 * eps + T * abs(speed)
    return make_grid(x_front - half, x_front + half, eps / POINTS_PER_EPS)


def init_well_prepared(eps, beta, x_front, N, F, grid, profile, dt_build=1e-3):
    """Evaluate the order-``N`` ansatz at ``t = 0`` centred at ``x_front``.

    ``rho = theta0 + sum eps^i theta_i`` and ``P = sum eps^i Psi_i`` with the
    fields from :func:`cellphase.asymptotics.build_expansion`, sampled at
    ``y = (x - x_front)/eps`` (values are held constant beyond the table).
    ``F`` may be a constant or a callable of time; the expansion is built on
    ``[0, 2*dt_build]`` so that time derivatives at ``t = 0`` exist.
    """
    grid = np.asarray(grid, dtype=float)
    h = float(grid[1] - grid[0])
    if h > eps / POINTS_PER_EPS * (1 + 1e-9):
        raise ConfigurationError(f"grid spacing {h:.3e} exceeds eps/{POINTS_PER_EPS}")
    margin = MIN_MARGIN * eps
    if x_front - grid[0] < margin or grid[-1] - x_front < margin:
        raise ConfigurationError(f"front needs a margin of {MIN_MARGIN:g} eps to both ends")
    t_build = np.array([0.0, dt_build, 2 * dt_build])
    exp = build_expansion(N, F, beta, t_build, profile)
    y = (grid - x_front) / eps
    rho = np.interp(y, profile.grid, exp.rho_tilde(eps, 0))
    P = np.interp(y, profile.grid, exp.P_tilde(eps, 0))
    P[0] = P[-1] = 0.0
    return LineState(grid, rho, P, 0.0, float(eps), float(beta))


@njit(cache=True)
def _imex_steps(rho, P, h, eps, beta, dt, F_values,
                ar, cr, ir, ap, cp, ip, work_r, work_p):
    # Advances len(F_values) steps in place; returns the index of the first
    # step producing non-finite values, or -1.
    n = rho.shape[0]
    inv_e2 = 1.0 / (eps * eps)
    inv_2h = 0.5 / h
    for k in range(F_values.shape[0]):
        forcing = F_values[k] / eps
        total = 0.0
        for j in range(n):
            if j == 0 or j == n - 1:
                rx = 0.0
            else:
                rx = (rho[j + 1] - rho[j - 1]) * inv_2h
            r = rho[j]
            w1 = 0.5 * r * (1.0 - r) * (1.0 - 2.0 * r)
            work_r[j] = r + dt * (-w1 * inv_e2 + P[j] * rx + forcing)
            work_p[j] = P[j] + dt * beta * rx
        work_p[0] = 0.0
        work_p[n - 1] = 0.0
        thomas_apply(ar, cr, ir, work_r, rho)
        thomas_apply(ap, cp, ip, work_p, P)
        for j in range(n):
            total += rho[j] + P[j]
        if not np.isfinite(total):
            return k
    return -1


@dataclass
class _Stepper:
    # Factored implicit operators for a fixed (grid, eps, dt).
    h: float
    eps: float
    dt: float
    n: int
    factors: tuple = field(repr=False)

    @classmethod
    def build(cls, n, h, eps, dt):
        r = dt / h**2
        lo = np.full(n, -r)
        up = np.full(n, -r)
        dg = np.full(n, 1.0 + 2.0 * r)
        up[0] = -2.0 * r  # Neumann by reflection
        lo[-1] = -2.0 * r
        fr = thomas_factor(lo, dg, up)
        rp = eps * r
        lo = np.full(n, -rp)
        up = np.full(n, -rp)
        dg = np.full(n, 1.0 + 2.0 * rp + dt / eps)
        up[0] = lo[0] = 0.0
        up[-1] = lo[-1] = 0.0
        dg[0] = dg[-1] = 1.0
        fp = thomas_factor(lo, dg, up)
        return cls(h, eps, dt, n, fr + fp)

    def advance(self, rho, P, beta, F_values, step0=0, t0=0.0):
        work_r = np.empty(self.n)
        work_p = np.empty(self.n)
        bad = _imex_steps(rho, P, self.h, self.eps, beta, self.dt,
                          np.ascontiguousarray(F_values, dtype=float),
                          *self.factors, work_r, work_p)
        if bad >= 0:
            step = step0 + bad + 1
            raise DivergenceError(step, t0 + (bad + 1) * self.dt)


def _check_dt(state, dt):
    budget = stability_budget(state.eps, state.h)
    if not 0 < dt <= budget * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:.3e} outside the stability budget min(eps^2/K_W, h^2/4)={budget:.3e}"
        )


def step_1d(state, dt, F_value):
    """One IMEX step with forcing ``F_value`` (evaluated at the old time)."""
    _check_dt(state, dt)
    rho = state.rho.copy()
    P = state.P.copy()
    stepper = _Stepper.build(state.n, state.h, state.eps, dt)
    stepper.advance(rho, P, state.beta, np.array([float(F_value)]), t0=state.t)
    return replace(state, rho=rho, P=P, t=state.t + dt)


def _forcing(F):
    if callable(F):
        return np.vectorize(F, otypes=[float])
    value = float(F)
    return lambda t: np.full(np.shape(t), value)


@dataclass(frozen=True)
class LineRun:
    """Recorded output of :func:`run_1d`."""

    times: np.ndarray
    fronts: np.ndarray
    residual_norms: np.ndarray
    band_violations: np.ndarray
    final: LineState
    dt: float
    steps: int


def run_1d(state, T, F, profile, dt=None, n_records=101):
    """Integrate to time ``T`` and record front, residual norm and band excursion.

    ``dt`` defaults to the stability budget, shrunk so that the record times
    ``linspace(t0, t0+T, n_records)`` fall on steps.
    """
    budget = stability_budget(state.eps, state.h)
    dt = budget if dt is None else float(dt)
    segments = n_records - 1
    per_segment = int(np.ceil(T / segments / dt - 1e-9))
    dt = T / (segments * per_segment)
    _check_dt(state, dt)
    Ft = _forcing(F)
    stepper = _Stepper.build(state.n, state.h, state.eps, dt)
    rho, P = state.rho.copy(), state.P.copy()
    t0 = state.t
    times = t0 + np.linspace(0.0, T, n_records)
    fronts = np.empty(n_records)
    norms = np.empty(n_records)
    viol = np.empty(n_records)
    cur = state
    for r in range(n_records):
        if r > 0:
            k0 = (r - 1) * per_segment
            t_steps = t0 + dt * np.arange(k0, k0 + per_segment)
            stepper.advance(rho, P, state.beta, Ft(t_steps), step0=k0, t0=t0 + k0 * dt)
            cur = replace(state, rho=rho.copy(), P=P.copy(), t=float(times[r]))
        fronts[r] = extract_front(cur)
        norms[r] = residual_profile(cur, profile)[1]
        viol[r] = cur.band_violation()
    return LineRun(times, fronts, norms, viol, cur, dt, segments * per_segment)


def extract_front(state):
    """Abscissa of the ``rho = 1/2`` crossing, by linear interpolation.

    With several crossings the one with the steepest discrete gradient wins.
    """
    rho, grid = state.rho, state.grid
    s = rho - 0.5
    idx = np.nonzero((s[:-1] == 0) | (s[:-1] * s[1:] < 0))[0]
    if idx.size == 0:
        if s[-1] != 0:
            raise FrontLostError("rho has no crossing of 1/2")
        idx = np.array([rho.shape[0] - 2])
    slopes = np.abs(rho[idx + 1] - rho[idx])
    j = int(idx[np.argmax(slopes)])
    theta = 0.0 if s[j] == 0 else s[j] / (s[j] - s[j + 1])
    return float(grid[j] + theta * (grid[j + 1] - grid[j]))


def residual_profile(state, profile):
    """Return ``(rho1, norm)`` with ``rho1 = (rho - theta0((x - x_eps)/eps))/eps``.

    ``norm`` is the discrete L2 norm in ``x`` (trapezoid rule).
    """
    x_eps = extract_front(state)
    y = (state.grid - x_eps) / state.eps
    rho1 = (state.rho - profile.interpolate(y)) / state.eps
    w = np.full(state.n, state.h)
    w[0] = w[-1] = 0.5 * state.h
    return LineField(state.grid.copy(), rho1), float(np.sqrt(np.dot(w, rho1**2)))


__all__ = [
    "LineRun", "LineState", "band", "default_grid", "extract_front", "init_well_prepared",
    "make_grid", "residual_profile", "run_1d", "stability_budget", "step_1d",
]
