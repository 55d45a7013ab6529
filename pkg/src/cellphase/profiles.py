"""Double-well potential, the standing wave and the linearized Allen-Cahn operator.

Everything here lives on a symmetric uniform grid ``y = h * (-m, ..., m)``
so that ``y = 0`` is a node and the standing wave takes the value 1/2 there
exactly.

Notes
-----
The quartic well ``W(r) = r**2 (1 - r)**2 / 4`` has the explicit increasing
heteroclinic ``theta0(y) = (1 + tanh(y / sqrt(8))) / 2``.  The surface-tension
constant ``c0 = int (theta0')**2 dy`` equals ``int_0^1 sqrt(2 W) = sqrt(2)/12``
for this well.  Some literature on this model quotes ``sqrt(3/2)`` instead;
the value reported here is the quadrature, which is verified against the
equipartition identity in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, DomainError, SolvabilityError

SQRT2 = np.sqrt(2.0)
SQRT8 = np.sqrt(8.0)

#: Closed-form surface tension of the quartic well.
C0_EXACT = SQRT2 / 12.0


def potential_eval(rho, order=0):
    """Evaluate the double-well potential or one of its derivatives.

    Parameters
    ----------
    rho : float or ndarray
        Phase-field value(s).
    order : int
        Derivative order, 0 through 4.

    Returns
    -------
    float or ndarray
        ``W``, ``W'``, ``W''``, ``W'''`` or ``W''''`` at ``rho``.
    """
    if order not in (0, 1, 2, 3, 4):
        raise DomainError(f"derivative order must be in 0..4, got {order!r}")
    r = np.asarray(rho, dtype=float)
    if order == 0:
        out = 0.25 * r * r * (1.0 - r) ** 2
    elif order == 1:
        out = 0.5 * r * (1.0 - r) * (1.0 - 2.0 * r)
    elif order == 2:
        out = 0.5 * (1.0 - 6.0 * r + 6.0 * r * r)
    elif order == 3:
        out = 6.0 * r - 3.0
    else:
        out = np.full_like(r, 6.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class LineField:
    """Scalar samples on a uniform 1D grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid.shape != self.values.shape:
            raise DomainError("grid and values must have the same shape")

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    def __len__(self):
        return self.grid.shape[0]


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Tabulated standing wave ``theta0`` with its first two derivatives.

    Instances are immutable and hash by identity, which lets expensive
    derived objects (factorizations, tabulated response functions) be
    cached per table.
    """

    grid: np.ndarray
    h: float
    theta0: np.ndarray
    dtheta0: np.ndarray
    d2theta0: np.ndarray
    c0: float
    total_rise: float
    kappa_env: float
    c_env: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def L(self):
        return float(self.grid[-1])

    @property
    def n(self):
        return self.grid.shape[0]

    @property
    def weights(self):
        """Composite trapezoid weights on the grid."""
        w = self._cache.get("weights")
        if w is None:
            w = np.full(self.n, self.h)
            w[0] = w[-1] = 0.5 * self.h
            w.setflags(write=False)
            self._cache["weights"] = w
        return w

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def inner(self, u, v):
        """Discrete L2 inner product; accepts arrays or :class:`LineField`."""
        return self.integrate(_values(u, self) * _values(v, self))

    def field(self, values):
        return LineField(self.grid, np.asarray(values, dtype=float))

    def interpolate(self, y, which="theta0"):
        """Evaluate a tabulated column at arbitrary ``y`` (clamped outside the grid)."""
        return np.interp(y, self.grid, getattr(self, which))


def _values(u, profile):
    if isinstance(u, LineField):
        if u.grid.shape != profile.grid.shape or not np.array_equal(u.grid, profile.grid):
            raise DomainError("field is not sampled on the profile grid")
        return u.values
    arr = np.asarray(u, dtype=float)
    if arr.shape != profile.grid.shape:
        raise DomainError(f"expected {profile.grid.shape[0]} samples, got {arr.shape}")
    return arr


def standing_wave(y):
    """Closed-form ``(theta0, theta0', theta0'')`` at ``y``."""
    y = np.asarray(y, dtype=float)
    t = np.tanh(y / SQRT8)
    e = np.exp(-2.0 * np.abs(y) / SQRT8)
    sech2 = 4.0 * e / (1.0 + e) ** 2
    return 0.5 * (1.0 + t), sech2 / (4.0 * SQRT2), -sech2 * t / 8.0


def build_profile(L=40.0, h=0.01):
    """Tabulate the increasing standing wave on ``[-L, L]``.

    ``h`` is rounded down so that ``L / h`` is an integer; the effective
    spacing is stored on the table.
    """
    if not L >= 40.0:
        raise ConfigurationError(f"half-width L must be >= 40, got {L}")
    if not 0.0 < h <= 0.1:
        raise ConfigurationError(f"spacing h must lie in (0, 0.1], got {h}")
    m = int(np.ceil(L / h - 1e-9))
    h_eff = L / m
    y = h_eff * np.arange(-m, m + 1, dtype=float)
    theta, dtheta, d2theta = standing_wave(y)

    w = np.full(y.shape[0], h_eff)
    w[0] = w[-1] = 0.5 * h_eff
    c0 = float(np.dot(w, dtheta**2))
    total_rise = float(np.dot(w, dtheta))
    kappa_env, c_env = _fit_envelope(y, dtheta**2, L)

    for arr in (y, theta, dtheta, d2theta):
        arr.setflags(write=False)
    return ProfileTable(
        grid=y, h=h_eff, theta0=theta, dtheta0=dtheta, d2theta0=d2theta,
        c0=c0, total_rise=total_rise, kappa_env=kappa_env, c_env=c_env,
    )


def _fit_envelope(y, w, L):
    # log w ~ a - kappa |y| on |y| <= L/2; c_env then brackets every node.
    mask = np.abs(y) <= 0.5 * L
    slope, _ = np.polyfit(np.abs(y[mask]), np.log(w[mask]), 1)
    kappa = -float(slope)
    log_ratio = np.log(w) + kappa * np.abs(y)
    c_env = float(np.exp(np.max(np.abs(log_ratio)))) * (1.0 + 1e-9)
    return kappa, max(c_env, 1.0 + 1e-9)


# ---------------------------------------------------------------------------
# linearized Allen-Cahn operator  -u'' + W''(theta0) u


def _second_difference(u, h, bc):
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    if bc == "dirichlet":
        out[0] = u[1] - 2.0 * u[0]
        out[-1] = u[-2] - 2.0 * u[-1]
    elif bc == "neumann":
        out[0] = 2.0 * (u[1] - u[0])
        out[-1] = 2.0 * (u[-2] - u[-1])
    else:
        raise DomainError(f"unknown boundary closure {bc!r}")
    return out / (h * h)


def linearized_ac_apply(u, profile, bc="dirichlet"):
    """Apply ``-u'' + W''(theta0) u`` with second-order central differences.

    ``bc`` selects the closure at ``+-L``: homogeneous Dirichlet (default,
    for decaying fields) or homogeneous Neumann (for fields with nonzero
    far-field limits).
    """
    vals = _values(u, profile)
    out = -_second_difference(vals, profile.h, bc) + potential_eval(profile.theta0, 2) * vals
    return profile.field(out)


def _bordered_lu(profile, bc):
    key = ("bordered_lu", bc)
    lu = profile._cache.get(key)
    if lu is not None:
        return lu
    n, h = profile.n, profile.h
    main = 2.0 / h**2 + potential_eval(profile.theta0, 2)
    off = np.full(n - 1, -1.0 / h**2)
    upper, lower = off.copy(), off.copy()
    if bc == "neumann":
        upper[0] = -2.0 / h**2
        lower[-1] = -2.0 / h**2
    elif bc != "dirichlet":
        raise DomainError(f"unknown boundary closure {bc!r}")
    A = sp.diags([lower, main, upper], [-1, 0, 1], shape=(n, n), format="csc")
    g = (profile.weights * profile.dtheta0)[:, None]
    M = sp.bmat([[A, sp.csc_matrix(g)], [sp.csc_matrix(g.T), None]], format="csc")
    lu = splu(M)
    profile._cache[key] = lu
    return lu


def linearized_ac_solve(f, profile, tol=1e-8, bc="dirichlet", return_multiplier=False):
    """Solve ``-u'' + W''(theta0) u = f`` with ``<u, theta0'> = 0``.

    The kernel direction is removed with a bordered (saddle-point) system

        [A   g] [u]   [f]
        [g^T 0] [m] = [0],   g = quadrature weights * theta0',

    whose multiplier ``m`` absorbs the O(h^2) mismatch between the discrete
    operator and the tabulated kernel.

    Raises
    ------
    SolvabilityError
        If ``|<f, theta0'>| > tol``.
    """
    vals = _values(f, profile)
    ip = profile.inner(vals, profile.dtheta0)
    if abs(ip) > tol:
        raise SolvabilityError(ip, tol)
    lu = _bordered_lu(profile, bc)
    sol = lu.solve(np.append(vals, 0.0))
    u = profile.field(sol[:-1])
    if return_multiplier:
        return u, float(sol[-1])
    return u


# ---------------------------------------------------------------------------
# weighted inequalities


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    ratio: float
    bound: float

    @property
    def holds(self):
        return self.ratio <= self.bound


def inequality_bounds(profile):
    """Reference constants for the four weighted inequalities.

    Friedrichs: ``c_env**4 / kappa_env**2``; Poincare: the same plus 10%.
    The interpolation constants follow from the 1D Agmon inequality
    ``f**2 <= |f|_2 |f'|_2`` applied to ``f = theta0' v`` together with
    ``|theta0''| <= theta0' / sqrt(2)``: ``(3/2)**(1/4)`` and ``(3/2)**(1/2)``.
    """
    c_f = profile.c_env**4 / profile.kappa_env**2
    return {
        "poincare": 1.1 * c_f,
        "friedrich": c_f,
        "interp_3": 1.5**0.25,
        "ii_4": 1.5**0.5,
    }


def _ratio(lhs, rhs):
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else np.inf
    return lhs / rhs


def check_weighted_inequalities(v, profile, dv=None):
    """Measure the weighted Poincare, Friedrichs and interpolation inequalities.

    The weight is ``(theta0')**2``.  The Friedrichs check uses
    ``v - v(0)``, so it is the inequality itself whenever ``v(0) = 0``.
    ``dv`` may supply an exact derivative; otherwise a second-order central
    difference is used.

    Returns
    -------
    dict
        ``{"poincare", "friedrich", "interp_3", "ii_4"}`` -> :class:`InequalityCheck`.
    """
    vals = _values(v, profile)
    dvals = np.gradient(vals, profile.h, edge_order=2) if dv is None else _values(dv, profile)
    w = profile.dtheta0**2
    integ = profile.integrate
    bounds = inequality_bounds(profile)

    mass = integ(w)
    mean = integ(w * vals) / mass
    grad2 = integ(w * dvals**2)
    out = {}

    lhs = integ(w * (vals - mean) ** 2)
    out["poincare"] = InequalityCheck(lhs, grad2, _ratio(lhs, grad2), bounds["poincare"])

    v0 = vals[profile.n // 2]
    lhs = integ(w * (vals - v0) ** 2)
    out["friedrich"] = InequalityCheck(lhs, grad2, _ratio(lhs, grad2), bounds["friedrich"])

    l2 = integ(w * vals**2)
    h1 = np.sqrt(integ(w * (vals**2 + dvals**2)))
    lhs = integ(profile.dtheta0**3 * np.abs(vals) ** 3)
    rhs = h1 * l2
    out["interp_3"] = InequalityCheck(lhs, rhs, _ratio(lhs, rhs), bounds["interp_3"])

    lhs = integ(w**2 * vals**4)
    rhs = h1 * l2**1.5
    out["ii_4"] = InequalityCheck(lhs, rhs, _ratio(lhs, rhs), bounds["ii_4"])
    return out
