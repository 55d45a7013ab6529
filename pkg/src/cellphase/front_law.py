"""Sharp-interface motion laws.

1D: ``-c0 dx0/dt = beta Phi(dx0/dt) + F(t)``, integrated with warm-started
root continuation.

2D: the nonlocal, volume-preserving law on a closed curve

    V = kappa + (beta/c0) Phi(V) - mean_Gamma[kappa + (beta/c0) Phi(V)]

with ``V`` the normal velocity along the inward normal.  Curves are closed
counterclockwise polylines kept at uniform arclength by periodic
cubic-spline resampling after every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import directed_hausdorff

from .asymptotics import BETA_MAX, V_MAX, phi_interpolant, phi_of_v, phi_table, scan_roots
from .errors import (
    ConfigurationError,
    DomainError,
    IterationError,
    RootNotFoundError,
    TopologyError,
)

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


# ---------------------------------------------------------------------------
# 1D law


def velocity_residual_1d(X, F_value, beta, profile):
    """``c0 X + beta Phi(X) + F`` with ``X = dx0/dt``."""
    return profile.c0 * X + beta * phi_of_v(X, profile) + F_value


def solve_velocity_1d(F_value, beta, profile, warm_start=None):
    """Front speed ``dx0/dt`` solving ``c0 X + beta Phi(X) + F = 0``.

    All roots on ``[-5, 5]`` are located by a ``1e-3`` scan; the one nearest
    ``warm_start`` (or the beta = 0 root ``-F/c0`` if none is given) is
    returned together with the number of roots found.
    """
    F_value, beta = float(F_value), float(beta)
    Vs, phis = phi_table(profile)
    table = profile.c0 * Vs + beta * phis + F_value
    roots = scan_roots(lambda X: velocity_residual_1d(X, F_value, beta, profile), table, Vs)
    if not roots:
        raise RootNotFoundError(f"no front speed for F={F_value}, beta={beta} on [-5, 5]")
    target = -F_value / profile.c0 if warm_start is None else float(warm_start)
    best = min(roots, key=lambda r: (abs(r - target), r))
    return best, len(roots)


@dataclass(frozen=True, eq=False)
class FrontTrajectory1D:
    t: np.ndarray
    x0: np.ndarray
    v: np.ndarray
    branch_flags: np.ndarray

    def at(self, times):
        return np.interp(times, self.t, self.x0)


def integrate_front_1d(F, beta, x_init, t_span, dt, profile):
    """Explicit midpoint integration of ``dx0/dt = X(F(t))``.

    ``F`` is a callable of time.  The speed at each midpoint is warm-started
    from the previous one so that the trajectory stays on one branch when
    several roots exist; ``branch_flags`` records the root count.
    """
    t0, t1 = map(float, t_span)
    length = t1 - t0
    if not length > 0:
        raise ConfigurationError("t_span must be increasing")
    if not 0 < dt <= 1e-2 * length + 1e-15:
        raise ConfigurationError(f"dt must be <= 1e-2 * (t1 - t0) = {1e-2 * length}")
    n = int(round(length / dt))
    if abs(n * dt - length) > 1e-9 * length:
        n = int(np.ceil(length / dt))
    dt = length / n
    t = t0 + dt * np.arange(n + 1)
    x = np.empty(n + 1)
    v = np.empty(n + 1)
    flags = np.empty(n + 1, dtype=int)
    x[0] = x_init
    v[0], flags[0] = solve_velocity_1d(F(t[0]), beta, profile)
    warm = v[0]
    for k in range(n):
        tm = t[k] + 0.5 * dt
        try:
            vm, _ = solve_velocity_1d(F(tm), beta, profile, warm_start=warm)
        except RootNotFoundError as exc:
            raise RootNotFoundError(f"t={tm:.6g}: {exc}") from exc
        x[k + 1] = x[k] + dt * vm
        v[k + 1], flags[k + 1] = solve_velocity_1d(F(t[k + 1]), beta, profile, warm_start=vm)
        warm = v[k + 1]
    return FrontTrajectory1D(t=t, x0=x, v=v, branch_flags=flags)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class FrontCurve:
    """Closed polyline; ``nodes[i]`` joins ``nodes[i+1]`` and the last joins the first."""

    nodes: np.ndarray
    spacing: float | None = None
    normals: np.ndarray | None = None
    curvature: np.ndarray | None = None

    @property
    def n(self):
        return self.nodes.shape[0]

    def edges(self):
        return np.roll(self.nodes, -1, axis=0) - self.nodes

    def edge_lengths(self):
        return np.hypot(*self.edges().T)

    def length(self):
        return float(self.edge_lengths().sum())

    def node_weights(self):
        """Half the chord ``|x_{i+1} - x_{i-1}|``: the arclength weight per node.

        With these weights a normal displacement with zero weighted mean
        leaves the shoelace area unchanged to first order.
        """
        chord = np.roll(self.nodes, -1, axis=0) - np.roll(self.nodes, 1, axis=0)
        return 0.5 * np.hypot(*chord.T)

    def arclength_mean(self, values):
        w = self.node_weights()
        return float(np.dot(w, values) / w.sum())


def enclosed_area(curve):
    """Shoelace area, positive for counterclockwise orientation."""
    x, y = curve.nodes[:, 0], curve.nodes[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def isoperimetric_ratio(curve):
    return 4.0 * np.pi * enclosed_area(curve) / curve.length() ** 2


def make_curve(points, orient=True):
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("curve nodes must have shape (n, 2)")
    if np.allclose(pts[0], pts[-1]) and pts.shape[0] > 1:
        pts = pts[:-1]
    curve = FrontCurve(pts)
    if orient and enclosed_area(curve) < 0:
        curve = FrontCurve(pts[::-1].copy())
    return curve


def circle(radius, n, center=(0.0, 0.0), phase=0.0):
    s = phase + 2 * np.pi * np.arange(n) / n
    return make_curve(np.c_[center[0] + radius * np.cos(s), center[1] + radius * np.sin(s)])


def ellipse(a, b, n, center=(0.0, 0.0), uniform=True):
    """Ellipse with semi-axes ``a`` (x) and ``b`` (y); uniform arclength nodes by default."""
    s = 2 * np.pi * np.arange(n) / n
    curve = make_curve(np.c_[center[0] + a * np.cos(s), center[1] + b * np.sin(s)])
    if uniform:
        dense = 2 * np.pi * np.arange(64 * n) / (64 * n)
        fine = make_curve(np.c_[center[0] + a * np.cos(dense), center[1] + b * np.sin(dense)])
        curve = reparametrize(fine, n)
    return curve


def curvature_and_normals(curve):
    """Populate curvature (Menger), inward normals and mean spacing.

    The orientation is normalized to counterclockwise first; a circle of
    radius R gets ``kappa = 1/R`` and normals pointing to its center.
    """
    if curve.n < 16:
        raise DomainError("at least 16 nodes are required")
    pts = curve.nodes
    if enclosed_area(curve) < 0:
        pts = pts[::-1].copy()
    prev = np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0)
    a = pts - prev
    b = nxt - pts
    c = nxt - prev
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    la, lb, lc = np.hypot(*a.T), np.hypot(*b.T), np.hypot(*c.T)
    denom = la * lb * lc
    kappa = np.where(np.abs(cross) <= 1e-14 * np.maximum(la * lb, 1e-300), 0.0, 2.0 * cross / denom)
    tangent = c / lc[:, None]
    normals = np.c_[-tangent[:, 1], tangent[:, 0]]  # left of a CCW tangent points inward
    spacing = float(np.mean(np.hypot(*b.T)))
    return FrontCurve(pts, spacing=spacing, normals=normals, curvature=kappa)


def reparametrize(curve, n=None):
    """Resample to ``n`` nodes at uniform arclength of a periodic cubic spline."""
    n = curve.n if n is None else int(n)
    pts = curve.nodes
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    spline = CubicSpline(s, closed, bc_type="periodic")
    # arclength of the spline itself, by Gauss-Legendre on each chord interval
    gx, gw = _GAUSS_X, _GAUSS_W
    mids = 0.5 * (s[:-1] + s[1:])
    halves = 0.5 * np.diff(s)
    nodes = mids[:, None] + halves[:, None] * gx[None, :]
    speed = np.hypot(*spline(nodes, 1).transpose(2, 0, 1))
    arc = np.concatenate([[0.0], np.cumsum((speed * gw[None, :]).sum(axis=1) * halves)])
    target = arc[-1] * np.arange(n) / n
    param = np.interp(target, arc, s)
    # one Newton correction of the arclength inversion
    sub = np.searchsorted(arc, target, side="right") - 1
    sub = np.clip(sub, 0, seg.shape[0] - 1)
    for _ in range(2):
        partial = _partial_arclength(spline, s[sub], param, gx, gw)
        err = arc[sub] + partial - target
        param = param - err / np.hypot(*spline(param, 1).T)
    return FrontCurve(spline(param))


def _partial_arclength(spline, a, b, gx, gw):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * gx[None, :]
    speed = np.hypot(*spline(pts, 1).transpose(2, 0, 1))
    return (speed * gw[None, :]).sum(axis=1) * half


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True)
def _segments_intersect(p):
    # True if any two non-adjacent edges of the closed polyline cross properly
    n = p.shape[0]
    for i in range(n):
        ax, ay = p[i, 0], p[i, 1]
        bx, by = p[(i + 1) % n, 0], p[(i + 1) % n, 1]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            cx, cy = p[j, 0], p[j, 1]
            dx, dy = p[(j + 1) % n, 0], p[(j + 1) % n, 1]
            # cheap bounding-box rejection first
            if max(ax, bx) < min(cx, dx) or max(cx, dx) < min(ax, bx):
                continue
            if max(ay, by) < min(cy, dy) or max(cy, dy) < min(ay, by):
                continue
            o1 = _orient(ax, ay, bx, by, cx, cy)
            o2 = _orient(ax, ay, bx, by, dx, dy)
            o3 = _orient(cx, cy, dx, dy, ax, ay)
            o4 = _orient(cx, cy, dx, dy, bx, by)
            if o1 * o2 < 0.0 and o3 * o4 < 0.0:
                return True
    return False


def is_simple(curve):
    return not _segments_intersect(np.ascontiguousarray(curve.nodes, dtype=float))


def total_turning(curve):
    e = curve.edges()
    ang = np.arctan2(e[:, 1], e[:, 0])
    turn = np.diff(np.concatenate([ang, ang[:1]]))
    turn = (turn + np.pi) % (2 * np.pi) - np.pi
    return float(turn.sum())


def solve_velocity_field_2d(curve, beta, profile, damping=0.5, tol=1e-10, max_iter=200):
    """Normal velocity from the nonlocal interface law by damped fixed point.

    Iterates ``V <- V + damping * (T(V) - V)`` with
    ``T(V) = g(V) - mean(g(V))``, ``g = kappa + (beta/c0) Phi(V)``, starting
    from the curvature-flow velocity ``kappa - mean(kappa)``.  The mean is
    the node-weighted arclength average (:meth:`FrontCurve.node_weights`).
    """
    if curve.curvature is None:
        raise DomainError("curve curvature is not populated; call curvature_and_normals first")
    if not abs(beta) <= BETA_MAX:
        raise ConfigurationError(f"|beta| must be <= {BETA_MAX}, got {beta}")
    w = curve.node_weights()
    w = w / w.sum()
    kappa = curve.curvature

    def T(V):
        g = kappa + (beta / profile.c0) * phi_eval(V, profile) if beta != 0.0 else kappa
        return g - np.dot(w, g)

    V = kappa - np.dot(w, kappa)
    for it in range(1, max_iter + 1):
        TV = T(V)
        res = float(np.max(np.abs(TV - V)))
        if res <= tol:
            return TV if beta != 0.0 else V
        V = V + damping * (TV - V)
    raise IterationError(max_iter, res)


def phi_eval(V, profile):
    """Vectorized ``Phi`` through the cached spline; rejects ``|V| > 5``."""
    V = np.asarray(V, dtype=float)
    if np.any(np.abs(V) > V_MAX):
        raise ConfigurationError(f"normal velocity exceeds the tabulated range |V| <= {V_MAX}")
    return phi_interpolant(profile)(V)


def evolve_curve(curve, beta, t_span, dt, profile, record_every=1, check_topology=True):
    """Forward-Euler evolution ``x <- x + dt V n`` with uniform reparametrization.

    Returns the list of recorded curves (initial curve first) and their times
    as ``(curves, times)``.
    """
    t0, t1 = map(float, t_span)
    cur = curvature_and_normals(reparametrize(curve))
    h_min = float(cur.edge_lengths().min())
    if dt > 0.1 * h_min**2 * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:.3e} exceeds the explicit budget 0.1*h_min^2={0.1 * h_min**2:.3e}"
        )
    n_steps = int(round((t1 - t0) / dt))
    curves, times = [cur], [t0]
    for k in range(1, n_steps + 1):
        V = solve_velocity_field_2d(cur, beta, profile)
        moved = FrontCurve(cur.nodes + dt * V[:, None] * cur.normals)
        cur = curvature_and_normals(reparametrize(moved))
        if check_topology and _segments_intersect(np.ascontiguousarray(cur.nodes)):
            raise TopologyError(f"curve self-intersects at step {k}", step=k)
        if not np.all(np.isfinite(cur.nodes)):
            raise TopologyError(f"non-finite node positions at step {k}", step=k)
        if k % record_every == 0 or k == n_steps:
            curves.append(cur)
            times.append(t0 + k * dt)
    return curves, np.array(times)


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two node sets."""
    pa = a.nodes if isinstance(a, FrontCurve) else np.asarray(a)
    pb = b.nodes if isinstance(b, FrontCurve) else np.asarray(b)
    return max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0])


__all__ = [
    "FrontCurve", "FrontTrajectory1D", "circle", "curvature_and_normals", "ellipse",
    "enclosed_area", "evolve_curve", "hausdorff", "integrate_front_1d", "is_simple",
    "isoperimetric_ratio", "make_curve", "reparametrize", "solve_velocity_1d",
    "solve_velocity_field_2d", "total_turning",
]
