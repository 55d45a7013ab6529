"""Experiment configuration, orchestration and persistence.

A run is described by an INI file (see ``README.md`` for the schema).
Every mode writes CSV tables with a fixed header plus ``manifest.ini``,
which echoes the configuration, records library versions, wall time and
exit status, and lists summary scalars.  Floats are written with
``repr``, so re-running the same configuration reproduces every CSV byte
for byte, and the manifest can be passed back as a configuration.
"""
from __future__ import annotations

import configparser
import csv
import io
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import front_law, phasefield_1d, phasefield_2d
from .asymptotics import build_expansion, defect_norm, phi_of_v, solve_v0
from .errors import CellPhaseError, ConfigurationError, DomainError
from .profiles import build_profile, check_weighted_inequalities

MODES = ("pde1d", "pde2d", "front1d", "front2d", "phi_table", "converge1d", "compare2d",
         "expansion_defect")
FORCINGS = ("constant", "sinusoid", "table")
SHAPES = ("front", "circle", "ellipse", "polygon")

# Allowed keys per section with their parsers; anything else is rejected.
_LIST = "list"
_SCHEMA = {
    "run": {"mode": str, "eps": _LIST, "beta": float, "t_final": float, "dt": float,
            "seed": int, "order": int, "records": int, "output": str},
    "forcing": {"kind": str, "value": float, "amplitude": float, "omega": float,
                "offset": float, "times": _LIST, "values": _LIST},
    "geometry": {"shape": str, "x_front": float, "radius": float, "a": float, "b": float,
                 "center": _LIST, "vertices": str, "nodes": int},
    "grid": {"n": int, "side": float, "profile_h": float, "profile_L": float,
             "front_dt": float},
    "phi": {"v_min": float, "v_max": float, "v_step": float},
    "check": {"samples": int},
}
# Sections written by the harness into manifests; ignored when reading one back.
_OUTPUT_SECTIONS = ("status", "versions", "summary")

_DEFAULTS = {
    "run": {"beta": "0.0", "t_final": "1.0", "seed": "0", "order": "1", "records": "101"},
    "forcing": {"kind": "constant", "value": "0.0"},
    "geometry": {"shape": "front", "x_front": "0.0", "nodes": "64"},
    "grid": {"n": "256", "side": "1.28", "profile_h": "0.01", "profile_L": "40.0",
             "front_dt": "1e-3"},
    "phi": {"v_min": "-2.0", "v_max": "2.0", "v_step": "0.1"},
    "check": {"samples": "100"},
}


def _parse_list(text):
    return [float(tok) for tok in text.replace(",", " ").split()]


@dataclass
class ForcingSpec:
    """``F(t)``: constant, ``A sin(omega t) + B`` or linear interpolation of samples."""

    kind: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    omega: float = 1.0
    offset: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __call__(self, t):
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoid":
            return self.amplitude * math.sin(self.omega * t) + self.offset
        return float(np.interp(t, self.times, self.values))

    def sup_abs(self, t_final):
        ts = np.linspace(0.0, t_final, 1001)
        return float(max(abs(self(t)) for t in ts))


@dataclass
class RunConfig:
    mode: str
    eps: tuple = ()
    beta: float = 0.0
    t_final: float = 1.0
    dt: float | None = None
    seed: int = 0
    order: int = 1
    records: int = 101
    output: str | None = None
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    shape: str = "front"
    x_front: float = 0.0
    radius: float | None = None
    a: float | None = None
    b: float | None = None
    center: tuple = (0.0, 0.0)
    vertices: tuple = ()
    nodes: int = 64
    grid_n: int = 256
    grid_side: float = 1.28
    profile_h: float = 0.01
    profile_L: float = 40.0
    front_dt: float = 1e-3
    v_min: float = -2.0
    v_max: float = 2.0
    v_step: float = 0.1
    samples: int = 100
    source: str = ""

    @property
    def eps_single(self):
        return self.eps[0]


def parse_config(text):
    """Parse INI text into a validated :class:`RunConfig`.

    Every violated rule is collected; a :class:`ConfigurationError` lists
    them all.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable configuration: {exc}") from exc
    problems = []
    raw = {}
    for section in parser.sections():
        if section in _OUTPUT_SECTIONS:
            continue
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
                continue
            kind = _SCHEMA[section][key]
            try:
                raw[(section, key)] = (
                    _parse_list(value) if kind is _LIST else kind(value.strip())
                )
            except ValueError:
                problems.append(f"{section}.{key}: cannot parse {value!r}")
    for section, keys in _DEFAULTS.items():
        for key, value in keys.items():
            if (section, key) not in raw:
                kind = _SCHEMA[section][key]
                raw[(section, key)] = _parse_list(value) if kind is _LIST else kind(value)
    if ("run", "mode") not in raw:
        problems.append("run.mode is required")

    g = lambda s, k, default=None: raw.get((s, k), default)  # noqa: E731
    forcing = ForcingSpec(
        kind=g("forcing", "kind"), value=g("forcing", "value"),
        amplitude=g("forcing", "amplitude", 0.0), omega=g("forcing", "omega", 1.0),
        offset=g("forcing", "offset", 0.0),
        times=tuple(g("forcing", "times", ())), values=tuple(g("forcing", "values", ())),
    )
    verts = g("geometry", "vertices")
    vertices = ()
    if verts:
        try:
            vertices = tuple(tuple(_parse_list(v)) for v in verts.split(";") if v.strip())
        except ValueError:
            problems.append("geometry.vertices: expected 'x y; x y; ...'")
    cfg = RunConfig(
        mode=g("run", "mode", ""), eps=tuple(g("run", "eps", ())), beta=g("run", "beta"),
        t_final=g("run", "t_final"), dt=g("run", "dt"), seed=g("run", "seed"),
        order=g("run", "order"), records=g("run", "records"), output=g("run", "output"),
        forcing=forcing, shape=g("geometry", "shape"), x_front=g("geometry", "x_front"),
        radius=g("geometry", "radius"), a=g("geometry", "a"), b=g("geometry", "b"),
        center=tuple(g("geometry", "center", (0.0, 0.0))), vertices=vertices,
        nodes=g("geometry", "nodes"), grid_n=g("grid", "n"), grid_side=g("grid", "side"),
        profile_h=g("grid", "profile_h"), profile_L=g("grid", "profile_L"),
        front_dt=g("grid", "front_dt"), v_min=g("phi", "v_min"), v_max=g("phi", "v_max"),
        v_step=g("phi", "v_step"), samples=g("check", "samples"), source=text,
    )
    if cfg.mode:
        problems.extend(validate(cfg))
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg


def load_config(path):
    return parse_config(Path(path).read_text())


def validate(cfg):
    """Return the list of violated rules (empty when the configuration is usable)."""
    p = []
    if cfg.mode not in MODES:
        p.append(f"run.mode must be one of {', '.join(MODES)}")
    needs_eps = cfg.mode in ("pde1d", "pde2d", "converge1d", "compare2d", "expansion_defect")
    if needs_eps and not cfg.eps:
        p.append("run.eps is required for this mode")
    if any(not e > 0 for e in cfg.eps):
        p.append("run.eps entries must be positive")
    if cfg.mode in ("converge1d", "expansion_defect"):
        if len(cfg.eps) < 3:
            p.append("run.eps needs at least three values for a convergence study")
        if any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
            p.append("run.eps must be strictly decreasing")
    if not cfg.t_final > 0:
        p.append("run.t_final must be positive")
    if cfg.dt is not None and not cfg.dt > 0:
        p.append("run.dt must be positive")
    if not abs(cfg.beta) <= 0.5:
        p.append("run.beta must satisfy |beta| <= 0.5")
    if not 0 <= cfg.order <= 3:
        p.append("run.order must be in 0..3")
    if cfg.records < 2:
        p.append("run.records must be at least 2")
    f = cfg.forcing
    if f.kind not in FORCINGS:
        p.append(f"forcing.kind must be one of {', '.join(FORCINGS)}")
    if f.kind == "table":
        if len(f.times) < 2 or len(f.times) != len(f.values):
            p.append("forcing.times and forcing.values must have equal length >= 2")
        elif any(b <= a for a, b in zip(f.times, f.times[1:])):
            p.append("forcing.times must be strictly increasing")
    if cfg.shape not in SHAPES:
        p.append(f"geometry.shape must be one of {', '.join(SHAPES)}")
    planar = cfg.mode in ("pde2d", "front2d", "compare2d")
    if planar:
        if cfg.shape == "front":
            p.append("planar modes need geometry.shape = circle, ellipse or polygon")
        if cfg.shape == "circle" and not (cfg.radius or 0) > 0:
            p.append("geometry.radius must be positive")
        if cfg.shape == "ellipse" and not ((cfg.a or 0) > 0 and (cfg.b or 0) > 0):
            p.append("geometry.a and geometry.b must be positive")
        if cfg.shape == "polygon" and len(cfg.vertices) < 3:
            p.append("geometry.vertices needs at least three points")
        if len(cfg.center) != 2:
            p.append("geometry.center needs two coordinates")
        if cfg.nodes < 16:
            p.append("geometry.nodes must be >= 16")
    if cfg.grid_n < 8 or not cfg.grid_side > 0:
        p.append("grid.n must be >= 8 and grid.side positive")
    if planar and cfg.mode != "front2d" and cfg.eps:
        h = cfg.grid_side / cfg.grid_n
        if h > cfg.eps[0] / phasefield_2d.POINTS_PER_EPS * (1 + 1e-9):
            p.append(f"grid spacing {h:.4g} exceeds eps/{phasefield_2d.POINTS_PER_EPS}")
    if not cfg.v_step > 0 or not cfg.v_max > cfg.v_min:
        p.append("phi range needs v_min < v_max and v_step > 0")
    if max(abs(cfg.v_min), abs(cfg.v_max)) > 5:
        p.append("phi range must stay within |V| <= 5")
    if cfg.samples < 1:
        p.append("check.samples must be positive")
    if not cfg.front_dt > 0:
        p.append("grid.front_dt must be positive")
    return p


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def format_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(format_csv(header, rows))


def _cell(text):
    if not text:
        return float("nan")
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_csv(path):
    """Return ``(header, rows)``; integer cells stay ``int``, empty cells become ``nan``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[_cell(c) for c in row] for row in r]
    return header, rows


def _versions():
    import numba
    import scipy
    import skimage

    from . import __version__

    return {"cellphase": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "scikit-image": skimage.__version__}


def write_manifest(path, cfg, summary, status, wall_time, error=""):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(cfg.source)
    for sec in _OUTPUT_SECTIONS:
        if parser.has_section(sec):
            parser.remove_section(sec)
    parser["status"] = {"exit": status, "wall_time": f"{wall_time:.3f}", "error": error}
    parser["versions"] = _versions()
    parser["summary"] = {k: _fmt(v) for k, v in summary.items()}
    with open(path, "w") as fh:
        parser.write(fh)


_PLOT_TEMPLATE = '''"""Plot {csv_name} (generated by cellphase)."""
import csv
import matplotlib.pyplot as plt

with open("{csv_name}") as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], [[float(c) if c else float("nan") for c in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots()
for j in range(1, len(header)):
    ax.plot(cols[0], cols[j], marker=".", label=header[j])
ax.set_xlabel(header[0])
{extra}ax.legend()
fig.savefig("{stem}.png", dpi=150)
'''


def write_plot_script(out_dir, csv_name, loglog=False):
    stem = Path(csv_name).stem
    extra = 'ax.set_xscale("log")\nax.set_yscale("log")\n' if loglog else ""
    (Path(out_dir) / f"plot_{stem}.py").write_text(
        _PLOT_TEMPLATE.format(csv_name=csv_name, stem=stem, extra=extra))


# ---------------------------------------------------------------------------
# numerics shared by the modes


def convergence_table(errors):
    """Pairwise empirical orders ``log(e_i/e_{i+1}) / log(eps_i/eps_{i+1})``."""
    pairs = [(float(e), float(err)) for e, err in errors]
    if len(pairs) < 2:
        raise DomainError("need at least two (eps, error) pairs")
    if any(err <= 0 for _, err in pairs):
        raise DomainError("errors must be positive")
    if any(b[0] >= a[0] for a, b in zip(pairs, pairs[1:])):
        raise DomainError("eps must be strictly decreasing")
    return [math.log(a[1] / b[1]) / math.log(a[0] / b[0]) for a, b in zip(pairs, pairs[1:])]


def _profile(cfg):
    return build_profile(cfg.profile_L, cfg.profile_h)


def _speed_bound(cfg, profile):
    ts = np.linspace(0.0, cfg.t_final, 101)
    speeds = [abs(front_law.solve_velocity_1d(cfg.forcing(t), cfg.beta, profile)[0]) for t in ts]
    return 1.5 * max(speeds) + 0.05


def initial_curve(cfg, n=None):
    n = cfg.nodes if n is None else n
    c = tuple(cfg.center)
    if cfg.shape == "circle":
        return front_law.circle(cfg.radius, n, center=c)
    if cfg.shape == "ellipse":
        return front_law.ellipse(cfg.a, cfg.b, n, center=c)
    if cfg.shape == "polygon":
        return phasefield_2d.polygon(cfg.vertices, max(n, 256))
    raise ConfigurationError("planar modes need a closed shape")


def _plane_grid(cfg):
    return phasefield_2d.square_grid(cfg.grid_n, cfg.grid_side, tuple(cfg.center))


def _front_dt(curve):
    h = front_law.reparametrize(curve).edge_lengths().min()
    return 0.1 * h * h


def _front_step(cfg, dt=None):
    # the integrator wants at least 100 steps over the horizon
    return min(dt or cfg.front_dt, 1e-2 * cfg.t_final)


def _record_schedule(T, records, dt):
    # step size <= dt that lands exactly on the record times
    per = int(math.ceil(T / (records - 1) / dt - 1e-9))
    return T / ((records - 1) * per), per


def pde1d_trajectory(cfg, eps, profile):
    """Single 1D run; returns ``(LineRun, x0 at the record times)``."""
    speed = _speed_bound(cfg, profile)
    grid = phasefield_1d.default_grid(eps, cfg.x_front, cfg.t_final, speed)
    state = phasefield_1d.init_well_prepared(eps, cfg.beta, cfg.x_front, cfg.order,
                                             cfg.forcing, grid, profile)
    run_ = phasefield_1d.run_1d(state, cfg.t_final, cfg.forcing, profile, dt=cfg.dt,
                                n_records=cfg.records)
    traj = front_law.integrate_front_1d(cfg.forcing, cfg.beta, cfg.x_front,
                                        (0.0, cfg.t_final), _front_step(cfg), profile)
    return run_, traj.at(run_.times)


def _converge_worker(args):
    cfg, eps = args
    profile = _profile(cfg)
    run_, x0 = pde1d_trajectory(cfg, eps, profile)
    return run_.times, run_.fronts, x0, run_.residual_norms, run_.band_violations


# ---------------------------------------------------------------------------
# modes; each writes its tables into ``out`` and returns a summary dict


def _mode_front1d(cfg, out, jobs):
    profile = _profile(cfg)
    traj = front_law.integrate_front_1d(cfg.forcing, cfg.beta, cfg.x_front,
                                        (0.0, cfg.t_final), _front_step(cfg, cfg.dt), profile)
    write_csv(out / "trajectory.csv", ["t", "x0", "velocity"], zip(traj.t, traj.x0, traj.v))
    write_plot_script(out, "trajectory.csv")
    slope = float(np.polyfit(traj.t, traj.x0, 1)[0])
    return {"slope": slope, "x_final": float(traj.x0[-1]), "steps": len(traj.t) - 1,
            "branch_switches": int(np.sum(traj.branch_flags > 1))}


def _mode_pde1d(cfg, out, jobs):
    profile = _profile(cfg)
    eps = cfg.eps_single
    run_, x0 = pde1d_trajectory(cfg, eps, profile)
    write_csv(out / "trajectory.csv", ["t", "x_eps", "x0", "residual_norm", "band_violation"],
              zip(run_.times, run_.fronts, x0, run_.residual_norms, run_.band_violations))
    write_plot_script(out, "trajectory.csv")
    return {"eps": eps, "sup_err": float(np.max(np.abs(run_.fronts - x0))),
            "sup_residual": float(run_.residual_norms.max()),
            "max_band_violation": float(run_.band_violations.max()),
            "dt": run_.dt, "steps": run_.steps}


def _mode_converge1d(cfg, out, jobs):
    tasks = [(cfg, e) for e in cfg.eps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_converge_worker, tasks))
    else:
        results = [_converge_worker(t) for t in tasks]
    errs, resid = [], []
    for eps, (times, xe, x0, norms, viol) in zip(cfg.eps, results):
        write_csv(out / f"trajectory_eps{eps:g}.csv",
                  ["t", "x_eps", "x0", "residual_norm", "band_violation"],
                  zip(times, xe, x0, norms, viol))
        errs.append(float(np.max(np.abs(xe - x0))))
        resid.append((float(norms.max()), float(viol.max())))
    orders = convergence_table(list(zip(cfg.eps, errs)))
    write_csv(out / "converge.csv", ["eps", "sup_err", "order"],
              zip(cfg.eps, errs, [None] + orders))
    write_csv(out / "residual.csv", ["eps", "sup_residual_norm", "max_band_violation"],
              [(e, r, v) for e, (r, v) in zip(cfg.eps, resid)])
    write_plot_script(out, "converge.csv", loglog=True)
    summary = {"min_order": min(orders),
               "errors_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
               "residual_ratio": max(r for r, _ in resid) / resid[0][0],
               "max_band_violation": max(v for _, v in resid)}
    for i, o in enumerate(orders):
        summary[f"order_{i}"] = o
    return summary


def _plane_run(cfg, profile, eps, T):
    curve = initial_curve(cfg, max(cfg.nodes, 256))
    grid = _plane_grid(cfg)
    state = phasefield_2d.init_from_curve(curve, grid, eps, cfg.beta, profile)
    return phasefield_2d.run_2d(state, T, dt=cfg.dt, n_records=cfg.records, keep_states=True)


def _mode_pde2d(cfg, out, jobs):
    profile = _profile(cfg)
    eps = cfg.eps_single
    run_ = _plane_run(cfg, profile, eps, cfg.t_final)
    mass0 = run_.final.mass0
    rows = [(r.t, r.E_eps, r.F_eps, r.lam, r.rho_min, r.rho_max, abs(s.mass() - mass0),
             r.band_ok) for r, s in zip(run_.records, run_.states)]
    write_csv(out / "diagnostics.csv",
              ["t", "E_eps", "F_eps", "lambda", "rho_min", "rho_max", "mass_drift", "band_ok"],
              rows)
    write_plot_script(out, "diagnostics.csv")
    try:
        c = phasefield_2d.extract_contour(run_.final)
        write_csv(out / "final_contour.csv", ["x", "y"], c.nodes)
    except CellPhaseError:
        pass
    r0 = run_.records[0]
    e0 = r0.E_eps + r0.F_eps
    check = phasefield_2d.max_principle_check(run_.final, run_.sup_lambda,
                                              run_.rho_min, run_.rho_max)
    return {"eps": eps, "steps": run_.steps, "dt": run_.dt,
            "max_mass_drift": run_.max_mass_drift,
            "mass_drift_over_area": run_.max_mass_drift / run_.final.grid.area,
            "energy_max_over_bound": max(r.E_eps + r.F_eps for r in run_.records) / (3 * e0 + 1),
            "band_ok": check.inside, "rho_min": run_.rho_min, "rho_max": run_.rho_max,
            "sup_lambda": run_.sup_lambda}


def _front2d_series(cfg, curve, profile, T, records):
    dt, per = _record_schedule(T, records, cfg.dt or _front_dt(curve))
    return front_law.evolve_curve(curve, cfg.beta, (0.0, T), dt, profile, record_every=per)


def _mode_front2d(cfg, out, jobs):
    profile = _profile(cfg)
    curve = initial_curve(cfg)
    curves, times = _front2d_series(cfg, curve, profile, cfg.t_final, cfg.records)
    rows = [(t, front_law.enclosed_area(c), c.length(), front_law.isoperimetric_ratio(c))
            for t, c in zip(times, curves)]
    write_csv(out / "curve_series.csv", ["t", "area", "length", "isoperimetric_ratio"], rows)
    write_csv(out / "final_curve.csv", ["x", "y"], curves[-1].nodes)
    write_plot_script(out, "curve_series.csv")
    ratios = [r[3] for r in rows]
    return {"area_drift": abs(rows[-1][1] - rows[0][1]) / rows[0][1],
            "ratio_monotone": all(b > a for a, b in zip(ratios, ratios[1:])),
            "ratio_final": ratios[-1]}


def compare_2d(cfg, profile=None, initial_front=None):
    """Run the planar PDE and the interface law from the same initial curve.

    The interface law is seeded with the ``rho = 1/2`` contour of the PDE
    initial data.  Passing ``initial_front`` whose Hausdorff distance to
    that contour exceeds one grid cell is a configuration error.
    Returns rows ``(t, hausdorff, area_pde, area_front)``.
    """
    profile = _profile(cfg) if profile is None else profile
    eps = cfg.eps_single
    run_ = _plane_run(cfg, profile, eps, cfg.t_final)
    seed = phasefield_2d.extract_contour(run_.states[0], cfg.nodes)
    if initial_front is not None:
        h = max(run_.final.grid.hx, run_.final.grid.hy)
        if front_law.hausdorff(initial_front, seed) > h:
            raise ConfigurationError("initial front does not match the PDE initial contour")
        seed = initial_front
    curves, times = _front2d_series(cfg, seed, profile, cfg.t_final, cfg.records)
    rows = []
    for st, fc, t in zip(run_.states, curves, times):
        try:
            pc = phasefield_2d.extract_contour(st, cfg.nodes)
        except CellPhaseError as exc:
            raise type(exc)(f"{exc} (at t={st.t:.6g})") from exc
        rows.append((st.t, front_law.hausdorff(pc, fc), front_law.enclosed_area(pc),
                     front_law.enclosed_area(fc)))
    return rows


def _mode_compare2d(cfg, out, jobs):
    rows = compare_2d(cfg)
    write_csv(out / "hausdorff.csv", ["t", "hausdorff", "area_pde", "area_front"], rows)
    write_plot_script(out, "hausdorff.csv")
    d = [r[1] for r in rows]
    eps = cfg.eps_single
    return {"eps": eps, "max_hausdorff": max(d), "max_hausdorff_over_eps": max(d) / eps,
            "pde_area_drift": abs(rows[-1][2] - rows[0][2]) / rows[0][2]}


def _mode_phi_table(cfg, out, jobs):
    profile = _profile(cfg)
    m = int(round((cfg.v_max - cfg.v_min) / cfg.v_step))
    Vs = cfg.v_min + cfg.v_step * np.arange(m + 1)
    rows = [(V, phi_of_v(V, profile)) for V in Vs]
    write_csv(out / "phi.csv", ["V", "Phi"], rows)
    write_plot_script(out, "phi.csv")
    return {"rows": len(rows), "phi_at_zero": phi_of_v(0.0, profile)}


def _mode_expansion_defect(cfg, out, jobs):
    profile = _profile(cfg)
    t_grid = np.linspace(0.0, cfg.t_final, cfg.records)
    rows = []
    for order in range(cfg.order + 1):
        exp = build_expansion(order, cfg.forcing, cfg.beta, t_grid, profile)
        for eps in cfg.eps:
            d_rho, d_P = defect_norm(exp, eps, cfg.forcing, cfg.beta)
            rows.append((eps, order, d_rho, d_P))
    write_csv(out / "defect.csv", ["eps", "order", "defect_rho", "defect_P"], rows)
    summary = {}
    for order in range(cfg.order + 1):
        sel = [(e, d) for e, o, d, _ in rows if o == order]
        es, ds = np.log([e for e, _ in sel]), np.log([d for _, d in sel])
        summary[f"slope_order{order}"] = float(np.polyfit(es, ds, 1)[0])
    return summary


_MODES = {
    "front1d": _mode_front1d, "pde1d": _mode_pde1d, "converge1d": _mode_converge1d,
    "pde2d": _mode_pde2d, "front2d": _mode_front2d, "compare2d": _mode_compare2d,
    "phi_table": _mode_phi_table, "expansion_defect": _mode_expansion_defect,
}


@dataclass
class RunArtifact:
    out_dir: Path
    summary: dict
    status: str
    wall_time: float
    error: str = ""


def run(cfg, out_dir=None, jobs=1, seed=None):
    """Execute ``cfg`` and write its outputs; numerical failures are recorded, not raised."""
    if seed is not None:
        cfg.seed = int(seed)
    out = Path(out_dir or cfg.output or f"out_{cfg.mode}")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, error, summary = "ok", "", {}
    try:
        summary = _MODES[cfg.mode](cfg, out, jobs)
    except CellPhaseError as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - t0
    write_manifest(out / "manifest.ini", cfg, summary, status, wall, error)
    return RunArtifact(out, summary, status, wall, error)


# ---------------------------------------------------------------------------
# property suites for the ``check`` subcommand


def random_smooth_functions(rng, profile, count):
    """Seeded smooth test functions: a random quadratic plus Gaussian bumps and a ramp."""
    y = profile.grid
    out = []
    for _ in range(count):
        c = rng.normal(size=3)
        v = c[0] + c[1] * np.tanh(y / rng.uniform(1, 10)) + 0.02 * c[2] * y
        for _ in range(rng.integers(1, 5)):
            v += rng.normal() * np.exp(-((y - rng.uniform(-8, 8)) / rng.uniform(0.5, 4)) ** 2)
        out.append(v)
    return out


def inequality_suite(profile, seed=0, samples=100):
    """Rows ``(name, worst ratio, bound, all hold)`` over seeded test functions."""
    rng = np.random.default_rng(seed)
    worst = {}
    for v in random_smooth_functions(rng, profile, samples):
        for name, chk in check_weighted_inequalities(v, profile).items():
            ratio, ok = worst.get(name, (0.0, True))
            worst[name] = (max(ratio, chk.ratio), ok and chk.holds)
    from .profiles import inequality_bounds

    bounds = inequality_bounds(profile)
    return [(name, r, bounds[name], ok) for name, (r, ok) in worst.items()]


def velocity_suite(profile, seed=0, samples=50):
    """Max ``|solve_v0 + solve_velocity_1d|`` over seeded ``(F, beta)`` pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        F = rng.uniform(-0.3, 0.3)
        beta = rng.uniform(-0.3, 0.3)
        V0 = solve_v0(F, beta, profile)
        X, _ = front_law.solve_velocity_1d(F, beta, profile)
        worst = max(worst, abs(V0 + X))
    return worst


def run_checks(cfg, out_dir, seed=None):
    seed = cfg.seed if seed is None else seed
    profile = _profile(cfg)
    rows = []
    for name, ratio, bound, ok in inequality_suite(profile, seed, cfg.samples):
        rows.append((f"inequality_{name}", ratio, bound, ok))
    worst = velocity_suite(profile, seed)
    rows.append(("velocity_consistency", worst, 1e-9, worst <= 1e-9))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = format_csv(["check", "value", "bound", "passed"], [])
    body = "".join(f"{n},{_fmt(v)},{_fmt(b)},{_fmt(ok)}\n" for n, v, b, ok in rows)
    (out / "checks.csv").write_text(text + body)
    return rows


def default_jobs():
    return max(1, min(4, os.cpu_count() or 1))


__all__ = [
    "ForcingSpec", "RunArtifact", "RunConfig", "compare_2d", "convergence_table",
    "format_csv", "inequality_suite", "load_config", "parse_config", "random_smooth_functions",
    "read_csv", "run", "run_checks", "validate", "velocity_suite", "write_csv",
]
