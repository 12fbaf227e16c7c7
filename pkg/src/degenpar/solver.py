"""Backward-Euler solver for u_t = Δ F(u) with damped Newton iterations.

Each step solves u+ - dt Δ_h F(u+) = u. The Jacobian I - dt Δ_h diag(F'(u+))
is tridiagonal; the circle's cyclic corners are handled by Sherman-Morrison.
"""
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .errors import ParameterError, PositivityError, StepFailure, WindowError
from .geometry import Field, ModelGeometry

log = logging.getLogger(__name__)

BC_KINDS = ("periodic", "dirichlet_exact", "neumann_zero")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    bc: str = "periodic"
    positivity_floor: float = 1e-12
    stride: int = 1
    max_halvings: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (self.newton_tol > 0 and self.positivity_floor > 0):
            raise ParameterError("tolerances must be positive")
        if self.newton_max_iter < 1 or self.stride < 1:
            raise ParameterError("newton_max_iter and stride must be >= 1")
        if self.bc not in BC_KINDS:
            raise ParameterError(f"unknown boundary condition {self.bc!r}")


@dataclass
class Trajectory:
    """Snapshots u(r, t_k) of a positive solution, one row per time."""

    geometry: ModelGeometry
    nonlinearity: object
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape != (self.times.size, self.geometry.grid_points):
            raise ParameterError(
                f"values shape {self.values.shape} does not match "
                f"{self.times.size} times x {self.geometry.grid_points} nodes"
            )
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def field(self, k):
        return Field(self.geometry, self.values[k], float(self.times[k]))

    @classmethod
    def from_exact(cls, exact, geometry, times, nl=None):
        times = np.asarray(times, dtype=float)
        values = np.array([exact.sample(geometry, t) for t in times])
        nl = nl if nl is not None else exact.nonlinearity()
        return cls(geometry, nl, times, values, {"source": "exact", "exact": asdict(exact)})

    def mass(self):
        """Σ_i s_i u_i per snapshot."""
        return self.values @ self.geometry.s

    def export(self, out_dir, extra=None):
        """Write one ``snap_XXXXX.csv`` (r,u) per snapshot and ``manifest.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        names = []
        for k in range(len(self)):
            name = f"snap_{k:05d}.csv"
            atomic_write(out / name, self.field(k).to_csv(header="u"))
            names.append(name)
        manifest = {
            "geometry": asdict(self.geometry),
            "nonlinearity": self.nonlinearity.label if self.nonlinearity else None,
            "times": [float(t) for t in self.times],
            "files": names,
            "meta": self.meta,
        }
        if extra:
            manifest.update(extra)
        atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
        return out / "manifest.json"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj)}")


def atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _System:
    """Discrete operator pieces reused across steps on one geometry."""

    def __init__(self, geometry, nl, cfg):
        if cfg.bc == "periodic" and not geometry.periodic:
            raise ParameterError("periodic boundary condition needs a circle geometry")
        if geometry.periodic and cfg.bc != "periodic":
            raise ParameterError("circle geometry needs the periodic boundary condition")
        self.geometry = geometry
        self.nl = nl
        self.cfg = cfg
        policy = {"periodic": "dirichlet", "dirichlet_exact": "dirichlet", "neumann_zero": "neumann"}
        self.policy = policy[cfg.bc]
        self.lap = geometry.laplacian_matrix(self.policy)
        N = geometry.grid_points
        self.sub = np.concatenate([[0.0], self.lap.diagonal(-1)])
        self.main = self.lap.diagonal(0)
        self.sup = np.concatenate([self.lap.diagonal(1), [0.0]])
        self.corner_hi = self.lap[0, N - 1] if geometry.periodic else 0.0
        self.corner_lo = self.lap[N - 1, 0] if geometry.periodic else 0.0
        self.dirichlet = cfg.bc == "dirichlet_exact"

    def residual(self, v, u, dt, boundary_values):
        res = v - dt * self.geometry.laplacian(self.nl.F(v), self.policy) - u
        if self.dirichlet:
            res[0] = v[0] - boundary_values[0]
            res[-1] = v[-1] - boundary_values[1]
        return res

    def solve_jacobian(self, v, dt, rhs):
        """Solve (I - dt Δ_h diag(F'(v))) x = rhs."""
        c = self.nl.dF(v)
        N = v.size
        ab = np.zeros((3, N))
        ab[0, 1:] = -dt * self.sup[:-1] * c[1:]
        ab[1] = 1.0 - dt * self.main * c
        ab[2, :-1] = -dt * self.sub[1:] * c[:-1]
        if self.dirichlet:
            ab[1, 0] = ab[1, -1] = 1.0
            ab[0, 1] = 0.0
            ab[2, -2] = 0.0
        if not self.geometry.periodic:
            return solve_banded((1, 1), ab, rhs)
        # cyclic tridiagonal via Sherman-Morrison
        alpha = -dt * self.corner_hi * c[-1]
        beta = -dt * self.corner_lo * c[0]
        gamma = -ab[1, 0]
        ab[1, 0] -= gamma
        ab[1, -1] -= alpha * beta / gamma
        u = np.zeros(N)
        u[0], u[-1] = gamma, beta
        y = solve_banded((1, 1), ab, rhs)
        z = solve_banded((1, 1), ab, u)
        vy = y[0] + alpha / gamma * y[-1]
        vz = z[0] + alpha / gamma * z[-1]
        return y - vy / (1 + vz) * z


def _newton(system, u, dt, boundary_values):
    cfg = system.cfg
    v = u.copy()
    if system.dirichlet:
        v[0], v[-1] = boundary_values
    scale = max(1.0, float(np.abs(u).max()))
    tol = cfg.newton_tol * scale
    res = system.residual(v, u, dt, boundary_values)
    rnorm = float(np.abs(res).max())
    for _ in range(cfg.newton_max_iter):
        if rnorm <= tol:
            return v
        delta = system.solve_jacobian(v, dt, -res)
        lam = 1.0
        positivity_blocked = False
        for _ in range(40):
            trial = v + lam * delta
            if trial.min() > cfg.positivity_floor:
                res_t = system.residual(trial, u, dt, boundary_values)
                rnorm_t = float(np.abs(res_t).max())
                if rnorm_t < rnorm or rnorm_t <= tol:
                    break
                positivity_blocked = False
            else:
                positivity_blocked = True
            lam *= 0.5
        else:
            if positivity_blocked:
                raise PositivityError("damping could not keep the iterate positive", residual=rnorm)
            raise StepFailure("damped Newton made no progress", residual=rnorm)
        v, res, rnorm = trial, res_t, rnorm_t
    if rnorm <= tol:
        return v
    raise StepFailure(
        f"Newton did not converge in {cfg.newton_max_iter} iterations (residual {rnorm:.3e})",
        residual=rnorm,
    )


def _boundary_values(system, boundary, t):
    if not system.dirichlet:
        return None
    if boundary is None:
        raise ParameterError("dirichlet_exact needs a reference solution for boundary data")
    r = system.geometry.r
    return float(boundary(r[0], t)), float(boundary(r[-1], t))


def step(u, nl, cfg, dt=None, boundary=None, system=None):
    """One backward-Euler step from Field ``u``; returns the Field at u.timestamp + dt."""
    dt = cfg.dt if dt is None else dt
    if np.any(u.values <= 0):
        raise PositivityError("step needs a positive field")
    system = system or _System(u.geometry, nl, cfg)
    t_new = u.timestamp + dt
    bv = _boundary_values(system, boundary, t_new)
    return Field(u.geometry, _newton(system, u.values, dt, bv), t_new)


def solve(u0, nl, horizon, cfg, boundary=None):
    """Integrate from ``u0`` over ``horizon``; failed steps are retried with dt halved."""
    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    system = _System(u0.geometry, nl, cfg)
    t_start = u0.timestamp
    nsteps = int(np.ceil(horizon / cfg.dt - 1e-9))
    times = [t_start]
    snaps = [u0.values.copy()]
    v = u0.values.copy()
    if np.any(v <= 0):
        raise PositivityError("initial data must be positive")
    t = t_start
    halvings_used = 0
    for k in range(nsteps):
        t_target = t_start + min((k + 1) * cfg.dt, horizon)
        while t < t_target - 1e-14 * max(1.0, abs(t_target)):
            dt_try = t_target - t
            halvings = 0
            while True:
                try:
                    bv = _boundary_values(system, boundary, t + dt_try)
                    v_new = _newton(system, v, dt_try, bv)
                    break
                except StepFailure as exc:
                    halvings += 1
                    if halvings > cfg.max_halvings:
                        raise
                    log.debug("step at t=%g failed (%s); halving dt", t, exc)
                    dt_try /= 2
            halvings_used = max(halvings_used, halvings)
            v = v_new
            t = t + dt_try if halvings else t_target
        if (k + 1) % cfg.stride == 0 or k == nsteps - 1:
            times.append(t_target)
            snaps.append(v.copy())
    meta = {"source": "solver", "config": asdict(cfg), "max_halvings_used": halvings_used}
    return Trajectory(u0.geometry, nl, np.array(times), np.array(snaps), meta)


def residual(traj):
    """Per-snapshot defect max |(u_{k+1}-u_{k-1})/(t_{k+1}-t_{k-1}) - Δ_h F(u_k)| over interior nodes."""
    if len(traj) < 3:
        raise WindowError("residual needs at least 3 snapshots")
    geom = traj.geometry
    inner = slice(None) if geom.periodic else slice(1, -1)
    out = []
    for k in range(1, len(traj) - 1):
        ut = (traj.values[k + 1] - traj.values[k - 1]) / (traj.times[k + 1] - traj.times[k - 1])
        defect = ut - geom.laplacian(traj.nonlinearity.F(traj.values[k]), "dirichlet")
        out.append(float(np.abs(defect[inner]).max()))
    return np.array(out)


@dataclass(frozen=True)
class ConvergenceResult:
    spatial_order: float
    temporal_order: float
    spatial_errors: tuple
    temporal_errors: tuple
    spatial_h: tuple
    temporal_dt: tuple
    exact: bool

    def as_dict(self):
        return asdict(self)


def _fit_order(x, err):
    x, err = np.asarray(x), np.asarray(err)
    if np.all(err == 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(x), np.log(err), 1)
    return float(slope)


def solution_error(traj, exact):
    """Max over snapshots of the relative L-infinity error against ``exact``."""
    err = 0.0
    for k, t in enumerate(traj.times):
        ref = exact.sample(traj.geometry, t)
        err = max(err, float(np.abs(traj.values[k] - ref).max() / np.abs(ref).max()))
    return err


def convergence_study(exact, geometry_for, resolutions, t_start, horizon, bc, dt_factor=1.0,
                      temporal_points=None, temporal_dts=None, nl=None):
    """Observed orders of the solver against an exact solution.

    Spatial study: for each grid size N in ``resolutions`` run with dt = dt_factor h^2,
    so the total error should scale like h^2. Temporal study: fixed grid of
    ``temporal_points`` nodes, dt from ``temporal_dts``.
    """
    if len(resolutions) < 3:
        raise ParameterError("convergence study needs at least 3 resolutions")
    nl = nl or exact.nonlinearity() or _default_nl()
    boundary = exact if bc == "dirichlet_exact" else None

    def run(geom, dt):
        cfg = SolverConfig(dt=dt, bc=bc, stride=max(1, int(round(horizon / dt))))
        u0 = Field(geom, exact.sample(geom, t_start), t_start)
        return solution_error(solve(u0, nl, horizon, cfg, boundary), exact)

    hs, errs = [], []
    for N in resolutions:
        geom = geometry_for(N)
        hs.append(geom.h)
        errs.append(run(geom, dt_factor * geom.h**2))
    dts, terrs = [], []
    if temporal_dts:
        geom = geometry_for(temporal_points or max(resolutions))
        for dt in temporal_dts:
            dts.append(dt)
            terrs.append(run(geom, dt))
    exact_flag = all(e == 0 for e in errs + terrs)
    return ConvergenceResult(
        spatial_order=_fit_order(hs, errs),
        temporal_order=_fit_order(dts, terrs) if dts else float("nan"),
        spatial_errors=tuple(errs),
        temporal_errors=tuple(terrs),
        spatial_h=tuple(hs),
        temporal_dt=tuple(dts),
        exact=exact_flag,
    )


def _default_nl():
    from .nonlinearity import Nonlinearity

    return Nonlinearity.heat()
