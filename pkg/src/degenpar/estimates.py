"""Discrete audit of the Hamilton-type gradient estimates.

With g = G(u), g' = F'(u) and g'' = F''(u) u, the Harnack quantity
w = |∇g|^2 / (α - g)^2 satisfies

    g' Δw - w_t >= L w^2 - 2 g' k w - L1 ∇g·∇w,
    f  = 2 g' / (α - g),   b = g'' / g',
    L  = (α - g)(2(1 + b) - (n - 1) b^2 / f),
    L1 = 2 - f + b.

Gradients of g are taken by the chain rule, ∇g = (F'(u)/u) ∇_h u, so
algebraic identities between g and u hold to rounding error.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConditionViolation, ParameterError, PinchViolation, WindowError
from .nonlinearity import (
    ValueRange,
    condition_report,
    fde_gamma,
    pme_alpha,
    pme_pinch,
)


@dataclass(frozen=True)
class HarnackFields:
    g: np.ndarray
    gprime: np.ndarray
    gsecond: np.ndarray
    grad_u: np.ndarray
    grad_g: np.ndarray
    w: np.ndarray
    f: np.ndarray
    b: np.ndarray
    L: np.ndarray
    L1_signed: np.ndarray
    alpha: float
    timestamp: float


def harnack_fields(u, nl, alpha, n=None):
    """All coefficient fields of the w-inequality for one snapshot ``u`` (a Field)."""
    geom = u.geometry
    n = geom.n if n is None else n
    vals = u.values
    g = nl.G(vals)
    gap = alpha - g
    if np.any(~(gap > 0)):
        i = int(np.argmin(gap))
        raise ConditionViolation(
            f"alpha - G(u) = {gap[i]:.6g} <= 0 at node {i} (r={geom.r[i]:.6g})",
            condition="B",
            details={"node": i, "r": float(geom.r[i]), "gap": float(gap[i])},
        )
    gprime = nl.dF(vals)
    gsecond = nl.d2F(vals) * vals
    grad_u = geom.gradient(vals)
    grad_g = gprime / vals * grad_u
    w = grad_g**2 / gap**2
    f = 2 * gprime / gap
    b = nl.elasticity(vals)
    curv = np.where(b == 0, 0.0, (n - 1) * b**2 / f)
    L = gap * (2 * (1 + b) - curv)
    L1 = 2 - f + b
    return HarnackFields(g, gprime, gsecond, grad_u, grad_g, w, f, b, L, L1, float(alpha), u.timestamp)


def _interior(geom):
    return slice(None) if geom.periodic else slice(1, -1)


@dataclass(frozen=True)
class IdentityDefects:
    g_identity: float
    phi_identity: float

    @property
    def max(self):
        return max(self.g_identity, self.phi_identity)


def identity_check_g(traj, nl=None):
    """Defects of g_t = g'Δg + |∇g|^2 and φ_t = ΔG(u) + ∇G(u)·∇φ (φ = ln u)."""
    if len(traj) < 3:
        raise WindowError("identity check needs at least 3 snapshots")
    nl = nl or traj.nonlinearity
    geom = traj.geometry
    inner = _interior(geom)
    g_all = nl.G(traj.values)
    phi_all = np.log(traj.values)
    d1 = d2 = 0.0
    for k in range(1, len(traj) - 1):
        span = traj.times[k + 1] - traj.times[k - 1]
        u = traj.values[k]
        g = g_all[k]
        g_t = (g_all[k + 1] - g_all[k - 1]) / span
        lap_g = geom.laplacian(g)
        grad_g = geom.gradient(g)
        e1 = g_t - (nl.dF(u) * lap_g + grad_g**2)
        phi_t = (phi_all[k + 1] - phi_all[k - 1]) / span
        e2 = phi_t - (lap_g + grad_g * geom.gradient(phi_all[k]))
        d1 = max(d1, float(np.abs(e1[inner]).max()))
        d2 = max(d2, float(np.abs(e2[inner]).max()))
    return IdentityDefects(d1, d2)


@dataclass(frozen=True)
class InequalityResidualReport:
    min_residual: float
    node: int
    r: float
    time: float
    scale: float
    h: float
    dt: float

    @property
    def normalized_min(self):
        return self.min_residual / self.scale if self.scale > 0 else 0.0

    @property
    def tolerance(self):
        return 10 * self.scale * (self.h**2 + self.dt)

    @property
    def passed(self):
        return self.min_residual >= -self.tolerance

    def as_dict(self):
        d = asdict(self)
        d.update(normalized_min=self.normalized_min, tolerance=self.tolerance, passed=self.passed)
        return d


def _require_conditions(report):
    failed = [
        name
        for name, ok in (("A", report.satisfied_A), ("B", report.satisfied_B), ("C (Eq-2.10 form)", report.satisfied_C_2_10))
        if not ok
    ]
    if failed:
        raise ConditionViolation(
            f"condition(s) {', '.join(failed)} fail on value range [{report.m:.6g}, {report.M:.6g}]",
            condition=failed[0],
            details=report.as_dict(),
        )


def inequality_residual(traj, nl, alpha, k=None, n=None):
    """Minimum over interior nodes (two in from each end) and snapshots of

    g'Δ_h w - ∂_t w - L w^2 + 2 g' k w + L1 ∇g·∇w.

    The first and last snapshots only feed the centered time difference.
    """
    geom = traj.geometry
    n = geom.n if n is None else n
    k = geom.ricci_k if k is None else k
    if len(traj) < 3:
        raise WindowError("inequality residual needs at least 3 snapshots")
    _require_conditions(condition_report(nl, ValueRange.of(traj.values), alpha, n))
    # w at the end nodes uses one-sided gradients; Δ_h w would amplify that O(h^2) error by 1/h^2
    inner = slice(None) if geom.periodic else slice(2, -2)
    fields = [harnack_fields(traj.field(j), nl, alpha, n) for j in range(len(traj))]
    best = (np.inf, 0, 0.0)
    scale = 0.0
    for j in range(1, len(traj) - 1):
        hf = fields[j]
        w_t = (fields[j + 1].w - fields[j - 1].w) / (traj.times[j + 1] - traj.times[j - 1])
        lap_w = geom.laplacian(hf.w)
        grad_w = geom.gradient(hf.w)
        lw2 = hf.L * hf.w**2
        res = hf.gprime * lap_w - w_t - lw2 + 2 * hf.gprime * k * hf.w + hf.L1_signed * hf.grad_g * grad_w
        res_in = res[inner]
        i = int(np.argmin(res_in))
        if res_in[i] < best[0]:
            offset = 0 if geom.periodic else 2
            best = (float(res_in[i]), i + offset, float(traj.times[j]))
        scale = max(scale, float(np.abs(lw2[inner]).max()))
    dt = float(np.max(np.diff(traj.times)))
    node = best[1]
    return InequalityResidualReport(best[0], node, float(geom.r[node]), best[2], scale, geom.h, dt)


# -- localized bound ratios ------------------------------------------------


@dataclass(frozen=True)
class Window:
    x0: float
    t0: float
    R: float
    T: float

    def __post_init__(self):
        if not (self.R > 0 and self.T > 0):
            raise WindowError(f"window needs R > 0 and T > 0, got R={self.R}, T={self.T}")


@dataclass(frozen=True)
class EstimateReport:
    theorem: str
    window: Window
    M_window: float
    m_window: float
    lhs_sup: float
    rhs: float
    rhs_terms: dict
    argmax_r: float
    argmax_t: float
    extras: dict = field(default_factory=dict)
    detail_r: tuple = ()
    detail_lhs: tuple = ()

    @property
    def ratio(self):
        return self.lhs_sup / self.rhs

    def as_dict(self, detail=False):
        d = {
            "theorem": self.theorem,
            "window": asdict(self.window),
            "M_window": self.M_window,
            "m_window": self.m_window,
            "lhs_sup": self.lhs_sup,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "rhs_terms": dict(self.rhs_terms),
            "argmax": {"r": self.argmax_r, "t": self.argmax_t},
            "extras": dict(self.extras),
        }
        if detail:
            d["detail"] = {"r": list(self.detail_r), "lhs": list(self.detail_lhs)}
        return d

    def detail_csv(self):
        lines = ["r,lhs"]
        lines += [f"{r:.17g},{v:.17g}" for r, v in zip(self.detail_r, self.detail_lhs)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class _Cube:
    full_nodes: np.ndarray
    full_snaps: np.ndarray
    half_nodes: np.ndarray
    half_snaps: np.ndarray
    M: float
    m: float


def _cube(traj, window):
    geom = traj.geometry
    times = traj.times
    slack = 1e-9 * max(1.0, abs(window.t0))
    if window.t0 - window.T < times[0] - slack or window.t0 > times[-1] + slack:
        raise WindowError(
            f"time window [{window.t0 - window.T:.6g}, {window.t0:.6g}] not inside "
            f"trajectory span [{times[0]:.6g}, {times[-1]:.6g}]"
        )
    x0 = geom.node_index(window.x0)
    if not geom.ball_inside(x0, window.R):
        raise WindowError(
            f"ball of radius {window.R} around r={geom.r[x0]:.6g} leaves [{geom.r_lo}, {geom.r_hi}]"
        )
    full_nodes = geom.geodesic_ball(x0, window.R)
    half_nodes = geom.geodesic_ball(x0, window.R / 2)
    full_snaps = np.nonzero((times >= window.t0 - window.T - slack) & (times <= window.t0 + slack))[0]
    half_snaps = np.nonzero((times >= window.t0 - window.T / 2 - slack) & (times <= window.t0 + slack))[0]
    if half_snaps.size == 0 or half_nodes.size == 0:
        raise WindowError("half window contains no grid data")
    block = traj.values[np.ix_(full_snaps, full_nodes)]
    return _Cube(full_nodes, full_snaps, half_nodes, half_snaps, float(block.max()), float(block.min()))


def _sup_half(traj, cube, quantity):
    """Max of quantity(snapshot index) over the half cube, with location and detail row."""
    geom = traj.geometry
    best, where, detail = -np.inf, (0, 0), None
    for j in cube.half_snaps:
        q = quantity(j)[cube.half_nodes]
        i = int(np.argmax(q))
        if q[i] > best:
            best, where, detail = float(q[i]), (int(cube.half_nodes[i]), int(j)), q
    node, snap = where
    return best, float(geom.r[node]), float(traj.times[snap]), detail


def _report(theorem, traj, window, cube, quantity, terms, extras=None):
    lhs, ar, at, detail = _sup_half(traj, cube, quantity)
    rhs = float(sum(terms.values()))
    if not rhs > 0:
        raise ParameterError(f"non-positive right-hand side {rhs}")
    return EstimateReport(
        theorem=theorem,
        window=window,
        M_window=cube.M,
        m_window=cube.m,
        lhs_sup=lhs,
        rhs=rhs,
        rhs_terms={k: float(v) for k, v in terms.items()},
        argmax_r=ar,
        argmax_t=at,
        extras=extras or {},
        detail_r=tuple(float(x) for x in traj.geometry.r[cube.half_nodes]),
        detail_lhs=tuple(float(x) for x in detail),
    )


def _grad_G_ratio(traj, nl, alpha):
    geom = traj.geometry

    def q(j):
        u = traj.values[j]
        grad_G = nl.dF(u) / u * geom.gradient_norm(u)
        return grad_G / (alpha - nl.G(u))

    return q


def bound_ratio_thm11(traj, nl, alpha, window, constants=None):
    """sup |∇G(u)| / (α - G(u)) on Q_{R/2,T/2} against 1/R + 1/√T + √k."""
    cube = _cube(traj, window)
    if constants is None:
        constants = condition_report(nl, ValueRange(cube.m, cube.M), alpha, traj.geometry.n)
    _require_conditions(constants)
    k = traj.geometry.ricci_k
    terms = {"1/R": 1 / window.R, "1/sqrt(T)": 1 / np.sqrt(window.T), "sqrt(k)": np.sqrt(k)}
    return _report("thm1.1", traj, window, cube, _grad_G_ratio(traj, nl, alpha), terms,
                   {"alpha": float(alpha), "conditions": constants.as_dict()})


def bound_ratio_fde(traj, p, n, window):
    """sup |∇u|/u on Q_{R/2,T/2} against 1/R + M^{(1-p)/2}/√T + √k."""
    gamma = fde_gamma(n, p)
    cube = _cube(traj, window)
    geom = traj.geometry
    nl = traj.nonlinearity

    def q(j):
        u = traj.values[j]
        return geom.gradient_norm(u) / u

    defect = 0.0
    for j in cube.half_snaps:
        u = traj.values[j][cube.half_nodes]
        grad_u = geom.gradient_norm(traj.values[j])[cube.half_nodes]
        grad_g = nl.dF(u) / u * grad_u
        lhs_g = grad_g / (-nl.G(u))
        scale = max(1.0, float(np.abs(grad_u / u).max()))
        defect = max(defect, float(np.abs(lhs_g - (1 - p) * grad_u / u).max()) / scale)
    k = geom.ricci_k
    terms = {
        "1/R": 1 / window.R,
        "M^((1-p)/2)/sqrt(T)": cube.M ** ((1 - p) / 2) / np.sqrt(window.T),
        "sqrt(k)": np.sqrt(k),
    }
    return _report("thm1.2", traj, window, cube, q, terms, {"gamma": gamma, "fde_identity_defect": defect})


def bound_ratio_pme_n1(traj, p, delta, window):
    """Porous-medium estimate in one dimension with α = p/(p-1) M^{p-1}(1+δ)."""
    if not p > 1:
        raise ParameterError(f"porous-medium estimate needs p > 1, got {p}")
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if traj.geometry.n != 1:
        raise ParameterError("bound_ratio_pme_n1 needs a one-dimensional geometry")
    cube = _cube(traj, window)
    alpha = pme_alpha(p, cube.M, delta)
    Mp = cube.M ** (p - 1)
    terms = {
        "(1+delta)/(delta R)": (1 + delta) / (delta * window.R),
        "1/sqrt(M^(p-1) delta T)": 1 / np.sqrt(Mp * delta * window.T),
    }
    # L = 2p(α - g) = 2p^2/(p-1) (M^{p-1}(1+δ) - u^{p-1}), positive on the cube
    block = traj.values[np.ix_(cube.full_snaps, cube.full_nodes)]
    L_min = float(np.min(2 * p * (alpha - traj.nonlinearity.G(block))))
    return _report("thm3.3", traj, window, cube, _grad_G_ratio(traj, traj.nonlinearity, alpha), terms,
                   {"alpha": alpha, "delta": delta, "L_min": L_min})


def bound_ratio_pme_n2(traj, p, delta, n, window):
    """Porous-medium estimate for n >= 2; refuses when the pinch condition fails."""
    cube = _cube(traj, window)
    pinch = pme_pinch(n, p, delta, ValueRange(cube.m, cube.M))
    if not pinch.holds:
        raise PinchViolation(
            f"pinch condition fails: (M/m)^(p-1) = {pinch.ratio:.6g} >= threshold {pinch.threshold:.6g}",
            condition="pinch",
            details=pinch.as_dict(),
        )
    g, k = pinch.gamma, traj.geometry.ricci_k
    Mp = cube.M ** (p - 1)
    terms = {
        "(delta+1)/(gamma delta R)": (delta + 1) / (g * delta * window.R),
        "1/sqrt(gamma delta M^(p-1) T)": 1 / np.sqrt(g * delta * Mp * window.T),
        "sqrt(k/delta)": np.sqrt(k / delta),
    }
    return _report("thm3.5", traj, window, cube, _grad_G_ratio(traj, traj.nonlinearity, pinch.alpha), terms,
                   {"pinch": pinch.as_dict(), "delta": delta})


def bound_ratio_heat_sz(traj, window):
    """sup (|∇u|/u)/(1 + ln(M/u)) on Q_{R/2,T/2} against 1/R + 1/√T + √k."""
    if traj.nonlinearity is None or not traj.nonlinearity.is_heat:
        raise ParameterError("bound_ratio_heat_sz needs the heat nonlinearity")
    cube = _cube(traj, window)
    geom = traj.geometry
    M = cube.M

    def q(j):
        u = traj.values[j]
        return geom.gradient_norm(u) / u / (1 + np.log(M / u))

    k = geom.ricci_k
    terms = {"1/R": 1 / window.R, "1/sqrt(T)": 1 / np.sqrt(window.T), "sqrt(k)": np.sqrt(k)}
    return _report("cor3.1", traj, window, cube, q, terms, {"alpha": 1 + float(np.log(M))})


# -- Liouville sweep -------------------------------------------------------


def sweep_schedule(family, R, p):
    """Estimate window (radius, T) for sweep parameter R.

    fde: radius R/2 and T = R^2. This is the ½H(R^{2/(1-p)}) window for the
         spatial growth gauge L(s) = s^{2/(1-p)}, whose inverse gives H(R^{2/(1-p)}) = R.
    pme: radius R and T = R.
    The double cube doubles both.
    """
    if family == "fde":
        return R / 2, R**2
    if family == "pme":
        return float(R), float(R)
    raise ParameterError(f"unknown sweep family {family!r}")


@dataclass(frozen=True)
class SweepRow:
    R: float
    radius: float
    T: float
    M_double: float
    rhs: float
    lhs_at_center: float


@dataclass(frozen=True)
class SweepResult:
    family: str
    rows: tuple

    @property
    def rhs(self):
        return np.array([row.rhs for row in self.rows])

    @property
    def decreasing(self):
        return bool(np.all(np.diff(self.rhs) < 0))

    def to_csv(self):
        flag = int(self.decreasing)
        lines = ["R,M_double,rhs,lhs_at_center,decreasing_flag"]
        for row in self.rows:
            lines.append(f"{row.R:.17g},{row.M_double:.17g},{row.rhs:.17g},{row.lhs_at_center:.17g},{flag}")
        return "\n".join(lines) + "\n"

    def as_dict(self):
        return {"family": self.family, "decreasing": self.decreasing, "rows": [asdict(r) for r in self.rows]}


def liouville_sweep(generator, family, p, x0, t0, R_list, delta=1.0):
    """Evaluate the bound at (x0, t0) with the sup taken over growing double cubes.

    ``generator(radius, T)`` returns a Trajectory covering the double cube
    B(x0, radius) x [t0 - T, t0]. The recorded rhs is the theorem's bound
    without its unknown constant: for ``fde`` 1/ρ + M^{(1-p)/2}/√T; for
    ``pme`` the |∇u|/u bound ((1+δ)/(δR) + 1/√(M^{p-1} δ T)) M^{p-1}.
    """
    rows = []
    for R in R_list:
        radius, T = sweep_schedule(family, R, p)
        traj = generator(2 * radius, 2 * T)
        geom = traj.geometry
        if not (traj.times[0] <= t0 - 2 * T + 1e-9 * max(1, abs(t0)) and traj.times[-1] >= t0 - 1e-9 * max(1, abs(t0))):
            raise WindowError(f"generator window too short in time for R={R}")
        c = geom.node_index(x0)
        if not geom.ball_inside(c, 2 * radius):
            raise WindowError(f"generator window too small in space for R={R}")
        nodes = geom.geodesic_ball(c, 2 * radius)
        M = float(traj.values[:, nodes].max())
        last = int(np.argmin(np.abs(traj.times - t0)))
        u = traj.values[last]
        lhs = float(geom.gradient_norm(u)[c] / u[c])
        if family == "fde":
            rhs = 1 / radius + M ** ((1 - p) / 2) / np.sqrt(T)
        else:
            Mp = M ** (p - 1)
            rhs = ((1 + delta) / (delta * radius) + 1 / np.sqrt(Mp * delta * T)) * Mp
        rows.append(SweepRow(float(R), float(radius), float(T), M, float(rhs), lhs))
    return SweepResult(family, tuple(rows))


def exact_generator(exact, kind, n, x0, t0, points=401, snapshots=21, nl=None):
    """Sample ``exact`` on B(x0, radius) x [t0 - T, t0] for use with liouville_sweep."""
    from .geometry import ModelGeometry
    from .solver import Trajectory

    def make(radius, T):
        geom = ModelGeometry(kind, n, x0 - radius, x0 + radius, points)
        times = np.linspace(t0 - T, t0, snapshots)
        return Trajectory.from_exact(exact, geom, times, nl)

    return make
