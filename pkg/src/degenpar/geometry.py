"""One-dimensional model geometries with known Ricci lower bounds.

Radially symmetric data on a constant-curvature model reduces the
Laplace-Beltrami operator to Δf = (1/s)(s f')' with weight s(r):

    line, circle          1
    radial_euclidean      r^(n-1)
    radial_hyperbolic     sinh(r)^(n-1)     Ric >= -(n-1)
    radial_spherical      sin(r)^(n-1)
"""
import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ShapeError, WindowError

KINDS = ("line", "circle", "radial_euclidean", "radial_hyperbolic", "radial_spherical")


@dataclass(frozen=True)
class ModelGeometry:
    """Uniform grid on [r_lo, r_hi].

    For ``circle`` the interval is one period of length r_hi - r_lo and the
    grid holds ``grid_points`` distinct nodes (the endpoint is not repeated).
    """

    kind: str
    n: int = 1
    r_lo: float = 0.0
    r_hi: float = 1.0
    grid_points: int = 101

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown geometry kind {self.kind!r}")
        if self.grid_points < 5:
            raise ParameterError("need at least 5 grid points")
        if not self.r_hi > self.r_lo:
            raise ParameterError(f"empty domain [{self.r_lo}, {self.r_hi}]")
        if self.kind in ("line", "circle"):
            if self.n != 1:
                raise ParameterError(f"{self.kind} geometry has dimension 1, got n={self.n}")
        else:
            if self.n < 2:
                raise ParameterError("radial models need n >= 2")
            if self.r_lo <= 0:
                raise ParameterError("radial models need r_lo > 0 to avoid the pole")
            if self.kind == "radial_spherical" and self.r_hi >= np.pi:
                raise ParameterError("radial_spherical needs r_hi < pi")

    @property
    def periodic(self):
        return self.kind == "circle"

    @property
    def length(self):
        return self.r_hi - self.r_lo

    @cached_property
    def h(self):
        if self.periodic:
            return self.length / self.grid_points
        return self.length / (self.grid_points - 1)

    @cached_property
    def r(self):
        return self.r_lo + self.h * np.arange(self.grid_points)

    @property
    def ricci_k(self):
        """k in Ric >= -k (zero for flat, 1-d and positively curved models)."""
        return float(self.n - 1) if self.kind == "radial_hyperbolic" else 0.0

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        e = self.n - 1
        if self.kind in ("line", "circle"):
            return np.ones_like(r)
        if self.kind == "radial_euclidean":
            return r**e
        if self.kind == "radial_hyperbolic":
            return np.sinh(r) ** e
        return np.sin(r) ** e

    @cached_property
    def s(self):
        return self.weight(self.r)

    def with_points(self, grid_points):
        return ModelGeometry(self.kind, self.n, self.r_lo, self.r_hi, grid_points)

    # -- operators ---------------------------------------------------------

    def laplacian_matrix(self, bc="dirichlet"):
        """Divergence-form stencil (1/s_i)[s_{i+1/2}(f_{i+1}-f_i) - s_{i-1/2}(f_i-f_{i-1})]/h^2.

        Boundary rows: ``dirichlet`` leaves them zero, ``neumann`` imposes zero
        flux through a half cell. Periodic geometries ignore ``bc``.
        """
        N, h = self.grid_points, self.h
        s = self.s
        s_plus = self.weight(self.r + h / 2)
        s_minus = self.weight(self.r - h / 2)
        lower = s_minus / (s * h * h)
        upper = s_plus / (s * h * h)
        if self.periodic:
            diag = -(lower + upper)
            A = sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(N, N), format="lil")
            A[0, N - 1] = lower[0]
            A[N - 1, 0] = upper[N - 1]
            return A.tocsr()
        lo = lower.copy()
        up = upper.copy()
        if bc == "neumann":
            up[0] = 2 * s_plus[0] / (s[0] * h * h)
            lo[-1] = 2 * s_minus[-1] / (s[-1] * h * h)
            diag = np.empty(N)
            diag[1:-1] = -(lo[1:-1] + up[1:-1])
            diag[0] = -up[0]
            diag[-1] = -lo[-1]
            up[-1] = 0.0
            lo[0] = 0.0
        elif bc == "dirichlet":
            diag = -(lo + up)
            diag[0] = diag[-1] = 0.0
            up[0] = up[-1] = 0.0
            lo[0] = lo[-1] = 0.0
        else:
            raise ParameterError(f"unknown boundary policy {bc!r}")
        return sp.diags([lo[1:], diag, up[:-1]], [-1, 0, 1], shape=(N, N), format="csr")

    @cached_property
    def s_mid(self):
        """Weights at the cell faces r_i + h/2 (N faces on the circle, N-1 otherwise)."""
        r = self.r if self.periodic else self.r[:-1]
        return self.weight(r + self.h / 2)

    def laplacian(self, values, bc="extrapolate"):
        """Apply Δ_h to nodal values in flux form, so constants map to exact zeros.

        ``dirichlet`` zeroes the boundary rows, ``neumann`` uses the half-cell
        zero-flux rows of ``laplacian_matrix``, and ``extrapolate`` (default)
        fills each boundary row by linear extrapolation of the two nearest
        interior rows. Periodic geometries ignore ``bc``.
        """
        values = self._check(values)
        h2 = self.h**2
        if self.periodic:
            flux = self.s_mid * (np.roll(values, -1, axis=-1) - values)
            return (flux - np.roll(flux, 1, axis=-1)) / (self.s * h2)
        if bc not in ("extrapolate", "dirichlet", "neumann"):
            raise ParameterError(f"unknown boundary policy {bc!r}")
        flux = self.s_mid * np.diff(values, axis=-1)
        out = np.zeros_like(values)
        out[..., 1:-1] = (flux[..., 1:] - flux[..., :-1]) / (self.s[1:-1] * h2)
        if bc == "neumann":
            out[..., 0] = 2 * flux[..., 0] / (self.s[0] * h2)
            out[..., -1] = -2 * flux[..., -1] / (self.s[-1] * h2)
        elif bc == "extrapolate":
            out[..., 0] = 2 * out[..., 1] - out[..., 2]
            out[..., -1] = 2 * out[..., -2] - out[..., -3]
        return out

    def gradient(self, values):
        """Signed radial derivative: centered inside, second-order one-sided at ends."""
        values = self._check(values)
        if self.periodic:
            return (np.roll(values, -1) - np.roll(values, 1)) / (2 * self.h)
        return np.gradient(values, self.h, edge_order=2)

    def gradient_norm(self, values):
        return np.abs(self.gradient(values))

    def _check(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.grid_points:
            raise ShapeError(
                f"field has {values.shape[-1]} nodes, geometry has {self.grid_points}"
            )
        return values

    # -- metric ------------------------------------------------------------

    def node_index(self, x):
        """Index of the node nearest to coordinate x."""
        if self.periodic:
            d = self.distance_from(x)
            return int(np.argmin(d))
        if x < self.r_lo - 1e-9 * self.h or x > self.r_hi + 1e-9 * self.h:
            raise WindowError(f"point {x} outside [{self.r_lo}, {self.r_hi}]")
        return int(np.clip(np.rint((x - self.r_lo) / self.h), 0, self.grid_points - 1))

    def distance_from(self, x):
        d = np.abs(self.r - x)
        if self.periodic:
            d = np.minimum(d, self.length - d)
        return d

    def geodesic_ball(self, x0, R):
        """Indices of nodes within distance R of node ``x0`` (an index)."""
        if not R > 0:
            raise WindowError(f"ball radius must be positive, got {R}")
        d = self.distance_from(self.r[x0])
        idx = np.nonzero(d <= R + 1e-9 * self.h)[0]
        if idx.size == 0:
            raise WindowError("empty ball")
        return idx

    def ball_inside(self, x0, R):
        if self.periodic:
            return True
        r0 = self.r[x0]
        slack = 1e-9 * self.h
        return r0 - R >= self.r_lo - slack and r0 + R <= self.r_hi + slack

    def ball_measure(self, x0, R):
        """Riemannian-free length of the ball as a subset of the coordinate line."""
        if self.periodic:
            return min(2 * R, self.length)
        r0 = self.r[x0]
        return min(r0 + R, self.r_hi) - max(r0 - R, self.r_lo)


@dataclass(frozen=True)
class Field:
    geometry: ModelGeometry
    values: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.geometry.grid_points,):
            raise ShapeError(
                f"field length {vals.shape} does not match {self.geometry.grid_points} nodes"
            )
        object.__setattr__(self, "values", vals)

    def laplace_beltrami(self, bc="extrapolate"):
        return Field(self.geometry, self.geometry.laplacian(self.values, bc), self.timestamp)

    def gradient_norm(self):
        return Field(self.geometry, self.geometry.gradient_norm(self.values), self.timestamp)

    def to_csv(self, header="value"):
        buf = io.StringIO()
        buf.write(f"r,{header}\n")
        for r, v in zip(self.geometry.r, self.values):
            buf.write(f"{r:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, geometry, timestamp=0.0):
        rows = list(csv.reader(io.StringIO(text)))
        values = np.array([float(row[1]) for row in rows[1:]])
        r = np.array([float(row[0]) for row in rows[1:]])
        if r.shape != geometry.r.shape or not np.allclose(r, geometry.r, rtol=0, atol=1e-12):
            raise ShapeError("CSV nodes do not match the geometry grid")
        return cls(geometry, values, timestamp)


def laplace_beltrami(f, bc="extrapolate"):
    return f.laplace_beltrami(bc)


def gradient_norm(f):
    return f.gradient_norm()


# -- cutoff ----------------------------------------------------------------


def _smoothstep(y):
    # septic smoothstep: S' = 140 y^3 (1-y)^3, so 1 - S vanishes to fourth order at y = 1
    y = np.clip(y, 0.0, 1.0)
    return y**4 * (35 - 84 * y + 70 * y**2 - 20 * y**3)


def _smoothstep_d1(y):
    inside = (y > 0) & (y < 1)
    return np.where(inside, 140 * y**3 * (1 - y) ** 3, 0.0)


def _smoothstep_d2(y):
    inside = (y > 0) & (y < 1)
    return np.where(inside, 420 * y**2 * (1 - y) ** 2 * (1 - 2 * y), 0.0)


def bump(x):
    """1 on [0, 1/2], 0 on [1, inf), C^3 and nonincreasing in between."""
    x = np.asarray(x, dtype=float)
    return 1.0 - _smoothstep(2 * x - 1)


def bump_d1(x):
    return -2 * _smoothstep_d1(2 * np.asarray(x, dtype=float) - 1)


def bump_d2(x):
    return -4 * _smoothstep_d2(2 * np.asarray(x, dtype=float) - 1)


@dataclass(frozen=True)
class CutoffField:
    """Ψ sampled on grid nodes (columns) and times (rows) with its derivatives."""

    times: np.ndarray
    values: np.ndarray
    d_r: np.ndarray
    d_rr: np.ndarray
    d_t: np.ndarray
    C_r: float
    C_rr: float
    C_t: float
    R: float
    T: float

    def as_dict(self):
        return {"C_r": self.C_r, "C_rr": self.C_rr, "C_t": self.C_t, "R": self.R, "T": self.T}


def cutoff_psi(geom, x0, R, t0, T, times, a=0.5):
    """Space-time cutoff Ψ = χ(d(r, r_x0)/R) η((t0 - t)/T).

    Reported constants (for exponent ``a``, default 1/2):
    C_r  = R   max |∂_r Ψ| / Ψ^a,
    C_rr = R^2 max |∂_r^2 Ψ| / Ψ^a,
    C_t  = T^2 max |∂_t Ψ|^2 / Ψ,
    each taken over nodes where Ψ > 0.
    """
    if not (R > 0 and T > 0):
        raise WindowError(f"cutoff needs R > 0 and T > 0, got R={R}, T={T}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    slack = 1e-12 * max(1.0, abs(t0))
    if t0 > times.max() + slack or t0 - T < times.min() - slack:
        raise WindowError(
            f"time window [{t0 - T}, {t0}] exceeds data range [{times.min()}, {times.max()}]"
        )
    d = geom.distance_from(geom.r[x0])
    sign = np.sign(geom.r - geom.r[x0])
    if geom.periodic:
        sign = np.where(np.abs(geom.r - geom.r[x0]) <= geom.length / 2, sign, -sign)
    chi = bump(d / R)
    chi_1 = bump_d1(d / R) / R * sign
    chi_2 = bump_d2(d / R) / R**2
    y = (t0 - times) / T
    eta = bump(y)[:, None]
    eta_t = (-bump_d1(y) / T)[:, None]
    values = eta * chi[None, :]
    d_r = eta * chi_1[None, :]
    d_rr = eta * chi_2[None, :]
    d_t = eta_t * chi[None, :]
    pos = values > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        C_r = R * np.max(np.abs(d_r[pos]) / values[pos] ** a, initial=0.0)
        C_rr = R**2 * np.max(np.abs(d_rr[pos]) / values[pos] ** a, initial=0.0)
        C_t = T**2 * np.max(d_t[pos] ** 2 / values[pos], initial=0.0)
    return CutoffField(times, values, d_r, d_rr, d_t, float(C_r), float(C_rr), float(C_t), R, T)
