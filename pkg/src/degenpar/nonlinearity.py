"""Nonlinearities F for u_t = Δ F(u), the coupled potential G, and the
admissibility constants of the Hamilton-type gradient estimate.

G is fixed by G'(s) = F'(s)/s with the conventions

    heat         F(s) = s      G(s) = ln s
    power p != 1 F(s) = s^p    G(s) = p/(p-1) s^(p-1)
    custom       tabulated F   G(s) = int_{s_0}^{s} F'(t)/t dt

where s_0 is the first table abscissa.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import AdmissibilityError, InvalidNonlinearity, ParameterError

N_SAMPLES = 4097


@dataclass(frozen=True)
class ValueRange:
    m: float
    M: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.M)):
            raise ParameterError(f"value range must be finite, got [{self.m}, {self.M}]")
        if not 0 < self.m <= self.M:
            raise ParameterError(f"value range requires 0 < m <= M, got [{self.m}, {self.M}]")

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(float(values.min()), float(values.max()))

    def samples(self, count=N_SAMPLES):
        if self.m == self.M:
            return np.array([self.m])
        s = np.geomspace(self.m, self.M, count)
        s[0], s[-1] = self.m, self.M
        return s


@dataclass(frozen=True)
class Nonlinearity:
    """F with evaluators for F, F', F'' and G on s > 0.

    Build instances with :meth:`heat`, :meth:`power` or :meth:`custom`.
    """

    kind: str
    p: float = 1.0
    table: tuple = ()
    _interp: object = field(default=None, repr=False, compare=False)
    _g_spline: object = field(default=None, repr=False, compare=False)

    @classmethod
    def heat(cls):
        return cls("heat")

    @classmethod
    def power(cls, p):
        p = float(p)
        if not (np.isfinite(p) and p > 0):
            raise InvalidNonlinearity(f"power exponent must be positive (F' > 0), got p={p}")
        return cls("power", p=p)

    @classmethod
    def custom(cls, s, F):
        s = np.asarray(s, dtype=float)
        F = np.asarray(F, dtype=float)
        if s.ndim != 1 or s.shape != F.shape or s.size < 3:
            raise InvalidNonlinearity("custom table needs matching 1-d arrays with at least 3 rows")
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise InvalidNonlinearity("custom table abscissae must be positive and strictly increasing")
        if np.any(np.diff(F) <= 0):
            raise InvalidNonlinearity("custom table values must be strictly increasing (F' > 0)")
        interp = PchipInterpolator(s, F)
        # G(s) = int_{s0}^{s} F'(t)/t dt via a dense spline of the integrand
        grid = np.geomspace(s[0], s[-1], N_SAMPLES)
        grid[0], grid[-1] = s[0], s[-1]
        g_spline = CubicSpline(grid, interp(grid, 1) / grid).antiderivative()
        table = (tuple(s.tolist()), tuple(F.tolist()))
        return cls("custom", table=table, _interp=interp, _g_spline=g_spline)

    @property
    def is_heat(self):
        return self.kind == "heat" or (self.kind == "power" and self.p == 1.0)

    @property
    def label(self):
        if self.kind == "power":
            return f"power(p={self.p:g})"
        return self.kind

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0)):
            raise ParameterError("nonlinearity evaluated at non-positive s")
        if self.kind == "custom":
            lo, hi = self.table[0][0], self.table[0][-1]
            if np.any(s < lo * (1 - 1e-12)) or np.any(s > hi * (1 + 1e-12)):
                raise ParameterError(f"s outside custom table range [{lo}, {hi}]")
        return s

    def F(self, s):
        s = self._check(s)
        if self.is_heat:
            return s.copy()
        if self.kind == "power":
            return s**self.p
        return self._interp(s)

    def dF(self, s):
        s = self._check(s)
        if self.is_heat:
            return np.ones_like(s)
        if self.kind == "power":
            return self.p * s ** (self.p - 1)
        return self._interp(s, 1)

    def d2F(self, s):
        s = self._check(s)
        if self.is_heat:
            return np.zeros_like(s)
        if self.kind == "power":
            return self.p * (self.p - 1) * s ** (self.p - 2)
        return self._interp(s, 2)

    def G(self, s):
        s = self._check(s)
        if self.is_heat:
            return np.log(s)
        if self.kind == "power":
            return self.p / (self.p - 1) * s ** (self.p - 1)
        return self._g_spline(s) - self._g_spline(self.table[0][0])

    def elasticity(self, s):
        """s F''(s) / F'(s), the coefficient b of the Harnack computation."""
        s = self._check(s)
        if self.is_heat:
            return np.zeros_like(s)
        if self.kind == "power":
            return np.full_like(s, self.p - 1)
        return s * self.d2F(s) / self.dF(s)


@dataclass(frozen=True)
class ConditionReport:
    """Admissibility constants over a value range [m, M].

    ``gamma_2_10`` is the infimum of 2(1+b) - (n-1) b^2/f, which drives the
    verdict. ``gamma_thm11C`` is the infimum of 2 + b(2 - (n-1) b (α-G)/F'),
    the condition as literally printed; it carries an extra factor 2 on the
    b^2 term and is reported only.
    """

    K: float
    delta: float
    tau_min: float
    gamma_2_10: float
    gamma_thm11C: float
    alpha: float
    n: int
    m: float
    M: float
    satisfied_A: bool
    satisfied_B: bool
    satisfied_C_2_10: bool
    satisfied_C_literal: bool
    f_max: float
    l1_signed_min: float
    l1_signed_max: float
    l1_bound: float

    @property
    def ok(self):
        return self.satisfied_A and self.satisfied_B and self.satisfied_C_2_10

    @property
    def c_mismatch(self):
        return self.satisfied_C_2_10 != self.satisfied_C_literal or not np.isclose(
            self.gamma_2_10, self.gamma_thm11C
        )

    def as_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ok"] = self.ok
        d["c_mismatch"] = bool(self.c_mismatch)
        return d


def _coefficients(nl, s, alpha, n):
    dF = nl.dF(s)
    b = nl.elasticity(s)
    gap = alpha - nl.G(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 2 * dF / gap
        curv = np.where(b == 0, 0.0, (n - 1) * b**2 / f)
        gamma_210 = 2 * (1 + b) - curv
        gamma_lit = 2 + b * (2 - (n - 1) * b * gap / dF)
    return dF, b, gap, f, gamma_210, gamma_lit


def condition_report(nl, value_range, alpha, n):
    """Compute K, δ, τ, γ over the value range for the given α and dimension."""
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    vr = value_range
    s = vr.samples()
    dF, b, gap, f, g210, glit = _coefficients(nl, s, alpha, n)
    if np.any(~(dF > 0)):
        bad = float(s[np.argmin(dF)])
        raise InvalidNonlinearity(f"F' <= 0 at s={bad:.17g}")

    if nl.kind != "custom" and np.all(gap > 0):
        # for presets every coefficient is monotone in s, so extremes sit at m or M
        ends = np.array([vr.m, vr.M])
        dF, b, gap, f, g210, glit = _coefficients(nl, ends, alpha, n)
        tau = abs(nl.p - 1) if nl.kind == "power" and not nl.is_heat else 0.0
    else:
        tau = float(np.max(np.abs(b)))
    l1 = 2 - f + b
    K = float(np.max(dF))
    delta = float(np.min(gap))
    gamma_210 = float(np.min(g210))
    gamma_lit = float(np.min(glit))
    f_max = float(np.max(f))
    return ConditionReport(
        K=K,
        delta=delta,
        tau_min=float(tau),
        gamma_2_10=gamma_210,
        gamma_thm11C=gamma_lit,
        alpha=float(alpha),
        n=int(n),
        m=vr.m,
        M=vr.M,
        satisfied_A=bool(np.isfinite(K)),
        satisfied_B=bool(delta > 0),
        satisfied_C_2_10=bool(gamma_210 > 0),
        satisfied_C_literal=bool(gamma_lit > 0),
        f_max=f_max,
        l1_signed_min=float(np.min(l1)),
        l1_signed_max=float(np.max(l1)),
        l1_bound=float(2 + tau + f_max),
    )


def heat_alpha(M):
    """α = 1 + ln M, which makes δ = 1 on any range with supremum M."""
    return 1.0 + float(np.log(M))


def fde_admissible_range(n):
    """Open interval (1 - 4/(n+3), 1) of fast-diffusion exponents."""
    if int(n) != n or n < 1:
        raise ParameterError(f"dimension must be an integer >= 1, got {n}")
    # (n-1)/(n+3) equals 1 - 4/(n+3) and is exact for n = 3
    return ((n - 1) / (n + 3), 1.0)


def _fde_gamma_formula(n, p):
    return ((n + 3) * p - (n - 1)) / 2


def fde_gamma(n, p):
    lo, hi = fde_admissible_range(n)
    if not p > lo:
        raise AdmissibilityError(
            f"p={p} violates the lower bound p > 1 - 4/(n+3) = {lo:.17g} for n={n}"
        )
    if not p < hi:
        raise AdmissibilityError(f"p={p} violates the upper bound p < 1")
    return _fde_gamma_formula(n, p)


@dataclass(frozen=True)
class PinchResult:
    holds: bool
    gamma: float
    alpha: float
    ratio: float
    threshold: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def pme_pinch(n, p, delta, value_range):
    """Oscillation condition (M/m)^(p-1) < (4p/((n-1)(p-1)) + 1)/(1+δ) for n >= 2."""
    if int(n) != n or n < 2:
        raise ParameterError(f"pinch condition needs dimension n >= 2, got {n}")
    if not p > 1:
        raise ParameterError(f"pinch condition needs p > 1, got {p}")
    dmax = 4 / (n - 1)
    if not 0 < delta <= dmax:
        raise ParameterError(f"delta={delta} outside (0, 4/(n-1)] = (0, {dmax:.17g}]")
    m, M = value_range.m, value_range.M
    ratio = (M / m) ** (p - 1)
    threshold = (4 * p / ((n - 1) * (p - 1)) + 1) / (1 + delta)
    mp, Mp = m ** (p - 1), M ** (p - 1)
    gamma = 2 * p - (n - 1) * (p - 1) / 2 * (Mp * (1 + delta) - mp) / mp
    alpha = p / (p - 1) * Mp * (1 + delta)
    return PinchResult(bool(ratio < threshold), float(gamma), float(alpha), float(ratio), float(threshold))


def pme_alpha(p, M, delta):
    return p / (p - 1) * M ** (p - 1) * (1 + delta)
