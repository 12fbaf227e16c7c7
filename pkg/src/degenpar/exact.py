"""Closed-form positive solutions used as oracles.

None of these formulas is trusted on sight: ``solver.residual`` certifies
each one at second order before tests rely on it.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .nonlinearity import Nonlinearity

EXACT_KINDS = ("constant", "heat_mode", "fde_barenblatt", "pme_quadratic_pressure")


@dataclass(frozen=True)
class ExactSolution:
    """u(r, t) for one of four families.

    constant                u = c
    heat_mode               u = A + B exp(-mu^2 t) cos(mu r), A > |B|, on line or circle
    fde_barenblatt          u = t^(-n beta) (C + kappa r^2 t^(-2 beta))^(-1/(1-p)),
                            beta = 1/(n(p-1)+2), kappa = (1-p) beta / (2p)
    pme_quadratic_pressure  u = ((p-1) v / p)^(1/(p-1)) with pressure
                            v = r^2 / ((2n(p-1)+4)(T_blow-t)) + offset (T_blow-t)^(-e),
                            e = 2n(p-1)/(2n(p-1)+4)

    For n = 1 and offset = 0 the last family is v = r^2/(2(p+1)(T_blow-t)).
    A positive offset keeps u positive at r = 0 for every t < T_blow.
    """

    kind: str
    c: float = 1.0
    A: float = 2.0
    B: float = 1.0
    mu: float = 1.0
    p: float = 0.5
    n: int = 1
    C: float = 1.0
    T_blow: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in EXACT_KINDS:
            raise ParameterError(f"unknown exact solution kind {self.kind!r}")
        if self.kind == "constant" and not self.c > 0:
            raise ParameterError("constant solution must be positive")
        if self.kind == "heat_mode" and not self.A > abs(self.B):
            raise ParameterError("heat_mode needs A > |B| for positivity")
        if self.kind == "fde_barenblatt":
            if not 0 < self.p < 1:
                raise ParameterError("fde_barenblatt needs 0 < p < 1")
            if not self.n * (self.p - 1) + 2 > 0:
                raise ParameterError("fde_barenblatt needs n(p-1) + 2 > 0")
            if not self.C > 0:
                raise ParameterError("fde_barenblatt needs C > 0")
        if self.kind == "pme_quadratic_pressure":
            if not self.p > 1:
                raise ParameterError("pme_quadratic_pressure needs p > 1")
            if self.offset < 0:
                raise ParameterError("pressure offset must be nonnegative")

    def nonlinearity(self):
        if self.kind == "heat_mode":
            return Nonlinearity.heat()
        if self.kind in ("fde_barenblatt", "pme_quadratic_pressure"):
            return Nonlinearity.power(self.p)
        return None

    @property
    def beta(self):
        return 1.0 / (self.n * (self.p - 1) + 2)

    @property
    def kappa(self):
        return (1 - self.p) * self.beta / (2 * self.p)

    def __call__(self, r, t):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(r, t).shape, float(self.c))
        if self.kind == "heat_mode":
            return self.A + self.B * np.exp(-self.mu**2 * t) * np.cos(self.mu * r)
        if self.kind == "fde_barenblatt":
            if np.any(np.asarray(t) <= 0):
                raise ParameterError("Barenblatt solution is defined for t > 0 only")
            b = self.beta
            core = self.C + self.kappa * r**2 * t ** (-2 * b)
            return t ** (-self.n * b) * core ** (-1 / (1 - self.p))
        return self._pme(r, t)

    def _pme(self, r, t):
        tau = self.T_blow - np.asarray(t, dtype=float)
        if np.any(tau <= 0):
            raise ParameterError("quadratic-pressure solution needs t < T_blow")
        q = 2 * self.n * (self.p - 1) + 4
        v = r**2 / (q * tau) + self.offset * tau ** (-2 * self.n * (self.p - 1) / q)
        return ((self.p - 1) * v / self.p) ** (1 / (self.p - 1))

    def sample(self, geometry, t):
        return self(geometry.r, t)
