"""Degenerating weight g(t), the kernel Q(t) and the Gramian R(s) = int_s^T Q(t) dt.

The weight vanishes like (T - t)**alpha with alpha in (0.5, 1), so Q blows up at
T like (T - t)**-alpha.  All quadrature is done in the variable
v = (T - t)**(1 - alpha), in which the pure-power integrand is constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidArgumentError
from .linalg import as_square, frobenius, mat_exp, spd_inverse, spd_inverse_batch
from .quadrature import gauss_legendre, singular_integral
from .system import SystemSpec

PURE_POWER = "pure-power"
PLATEAU = "plateau"


@dataclass(frozen=True)
class WeightSpec:
    """Scalar weight g on [0, T).

    ``pure-power``: g(t) = (T - t)**alpha.
    ``plateau``: g(t) = 1 for t < T - tau and (T - t)**alpha afterwards.
    ``c`` is the constant of the two-sided growth condition
    0 < g <= c (T-t)**alpha, 1/g <= c (1 + (T-t)**-alpha), checked on a grid.
    """

    form: str
    alpha: float
    T: float
    c: float = 1.0
    tau: float | None = None
    checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if not self.checked:
            return
        problems = weight_violations(self.form, self.alpha, self.T, self.c, self.tau)
        if problems:
            raise InvalidArgumentError("; ".join(problems))

    @classmethod
    def unchecked(cls, form, alpha, T, c=1.0, tau=None) -> "WeightSpec":
        """Bypass validation; only for negative tests (e.g. alpha <= 0.5)."""
        return cls(form, alpha, T, c, tau, checked=False)

    @property
    def exponent(self) -> float:
        """Power p in t = T - v**p."""
        return 1.0 / (1.0 - self.alpha)

    def _g_of_r(self, r):
        r = np.asarray(r, dtype=float)
        g = r**self.alpha
        if self.form == PLATEAU:
            g = np.where(r > self.tau, 1.0, g)
        return g

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.T) or np.any(t < 0):
            raise DomainError("weight is defined on [0, T)")
        return self._g_of_r(self.T - t)

    def inverse(self, t):
        return 1.0 / self(t)

    def density_in_v(self, v):
        """(1/g) dt/dv for t = T - v**p, finite at v = 0."""
        v = np.asarray(v, dtype=float)
        p = self.exponent
        if self.form == PURE_POWER:
            return np.full(v.shape, p)
        r = v**p
        return np.where(r > self.tau, p * v ** (p - 1.0), p)

    def v_of_t(self, t):
        return np.maximum(self.T - np.asarray(t, dtype=float), 0.0) ** (1.0 - self.alpha)

    def breakpoints(self):
        """Times where g is not smooth, inside (0, T)."""
        if self.form == PLATEAU:
            return (self.T - self.tau,)
        return ()

    def inverse_integral(self, s0, s1):
        """Exact value of int_{s0}^{s1} 1/g(t) dt, vectorised over arrays."""
        return self.inverse_integral_to_go(self.T - np.asarray(s0, dtype=float),
                                           self.T - np.asarray(s1, dtype=float))

    def inverse_integral_to_go(self, r0, r1):
        """Same integral with both ends given as time-to-go, r0 >= r1."""
        r0 = np.asarray(r0, dtype=float)
        r1 = np.asarray(r1, dtype=float)
        k = 1.0 - self.alpha

        def prim(r):
            # antiderivative in r of 1/g(T - r), increasing in r
            if self.form == PURE_POWER:
                return r**k / k
            return np.where(r > self.tau, self.tau**k / k + (r - self.tau), r**k / k)

        return prim(r0) - prim(r1)


def weight_violations(form, alpha, T, c, tau) -> list[str]:
    out = []
    if form not in (PURE_POWER, PLATEAU):
        out.append(f"unknown weight form {form!r}")
        return out
    if not (T > 0):
        out.append("T must be positive")
        return out
    if not (0.5 < alpha < 1.0):
        out.append(f"alpha={alpha} violates the weight condition alpha in (0.5, 1)")
        return out
    if form == PLATEAU and (tau is None or not 0 < tau < T):
        out.append("plateau weight needs 0 < tau < T")
        return out
    if not c > 0:
        out.append("weight constant c must be positive")
        return out
    r = np.unique(np.concatenate([np.geomspace(T * 1e-10, T, 5000), np.linspace(T / 5000, T, 5000)]))
    g = WeightSpec.unchecked(form, alpha, T, c, tau)._g_of_r(r)
    slack = 1e-12
    if np.any(g <= 0) or np.any(g > c * r**alpha * (1 + slack)):
        out.append(f"g(t) <= c (T-t)^alpha fails for c={c}")
    if np.any(1.0 / g > c * (1.0 + r**-alpha) * (1 + slack)):
        out.append(f"1/g(t) <= c (1 + (T-t)^-alpha) fails for c={c}")
    return out


@dataclass(frozen=True, eq=False)
class GMatrix:
    G: np.ndarray
    G_inv: np.ndarray = field(init=False)

    def __post_init__(self):
        G = as_square(self.G)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "G_inv", spd_inverse(G))


def q_kernel(sys: SystemSpec, w: WeightSpec, g: GMatrix, t):
    """Q(t) = exp(A(T-t)) b Gamma(t)^-1 b' exp(A'(T-t)); vectorised over t."""
    t = np.asarray(t, dtype=float)
    E = mat_exp(sys.A, sys.T - t)
    core = sys.b @ g.G_inv @ sys.b.T
    return (E @ core @ np.swapaxes(E, -1, -2)) * w.inverse(t)[..., None, None]


class GramianTable:
    """R(s) on a grid uniform in v = (T - s)**(1 - alpha), hence clustered at T.

    Off-grid values are completed with one Gauss-Legendre panel from the
    nearest node closer to T, so the table is exact to quadrature accuracy
    everywhere.  When A = 0 and the weight is pure-power the closed form
    R(s) = b G^-1 b' (T-s)**(1-alpha) / (1-alpha) is used instead.
    """

    PANEL_ORDER = 16

    def __init__(self, sys: SystemSpec, weight: WeightSpec, gmat: GMatrix, nodes: int = 256):
        if nodes < 64:
            raise InvalidArgumentError("gramian table needs at least 64 nodes")
        if abs(sys.T - weight.T) > 1e-12 * sys.T:
            raise InvalidArgumentError("system and weight must share T")
        self.sys = sys
        self.weight = weight
        self.gmat = gmat
        self.alpha = weight.alpha
        self.T = sys.T
        self._core = sys.b @ gmat.G_inv @ sys.b.T
        self.interpolation = "analytic" if (weight.form == PURE_POWER and not np.any(sys.A)) else "panel"

        vmax = self.T ** (1.0 - self.alpha)
        v = np.linspace(0.0, vmax, nodes + 1)
        extra = [weight.v_of_t(b) for b in weight.breakpoints()]
        v = np.unique(np.concatenate([v, np.asarray(extra, dtype=float)]))
        self._v = v
        n = sys.n
        Rv = np.zeros((v.size, n, n))
        if self.interpolation == "analytic":
            Rv = self._analytic(v)
        else:
            inc = self._panels(v[:-1], v[1:])
            Rv[1:] = np.cumsum(inc, axis=0)
        Rv = 0.5 * (Rv + np.swapaxes(Rv, -1, -2))
        # public grid is in increasing time order
        self.grid = np.maximum(self.T - v[::-1] ** weight.exponent, 0.0)
        self.grid[0] = 0.0 if abs(self.grid[0]) < 1e-14 * self.T else self.grid[0]
        self.grid[-1] = self.T
        self.R_values = Rv[::-1].copy()
        self._Rv = Rv

    def _analytic(self, v):
        return self.weight.exponent * v[:, None, None] * self._core

    def _integrand_v(self, v):
        r = v**self.weight.exponent
        E = mat_exp(self.sys.A, r)
        K = E @ self._core @ np.swapaxes(E, -1, -2)
        return K * self.weight.density_in_v(v)[..., None, None]

    def _panels(self, lo, hi):
        x, wts = gauss_legendre(self.PANEL_ORDER)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * x[None, :]
        vals = self._integrand_v(nodes)
        return np.einsum("k,qkij->qij", wts, vals) * half[:, None, None]

    def R(self, s):
        """Gramian R(s) for scalar or array ``s`` in [0, T]."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.T):
            raise DomainError("R(s) is defined for s in [0, T]")
        return self.R_to_go(self.T - s)

    def R_to_go(self, r):
        """R evaluated at time-to-go ``r`` = T - s; keeps precision as s -> T."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.T * (1 + 1e-14)):
            raise DomainError("time-to-go must lie in [0, T]")
        v = (r ** (1.0 - self.alpha)).reshape(-1)
        if self.interpolation == "analytic":
            out = self._analytic(v)
        else:
            j = np.clip(np.searchsorted(self._v, v, side="right") - 1, 0, self._v.size - 1)
            out = self._Rv[j] + self._panels(self._v[j], v)
            out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out.reshape(r.shape + out.shape[-2:])

    def R_inv(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.T):
            raise DomainError("R(T) = 0 is singular; R^-1 needs t < T")
        return self.R_inv_to_go(self.T - t)

    def R_inv_to_go(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("R(T) = 0 is singular; R^-1 needs t < T")
        Rs = self.R_to_go(r).reshape((-1,) + self._core.shape)
        if Rs.shape[-1] == 1:
            inv = 1.0 / Rs
        else:
            inv = spd_inverse_batch(Rs)
        return inv.reshape(r.shape + self._core.shape)

    def Q(self, t):
        return q_kernel(self.sys, self.weight, self.gmat, t)

    def Q_to_go(self, r):
        r = np.asarray(r, dtype=float)
        E = mat_exp(self.sys.A, r)
        K = E @ self._core @ np.swapaxes(E, -1, -2)
        return K / self.weight._g_of_r(r)[..., None, None]


def build_gramian(sys: SystemSpec, weight: WeightSpec, gmat: GMatrix, nodes: int = 256) -> GramianTable:
    return GramianTable(sys, weight, gmat, nodes)


def gramian_inverse(table: GramianTable, t: float) -> np.ndarray:
    return table.R_inv(t)


def lemma1_diagnostic(table: GramianTable, tau: float) -> dict:
    """Integrability check for |R(t)^-1|^2 on [tau, T].

    Returns the integral and the smallest C with
    |R(t)^-1| <= C (1 - alpha) (T - t)**-(1 - alpha) on a dense grid.
    """
    T = table.T
    if not 0 < tau < T:
        raise DomainError("need 0 < tau < T")

    def sq_norm(r):
        inv = table.R_inv_to_go(r)
        return np.sum(inv**2, axis=(-2, -1))

    bps = [T - b for b in table.weight.breakpoints() if tau < b < T]
    value = float(singular_integral(sq_norm, T - tau, breakpoints=bps))

    k = 1.0 - table.alpha
    r = np.unique(np.concatenate([np.geomspace(T * 1e-9, T, 400), np.linspace(T / 400, T, 400)]))
    norms = np.array([frobenius(M) for M in table.R_inv_to_go(r)])
    C = float(np.max(norms * r**k / k))
    return {"integral_value": value, "bound_constant": C}


def loewner_gaps(table: GramianTable) -> np.ndarray:
    """Smallest eigenvalue of R(s_j) - R(s_{j+1}) for consecutive table nodes."""
    d = table.R_values[:-1] - table.R_values[1:]
    return np.linalg.eigvalsh(0.5 * (d + np.swapaxes(d, -1, -2)))[:, 0]

