"""Backward parabolic equation for Markov claims f = F(y(T)), one space dimension.

    dH/dt + (1/2) beta^2 d2H/dx2 + a dH/dx = 0,   H(x, T) = F(x)

solved by Crank-Nicolson.  Under the martingale measure the drift term is
dropped.  A handful of payoff/diffusion pairs also have closed forms, used
both as references and as an ``analytic`` mode that skips the grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.interpolate
import scipy.linalg

from .errors import ExtrapolationError, GridError, InvalidArgumentError, InvalidDiffusionError

PHYSICAL = "physical"
GIRSANOV_Q = "girsanov-Q"
MEASURES = (PHYSICAL, GIRSANOV_Q)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """dy = a(y, t) dt + beta(y, t) dw with y(0) = y0.

    The affine/constant family (a = drift_const + kappa*y, beta = sigma) is
    what configs describe; arbitrary callables can be passed as ``drift`` and
    ``vol`` when building claims in code.
    """

    y0: float = 0.0
    kappa: float = 0.0
    drift_const: float = 0.0
    sigma: float = 1.0
    delta: float = 1e-3
    drift: object = None
    vol: object = None

    def a(self, x, t):
        if self.drift is not None:
            return np.broadcast_to(np.asarray(self.drift(x, t), dtype=float), np.shape(x))
        return self.drift_const + self.kappa * np.asarray(x, dtype=float)

    def beta(self, x, t):
        if self.vol is not None:
            return np.broadcast_to(np.asarray(self.vol(x, t), dtype=float), np.shape(x))
        return np.full(np.shape(x), float(self.sigma))

    @property
    def driftless(self) -> bool:
        return self.drift is None and self.kappa == 0.0 and self.drift_const == 0.0

    @property
    def constant_vol(self) -> bool:
        return self.vol is None

    def check_ellipticity(self, x, t):
        X, Tt = np.meshgrid(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        b = 0.5 * self.beta(X, Tt) ** 2
        if not np.all(np.isfinite(b)) or np.min(b) < self.delta:
            raise InvalidDiffusionError(
                f"ellipticity floor violated: min beta^2/2 = {np.min(b):.3g} < delta = {self.delta}")

    def params(self) -> dict:
        if self.drift is not None or self.vol is not None:
            raise InvalidArgumentError("diffusions with callable coefficients are not serialisable")
        return {"y0": self.y0, "kappa": self.kappa, "drift_const": self.drift_const,
                "sigma": self.sigma, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class PayoffSpec:
    """Terminal payoff F: ``square`` x^2, ``cosine`` cos x, ``linear`` x, or ``tabulated``."""

    kind: str
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    _spline: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("square", "cosine", "linear", "tabulated"):
            raise InvalidArgumentError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "tabulated":
            x = np.asarray(self.grid, dtype=float)
            y = np.asarray(self.values, dtype=float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 4:
                raise InvalidArgumentError("tabulated payoff needs matching 1-d grid/values, at least 4 points")
            if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
                raise InvalidArgumentError("tabulated payoff has non-finite entries")
            if np.any(np.diff(x) <= 0):
                raise InvalidArgumentError("tabulated payoff grid must be strictly increasing")
            object.__setattr__(self, "grid", x)
            object.__setattr__(self, "values", y)
            object.__setattr__(self, "_spline", scipy.interpolate.CubicSpline(x, y, bc_type="natural"))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            return x * x
        if self.kind == "cosine":
            return np.cos(x)
        if self.kind == "linear":
            return x.copy()
        lo, hi = self.grid[0], self.grid[-1]
        xc = np.clip(x, lo, hi)
        # linear continuation outside the table
        d = self._spline(xc, 1)
        return self._spline(xc) + d * (x - xc)


def load_payoff_csv(path) -> PayoffSpec:
    """Read a two-column CSV (x, F(x)); a non-numeric first row is treated as a header."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidArgumentError(f"{path}:{i + 1}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if i == 0:
                    continue
                raise InvalidArgumentError(f"{path}:{i + 1}: non-numeric entry") from None
    arr = np.array(rows, dtype=float)
    return PayoffSpec("tabulated", arr[:, 0], arr[:, 1])


def analytic_H(payoff: PayoffSpec, diff: DiffusionSpec, T: float, measure: str):
    """Closed-form (H, dH/dx) as callables of (x, t), or None when unavailable."""
    no_drift = diff.driftless or measure == GIRSANOV_Q
    if not diff.constant_vol:
        return None
    s2 = diff.sigma**2
    if payoff.kind == "linear":
        if no_drift:
            return (lambda x, t: np.asarray(x, dtype=float) + 0.0 * np.asarray(t),
                    lambda x, t: np.ones(np.broadcast(np.asarray(x), np.asarray(t)).shape))
        if diff.drift is not None:
            return None
        k, c0 = diff.kappa, diff.drift_const

        def growth(t):
            return np.exp(k * (T - np.asarray(t, dtype=float)))

        def shift(t):
            tau = T - np.asarray(t, dtype=float)
            return c0 * tau if k == 0 else c0 * np.expm1(k * tau) / k

        return (lambda x, t: np.asarray(x) * growth(t) + shift(t),
                lambda x, t: np.broadcast_to(growth(t), np.broadcast(np.asarray(x), np.asarray(t)).shape).copy())
    if not no_drift:
        return None
    if payoff.kind == "square":
        return (lambda x, t: np.asarray(x) ** 2 + s2 * (T - np.asarray(t)),
                lambda x, t: 2.0 * np.asarray(x) + 0.0 * np.asarray(t))
    if payoff.kind == "cosine":
        return (lambda x, t: np.exp(-0.5 * s2 * (T - np.asarray(t))) * np.cos(x),
                lambda x, t: -np.exp(-0.5 * s2 * (T - np.asarray(t))) * np.sin(x))
    return None


class HSolution:
    """H and dH/dx on a space-time grid, or as closed forms (``mode='analytic'``)."""

    def __init__(self, *, mode, measure, T, x=None, t=None, H=None, Hx=None, funcs=None, window=None):
        self.mode = mode
        self.window = window
        self.measure = measure
        self.T = T
        self.x = x
        self.t = t
        self.H = H
        self.Hx = Hx
        self._funcs = funcs

    def _locate(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(x < self.x[0]) or np.any(x > self.x[-1]):
            raise ExtrapolationError(
                f"state outside PDE grid [{self.x[0]:.4g}, {self.x[-1]:.4g}]")
        if np.any(t < self.t[0] - 1e-12) or np.any(t > self.t[-1] + 1e-12):
            raise ExtrapolationError("time outside PDE grid")
        return x, t

    def _interp(self, table, x, t):
        x, t = self._locate(x, t)
        x, t = np.broadcast_arrays(x, t)
        dx = self.x[1] - self.x[0]
        fi = (x - self.x[0]) / dx
        i = np.clip(np.floor(fi).astype(int), 0, self.x.size - 2)
        wx = fi - i
        k = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2)
        wt = np.clip((t - self.t[k]) / (self.t[k + 1] - self.t[k]), 0.0, 1.0)
        lo = table[k, i] * (1 - wx) + table[k, i + 1] * wx
        hi = table[k + 1, i] * (1 - wx) + table[k + 1, i + 1] * wx
        return lo * (1 - wt) + hi * wt

    def value(self, x, t):
        if self._funcs is not None:
            return np.asarray(self._funcs[0](x, t), dtype=float)
        return self._interp(self.H, x, t)

    def grad(self, x, t):
        if self._funcs is not None:
            return np.asarray(self._funcs[1](x, t), dtype=float)
        return self._interp(self.Hx, x, t)

    def in_domain(self, x):
        if self._funcs is not None:
            return np.ones(np.shape(x), dtype=bool)
        return (x >= self.x[0]) & (x <= self.x[-1])


def default_half_width(diff: DiffusionSpec, T: float, n_sd: float = 6.0) -> float:
    """n_sd standard deviations of y(T) plus the largest drift excursion."""
    t = np.linspace(0.0, T, 9)
    sd0 = float(np.max(np.abs(diff.beta(np.full(t.shape, diff.y0), t)))) * np.sqrt(T)
    L = n_sd * sd0
    xs = np.linspace(diff.y0 - L, diff.y0 + L, 41)
    X, Tt = np.meshgrid(xs, t)
    sd = float(np.max(np.abs(diff.beta(X, Tt)))) * np.sqrt(T)
    drift = float(np.max(np.abs(diff.a(X, Tt)))) * T
    return n_sd * sd + drift


def _banded_system(lower, diag, upper, boundary, M):
    """Banded (3, 3) storage for interior tridiagonal rows plus two boundary rows."""
    ab = np.zeros((7, M + 1))
    u = 3
    # interior rows i = 1..M-1: entries (i, i-1), (i, i), (i, i+1)
    i = np.arange(1, M)
    ab[u + 1, i - 1] = lower
    ab[u, i] = diag
    ab[u - 1, i + 1] = upper
    if boundary == "dirichlet":
        ab[u, 0] = 1.0
        ab[u, M] = 1.0
    else:
        # H0 - 3H1 + 3H2 - H3 = 0 and the mirror row at the right end
        for j, c in enumerate((1.0, -3.0, 3.0, -1.0)):
            ab[u - j, j] = c
            ab[u + j, M - j] = c
    return ab


def solve_H(payoff: PayoffSpec, diff: DiffusionSpec, T: float, *, n_x: int = 801, t_grid=None,
            n_t: int = 400, half_width: float | None = None, measure: str = PHYSICAL,
            boundary: str = "dirichlet") -> HSolution:
    """Crank-Nicolson solution of the backward equation on [y0 - L, y0 + L] x [0, T].

    By default the solution is meant to be used on a window of 6 standard
    deviations of y(T) around y0 (``HSolution.window``); the grid extends a
    further 4 standard deviations so the artificial boundary does not reach
    the window.  ``boundary='dirichlet'`` pins H = F at both ends;
    ``'quadratic'`` imposes a vanishing third derivative instead.
    """
    if measure not in MEASURES:
        raise InvalidArgumentError(f"unknown measure {measure!r}")
    if boundary not in ("quadratic", "dirichlet"):
        raise InvalidArgumentError(f"unknown boundary {boundary!r}")
    if n_x < 8:
        raise GridError("need at least 8 space nodes")
    if half_width is None:
        L = default_half_width(diff, T, 10.0)
        Lw = default_half_width(diff, T, 6.0)
    else:
        L = Lw = float(half_width)
    if not L > 0:
        raise GridError("half width must be positive")
    x = np.linspace(diff.y0 - L, diff.y0 + L, n_x)
    t = np.linspace(0.0, T, n_t + 1) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] != 0.0 or abs(t[-1] - T) > 1e-12 * T:
        raise GridError("time grid must increase strictly from 0 to T")
    diff.check_ellipticity(x, t)
    dx = x[1] - x[0]
    M = n_x - 1
    xi = x[1:-1]
    use_drift = measure == PHYSICAL

    def coeffs(tk):
        half_b2 = 0.5 * diff.beta(xi, np.full(xi.shape, tk)) ** 2
        a = diff.a(xi, np.full(xi.shape, tk)) if use_drift else np.zeros_like(xi)
        if np.any(np.abs(a) * dx > 2.0 * half_b2):
            raise GridError("cell Peclet number exceeds 2; refine the space grid")
        lo = half_b2 / dx**2 - a / (2 * dx)
        di = -2.0 * half_b2 / dx**2
        up = half_b2 / dx**2 + a / (2 * dx)
        return lo, di, up

    H = np.empty((t.size, n_x))
    H[-1] = payoff(x)
    F_edges = (H[-1, 0], H[-1, -1])
    c_next = coeffs(t[-1])
    for k in range(t.size - 2, -1, -1):
        dt = t[k + 1] - t[k]
        c_now = coeffs(t[k])
        h = H[k + 1]
        rhs = np.empty(n_x)
        lo, di, up = c_next
        rhs[1:-1] = h[1:-1] + 0.5 * dt * (lo * h[:-2] + di * h[1:-1] + up * h[2:])
        if boundary == "dirichlet":
            rhs[0], rhs[-1] = F_edges
        else:
            rhs[0] = rhs[-1] = 0.0
        lo, di, up = c_now
        ab = _banded_system(-0.5 * dt * lo, 1.0 - 0.5 * dt * di, -0.5 * dt * up, boundary, M)
        H[k] = scipy.linalg.solve_banded((3, 3), ab, rhs, check_finite=False)
        c_next = c_now
    Hx = np.gradient(H, dx, axis=1, edge_order=2)
    return HSolution(mode="finite-difference", measure=measure, T=T, x=x, t=t, H=H, Hx=Hx,
                     window=(diff.y0 - Lw, diff.y0 + Lw))


def analytic_solution(payoff: PayoffSpec, diff: DiffusionSpec, T: float, measure: str) -> HSolution:
    funcs = analytic_H(payoff, diff, T, measure)
    if funcs is None:
        raise InvalidArgumentError(
            f"no closed form for payoff {payoff.kind!r} with this diffusion under {measure}")
    return HSolution(mode="analytic", measure=measure, T=T, funcs=funcs)
