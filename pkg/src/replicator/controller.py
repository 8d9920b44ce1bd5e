"""The optimal replicating control.

With mu(t) = mu_bar + int_0^t R(s)^-1 k_f(s) dw(s) and
mu_bar = R(0)^-1 (Ef - exp(AT) a), the control
u(t) = Gamma(t)^-1 b' exp(A'(T-t)) mu(t) drives x(T) = f at minimal
E int u' Gamma u dt.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .claims import ClaimSpec, claim_mean, kf_second_moment
from .errors import DomainError, InvalidArgumentError
from .gramian import GMatrix, GramianTable, WeightSpec, build_gramian
from .linalg import as_vector, mat_exp
from .quadrature import gauss_legendre, singular_integral
from .system import SystemSpec


class ControlLaw:
    def __init__(self, sys: SystemSpec, weight: WeightSpec, gmat: GMatrix, claim: ClaimSpec,
                 table: GramianTable | None = None, nodes: int = 256):
        T = sys.T
        for name, other in (("weight", weight.T), ("claim", claim.T)):
            if abs(other - T) > 1e-12 * T:
                raise InvalidArgumentError(f"{name} horizon {other} differs from system T={T}")
        if claim.n != sys.n:
            raise InvalidArgumentError(f"claim dimension {claim.n} differs from state dimension {sys.n}")
        if gmat.G.shape != sys.A.shape:
            raise InvalidArgumentError("G must match the state dimension")
        self.sys = sys
        self.weight = weight
        self.gmat = gmat
        self.claim = claim
        self.table = table if table is not None else build_gramian(sys, weight, gmat, nodes)
        if self.table.sys is not sys:
            raise InvalidArgumentError("gramian table was built for a different system")

    @property
    def T(self) -> float:
        return self.sys.T

    @cached_property
    def q(self) -> np.ndarray:
        return self.sys.free_terminal_state()

    @cached_property
    def Ef(self) -> np.ndarray:
        return claim_mean(self.claim)

    @cached_property
    def R0(self) -> np.ndarray:
        return self.table.R(0.0)

    @cached_property
    def R0_inv(self) -> np.ndarray:
        return self.table.R_inv(0.0)


def mu_bar(law: ControlLaw) -> np.ndarray:
    """Initial value of the multiplier martingale, R(0)^-1 (Ef - q)."""
    return law.R0_inv @ (law.Ef - law.q)


def adjoint_psi(law: ControlLaw, t: float, mu_t) -> np.ndarray:
    if not 0 <= t <= law.T:
        raise DomainError("t must lie in [0, T]")
    mu_t = as_vector(mu_t, law.sys.n)
    return mat_exp(law.sys.A.T, law.T - t) @ mu_t


def u_value(law: ControlLaw, t: float, mu_t) -> np.ndarray:
    if not 0 <= t < law.T:
        raise DomainError("the control is evaluated on [0, T); the weight degenerates at T")
    psi = adjoint_psi(law, t, mu_t)
    return (law.gmat.G_inv @ law.sys.b.T @ psi) / float(law.weight(t))


def _second_moment(law, kf_second_moment_fn):
    return kf_second_moment(law.claim) if kf_second_moment_fn is None else kf_second_moment_fn


def optimal_cost_closed_form(law: ControlLaw, kf_second_moment_fn=None) -> float:
    """E int_0^T u' Gamma u dt for the optimal control.

    (Ef - q)' R(0)^-1 (Ef - q) + int_0^T tr(R(t)^-1 E[k_f k_f']) dt, the
    integral taken in time-to-go so the R^-1 blow-up at T stays resolved.
    """
    M = _second_moment(law, kf_second_moment_fn)
    gap = law.Ef - law.q
    head = float(gap @ law.R0_inv @ gap)
    T = law.T

    def integrand(r):
        return np.einsum("...ij,...ji->...", law.table.R_inv_to_go(r), M(T - r))

    bps = [T - b for b in law.weight.breakpoints()]
    return head + float(singular_integral(integrand, T, breakpoints=bps))


def optimal_cost_via_multiplier(law: ControlLaw, kf_second_moment_fn=None) -> float:
    """Same cost computed as int_0^T tr(Q(t) E[mu(t) mu(t)']) dt.

    E[mu mu'](t) = mu_bar mu_bar' + int_0^t R^-1 E[k_f k_f'] R^-1 ds; used as a
    cross-check of the closed form through a different order of integration.
    """
    M = _second_moment(law, kf_second_moment_fn)
    T = law.T
    mb = mu_bar(law)
    bps = [T - b for b in law.weight.breakpoints()]

    def inner(rho):
        Ri = law.table.R_inv_to_go(rho)
        return Ri @ M(T - rho) @ Ri

    total_var = singular_integral(inner, T, breakpoints=bps)

    def outer(r):
        # r holds the nodes of one smooth panel: one singular tail up to its
        # smallest node, then regular panels from there
        r = np.asarray(r, dtype=float)
        r0 = float(np.min(r))
        base = singular_integral(inner, r0, breakpoints=[b for b in bps if b < r0], rtol=1e-13)
        x, w = gauss_legendre(20)
        half = 0.5 * (r.ravel() - r0)
        nodes = (r0 + half)[:, None] + half[:, None] * x[None, :]
        vals = inner(nodes.ravel()).reshape(nodes.shape + (law.sys.n, law.sys.n))
        tails = base + half[:, None, None] * np.einsum("j,pjkl->pkl", w, vals)
        cov = np.outer(mb, mb) + total_var - tails
        out = np.einsum("pij,pji->p", law.table.Q_to_go(r.ravel()), cov)
        return out.reshape(r.shape)

    return float(singular_integral(outer, T, breakpoints=bps, rtol=1e-12))
