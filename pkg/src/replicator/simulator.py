"""Monte Carlo simulation of the optimally controlled plant.

The plant is advanced with the exact Gramian increment

    x_{k+1} = exp(A dt_k) x_k + exp(-A (T - t_{k+1})) (R(t_k) - R(t_{k+1})) mu_k

which integrates exp(A(t_{k+1} - s)) b u(s) ds exactly while mu is frozen at
t_k.  The control itself, which blows up near T, is never sampled pointwise.
Paths draw their normals from per-path Philox streams keyed by
(seed, path index), so results do not depend on how paths are split across
workers.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .claims import MARKOV
from .controller import ControlLaw, mu_bar, optimal_cost_closed_form
from .errors import InvalidArgumentError
from .linalg import mat_exp, spd_inverse_batch
from .pde import GIRSANOV_Q

log = logging.getLogger(__name__)

CHUNK = 2048
MAX_ABORT_FRACTION = 1e-3


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int
    gamma: float = 2.0

    def __post_init__(self):
        if self.N < 2:
            raise InvalidArgumentError("grid needs N >= 2 steps")
        if self.gamma < 1:
            raise InvalidArgumentError("gamma < 1 would coarsen the grid near T")
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")

    @cached_property
    def to_go(self) -> np.ndarray:
        """T - t_k, computed directly so that it stays accurate near T."""
        return self.T * (1.0 - np.arange(self.N + 1) / self.N) ** self.gamma

    @cached_property
    def nodes(self) -> np.ndarray:
        t = self.T - self.to_go
        t[0] = 0.0
        t[-1] = self.T
        return t


def build_grid(T: float, N: int, gamma: float = 2.0) -> TimeGrid:
    return TimeGrid(T, N, gamma)


@dataclass
class SimResult:
    terminal_gap: np.ndarray
    gap_sq: float
    cost: float
    f_realized: np.ndarray
    identity_residual: float = 0.0
    abs_control_integral: float = 0.0
    weighted_control_energy: float = 0.0


@dataclass
class McReport:
    n_paths: int
    mean_gap_sq: float
    se_gap: float
    mean_cost: float
    se_cost: float
    closed_form_cost: float
    l1_second_moment: float  # E (int |u| dt)^2
    weighted_energy: float  # E int g |u|^2 dt
    n_aborted: int = 0
    max_identity_residual: float = 0.0
    samples: dict = field(default_factory=dict, repr=False)


class _GridOps:
    """Per-(law, grid) precomputation shared by all paths."""

    def __init__(self, law: ControlLaw, grid: TimeGrid):
        if abs(grid.T - law.T) > 1e-12 * law.T:
            raise InvalidArgumentError("grid and control law horizons differ")
        sys, table = law.sys, law.table
        r = grid.to_go
        self.t = grid.nodes
        self.dt = r[:-1] - r[1:]
        self.R = table.R_to_go(r)
        self.R[-1] = 0.0
        n = sys.n
        if n == 1:
            self.Rinv = 1.0 / self.R[:-1]
        else:
            self.Rinv = spd_inverse_batch(self.R[:-1])
        self.D = self.R[:-1] - self.R[1:]
        self.E_step = mat_exp(sys.A, self.dt)
        self.E_back = mat_exp(sys.A, -r[1:])
        self.ginv_int = law.weight.inverse_integral_to_go(r[:-1], r[1:])
        r_mid = 0.5 * (r[:-1] + r[1:])
        self.V = law.gmat.G_inv @ sys.b.T @ mat_exp(sys.A.T, r_mid)
        self.q = law.q
        self.mu_bar = mu_bar(law)
        self.R0_mu_bar = self.R[0] @ self.mu_bar
        self.N = grid.N


def _path_normals(seed: int, first: int, count: int, N: int, d: int) -> np.ndarray:
    Z = np.empty((count, N, d))
    for j in range(count):
        rng = np.random.Generator(np.random.Philox(key=[seed, first + j]))
        Z[j] = rng.standard_normal((N, d))
    return Z


def _run(law: ControlLaw, ops: _GridOps, Z: np.ndarray, perturbation=None) -> dict:
    """Advance a batch of paths; Z holds standard normals of shape (paths, N, d)."""
    claim = law.claim
    P = Z.shape[0]
    n = law.sys.n
    girsanov = claim.variant == MARKOV and claim.measure == GIRSANOV_Q
    markov = claim.variant == MARKOV
    RinvC = None if markov else ops.Rinv @ claim.coeff
    state = claim.initial_state(P)
    x = np.tile(law.sys.a, (P, 1))
    mu = np.tile(ops.mu_bar, (P, 1))
    cost = np.zeros(P)
    l1 = np.zeros(P)
    energy = np.zeros(P)
    shadow = np.zeros((P, n))
    term_scale = np.zeros(P)
    aborted = np.zeros(P, dtype=bool)
    if perturbation is not None:
        Qh, hQh = perturbation
        x_p = x.copy()
        cost_p = np.zeros(P)
    sol = claim.solution if markov else None

    with np.errstate(all="ignore"):
        for k in range(ops.N):
            t = ops.t[k]
            dt = ops.dt[k]
            dw = Z[:, k, :] * np.sqrt(dt)
            if markov and sol.mode != "analytic":
                inside = sol.in_domain(state[:, 0])
                aborted |= ~inside
                state = np.clip(state, sol.x[0], sol.x[-1])
            new_state = claim.step_state(state, t, dt, dw)
            if girsanov:
                integrand = claim.gradient(t, state)[:, None] * (new_state - state)
                incr = integrand @ ops.Rinv[k].T
            elif RinvC is not None:
                incr = dw @ RinvC[k].T
            else:
                kf = claim.kernel(t, state)
                incr = np.einsum("ij,pjl,pl->pi", ops.Rinv[k], kf, dw)
            Dmu = mu @ ops.D[k]
            x = x @ ops.E_step[k].T + Dmu @ ops.E_back[k].T
            cost += np.einsum("pi,pi->p", mu, Dmu)
            vmu = mu @ ops.V[k].T
            vnorm2 = np.einsum("pi,pi->p", vmu, vmu)
            l1 += ops.ginv_int[k] * np.sqrt(vnorm2)
            energy += ops.ginv_int[k] * vnorm2
            if perturbation is not None:
                x_p = x_p @ ops.E_step[k].T + (Dmu + Qh[k]) @ ops.E_back[k].T
                cost_p += np.einsum("pi,pi->p", mu, Dmu) + 2.0 * mu @ Qh[k] + hQh[k]
            step = incr @ ops.R[k + 1].T
            shadow += step
            term_scale += np.sqrt(np.einsum("pi,pi->p", Dmu, Dmu)) + np.sqrt(np.einsum("pi,pi->p", step, step))
            mu = mu + incr
            state = new_state

    f = claim.terminal(state)
    gap = x - f
    lhs = x - ops.q
    rhs = ops.R0_mu_bar + shadow
    # relative to the size of the summed terms, not of their (possibly tiny) total
    scale = np.maximum(term_scale + np.linalg.norm(ops.R0_mu_bar), 1e-300)
    resid = np.linalg.norm(lhs - rhs, axis=1) / scale
    aborted |= ~np.all(np.isfinite(gap), axis=1) | ~np.isfinite(cost)
    out = {
        "gap": gap, "gap_sq": np.sum(gap**2, axis=1), "cost": cost, "f": f,
        "identity": resid, "l1": l1, "energy": energy, "aborted": aborted,
    }
    if perturbation is not None:
        gap_p = x_p - f
        out["gap_p"] = gap_p
        out["gap_sq_p"] = np.sum(gap_p**2, axis=1)
        out["cost_p"] = cost_p
    return out


def simulate_path(law: ControlLaw, grid: TimeGrid, rng_stream: np.random.Generator) -> SimResult:
    ops = _GridOps(law, grid)
    Z = rng_stream.standard_normal((1, grid.N, law.claim.d))
    o = _run(law, ops, Z)
    if o["aborted"][0]:
        raise FloatingPointError("path left the claim's grid or overflowed")
    return SimResult(terminal_gap=o["gap"][0], gap_sq=float(o["gap_sq"][0]), cost=float(o["cost"][0]),
                     f_realized=o["f"][0], identity_residual=float(o["identity"][0]),
                     abs_control_integral=float(o["l1"][0]),
                     weighted_control_energy=float(o["energy"][0]))


def _simulate_all(law, grid, n_paths, seed, workers, perturbation=None):
    ops = _GridOps(law, grid)
    d = law.claim.d
    starts = list(range(0, n_paths, CHUNK))

    def job(first):
        count = min(CHUNK, n_paths - first)
        return first, _run(law, ops, _path_normals(seed, first, count, grid.N, d), perturbation)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    parts.sort(key=lambda p: p[0])
    keys = parts[0][1].keys()
    return ops, {k: np.concatenate([p[1][k] for p in parts]) for k in keys}


def _mean_se(v):
    return float(np.mean(v)), float(np.std(v, ddof=1) / np.sqrt(v.size))


def monte_carlo(law: ControlLaw, grid: TimeGrid, n_paths: int, seed: int = 0, worker_count: int = 1,
                closed_form_cost: float | None = None) -> McReport:
    if n_paths < 100:
        raise InvalidArgumentError("monte_carlo needs at least 100 paths")
    _, o = _simulate_all(law, grid, n_paths, seed, worker_count)
    bad = int(o["aborted"].sum())
    if bad:
        log.warning("%d of %d paths aborted", bad, n_paths)
    if bad > MAX_ABORT_FRACTION * n_paths:
        raise FloatingPointError(f"{bad} of {n_paths} paths aborted (limit {MAX_ABORT_FRACTION:.1%})")
    ok = ~o["aborted"]
    g, se_g = _mean_se(o["gap_sq"][ok])
    c, se_c = _mean_se(o["cost"][ok])
    cf = optimal_cost_closed_form(law) if closed_form_cost is None else closed_form_cost
    return McReport(
        n_paths=n_paths, mean_gap_sq=g, se_gap=se_g, mean_cost=c, se_cost=se_c, closed_form_cost=cf,
        l1_second_moment=float(np.mean(o["l1"][ok] ** 2)), weighted_energy=float(np.mean(o["energy"][ok])),
        n_aborted=bad, max_identity_residual=float(np.max(o["identity"][ok])), samples=o)


@dataclass(frozen=True)
class PiecewiseProfile:
    """Deterministic h(t) = values[i] on [breaks[i], breaks[i+1])."""

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b.ndim != 1 or b.size != len(self.values) + 1 or np.any(np.diff(b) <= 0):
            raise InvalidArgumentError("profile needs increasing breaks, one more than values")

    def scaled(self, factor: float) -> "PiecewiseProfile":
        return PiecewiseProfile(self.breaks, tuple(factor * np.asarray(v, dtype=float) for v in self.values))


def balanced_two_piece(law: ControlLaw, split: float | None = None, h1=None) -> PiecewiseProfile:
    """h = h1 on [0, split), h2 on [split, T] with int Q h dt = 0."""
    T = law.T
    split = 0.5 * T if split is None else split
    h1 = np.ones(law.sys.n) if h1 is None else np.asarray(h1, dtype=float)
    Rs = law.table.R(split)
    h2 = -law.table.R_inv(split) @ ((law.R0 - Rs) @ h1)
    return PiecewiseProfile((0.0, split, T), (h1, h2))


def _profile_moments(law: ControlLaw, grid: TimeGrid, h: PiecewiseProfile):
    """Per-step int Q h ds and int h'Qh ds, exact through Gramian differences."""
    T = law.T
    n = law.sys.n
    r_nodes = grid.to_go
    b_to_go = T - np.asarray(h.breaks, dtype=float)
    Qh = np.zeros((grid.N, n))
    hQh = np.zeros(grid.N)
    for i, v in enumerate(h.values):
        v = np.asarray(v, dtype=float).reshape(n)
        if not np.any(v):
            continue
        hi_r, lo_r = b_to_go[i], b_to_go[i + 1]  # piece spans time-to-go [lo_r, hi_r]
        a = np.minimum(r_nodes[:-1], hi_r)
        c = np.maximum(r_nodes[1:], lo_r)
        active = a > c
        if not np.any(active):
            continue
        dR = law.table.R_to_go(a[active]) - law.table.R_to_go(c[active])
        Qh[active] += dR @ v
        hQh[active] += np.einsum("i,kij,j->k", v, dR, v)
    return Qh, hQh


def perturbation_test(law: ControlLaw, grid: TimeGrid, h_profile: PiecewiseProfile, n_paths: int,
                      seed: int = 0, worker_count: int = 1, tol: float = 1e-8) -> dict:
    """Compare the optimal control with u + Gamma^-1 b' exp(A'(T-t)) h(t).

    The competitor still replicates f when int Q h dt = 0; its extra cost is
    int h'Qh dt plus a cross term with zero mean.
    """
    Qh, hQh = _profile_moments(law, grid, h_profile)
    drift = Qh.sum(axis=0)
    scale = max(1.0, float(np.abs(Qh).sum()))
    if np.max(np.abs(drift)) > tol * scale:
        raise InvalidArgumentError(f"h_profile violates int Q h dt = 0 (residual {np.max(np.abs(drift)):.3g})")
    _, o = _simulate_all(law, grid, n_paths, seed, worker_count, perturbation=(Qh, hQh))
    ok = ~o["aborted"]
    diff = o["cost_p"][ok] - o["cost"][ok]
    inc, se_inc = _mean_se(diff)
    cross = diff - hQh.sum()
    cross_mean, cross_se = _mean_se(cross)
    gap, se_gap = _mean_se(o["gap_sq"][ok])
    gap_p, se_gap_p = _mean_se(o["gap_sq_p"][ok])
    cost_opt, se_opt = _mean_se(o["cost"][ok])
    cost_pert, se_pert = _mean_se(o["cost_p"][ok])
    return {
        "cost_opt": cost_opt, "se_cost_opt": se_opt,
        "cost_perturbed": cost_pert, "se_cost_perturbed": se_pert,
        "cost_increase": inc, "se_increase": se_inc,
        "expected_increase": float(hQh.sum()),
        "cross_term": cross_mean, "se_cross_term": cross_se,
        "gap_sq_opt": gap, "se_gap_opt": se_gap,
        "gap_sq_perturbed": gap_p, "se_gap_perturbed": se_gap_p,
        "constraint_residual": float(np.max(np.abs(drift))),
    }
