"""Terminal claims f and their martingale-representation kernels k_f.

Two families:

* ``linear-terminal``: f = c w(T) + d0, with constant kernel k_f = c.
* ``markov-terminal-1d``: f = F(y(T)) for a scalar diffusion y driven by w;
  k_f(t) = dH/dx(y(t), t) beta(y(t), t) where H(x, t) = E{F(y(T)) | y(t) = x}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidArgumentError
from .linalg import as_vector
from .pde import (GIRSANOV_Q, MEASURES, PHYSICAL, DiffusionSpec, HSolution, PayoffSpec,
                  analytic_H, analytic_solution, solve_H)

LINEAR = "linear-terminal"
MARKOV = "markov-terminal-1d"


@dataclass(frozen=True)
class HSolverSpec:
    mode: str = "analytic"  # or "finite-difference"
    measure: str = PHYSICAL
    n_x: int = 801
    n_t: int = 1024
    gamma: float = 2.0
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.mode not in ("analytic", "finite-difference"):
            raise InvalidArgumentError(f"unknown H solver mode {self.mode!r}")
        if self.measure not in MEASURES:
            raise InvalidArgumentError(f"unknown measure {self.measure!r}")


@dataclass(frozen=True, eq=False)
class ClaimSpec:
    variant: str
    T: float
    coeff: np.ndarray | None = None
    offset: np.ndarray | None = None
    payoff: PayoffSpec | None = None
    diffusion: DiffusionSpec | None = None
    solver: HSolverSpec = field(default_factory=HSolverSpec)

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError("claim horizon T must be positive")
        if self.variant == LINEAR:
            c = np.atleast_2d(np.asarray(self.coeff, dtype=float))
            if c.ndim != 2 or not np.all(np.isfinite(c)):
                raise InvalidArgumentError("linear claim coefficient must be a finite n x d matrix")
            d0 = as_vector(np.zeros(c.shape[0]) if self.offset is None else self.offset, c.shape[0])
            object.__setattr__(self, "coeff", c)
            object.__setattr__(self, "offset", d0)
        elif self.variant == MARKOV:
            if self.payoff is None or self.diffusion is None:
                raise InvalidArgumentError("markov claim needs a payoff and a diffusion")
            ts = np.linspace(0.0, self.T, 5)
            self.diffusion.check_ellipticity(np.array([self.diffusion.y0]), ts)
        else:
            raise InvalidArgumentError(f"unknown claim variant {self.variant!r}")

    @classmethod
    def linear(cls, coeff, T, offset=None) -> "ClaimSpec":
        return cls(LINEAR, T, coeff=coeff, offset=offset)

    @classmethod
    def deterministic(cls, value, T, d: int = 1) -> "ClaimSpec":
        value = as_vector(value)
        return cls(LINEAR, T, coeff=np.zeros((value.size, d)), offset=value)

    @classmethod
    def markov(cls, payoff, diffusion, T, solver: HSolverSpec | None = None) -> "ClaimSpec":
        return cls(MARKOV, T, payoff=payoff, diffusion=diffusion, solver=solver or HSolverSpec())

    @property
    def n(self) -> int:
        return self.coeff.shape[0] if self.variant == LINEAR else 1

    @property
    def d(self) -> int:
        return self.coeff.shape[1] if self.variant == LINEAR else 1

    @property
    def measure(self) -> str:
        return self.solver.measure if self.variant == MARKOV else PHYSICAL

    @cached_property
    def solution(self) -> HSolution:
        if self.variant != MARKOV:
            raise InvalidArgumentError("only markov claims carry an H solution")
        s = self.solver
        if s.mode == "analytic":
            return analytic_solution(self.payoff, self.diffusion, self.T, s.measure)
        k = np.arange(s.n_t + 1) / s.n_t
        t_grid = self.T * (1.0 - (1.0 - k) ** s.gamma)
        t_grid[-1] = self.T
        return solve_H(self.payoff, self.diffusion, self.T, n_x=s.n_x, t_grid=t_grid,
                       measure=s.measure, boundary=s.boundary)

    def initial_state(self, paths: int) -> np.ndarray:
        if self.variant == LINEAR:
            return np.zeros((paths, self.d))
        return np.full((paths, 1), float(self.diffusion.y0))

    def step_state(self, state, t, dt, dw):
        """Advance the claim state by one step driven by Brownian increments ``dw``."""
        if self.variant == LINEAR:
            return state + dw
        y = state[:, 0]
        diff = self.diffusion
        return (y + diff.a(y, t) * dt + diff.beta(y, t) * dw[:, 0])[:, None]

    def kernel(self, t, state) -> np.ndarray:
        """k_f(t) for a batch of states, shape (paths, n, d)."""
        if self.variant == LINEAR:
            return np.broadcast_to(self.coeff, (state.shape[0],) + self.coeff.shape)
        y = state[:, 0]
        k = self.solution.grad(y, t) * self.diffusion.beta(y, t)
        return k[:, None, None]

    def gradient(self, t, state) -> np.ndarray:
        """dH/dx at the state, the integrand against dy in the replication formula."""
        if self.variant != MARKOV:
            raise InvalidArgumentError("gradient is defined for markov claims only")
        return self.solution.grad(state[:, 0], t)

    def terminal(self, state) -> np.ndarray:
        """Realised claim value f from the terminal state, shape (paths, n)."""
        if self.variant == LINEAR:
            return state @ self.coeff.T + self.offset
        return self.payoff(state[:, 0])[:, None]


def claim_mean(claim: ClaimSpec) -> np.ndarray:
    """Ef; for markov claims H(y0, 0) under the claim's measure."""
    if claim.variant == LINEAR:
        return claim.offset.copy()
    return np.array([float(claim.solution.value(claim.diffusion.y0, 0.0))])


def kf_at(claim: ClaimSpec, t: float, path_state) -> np.ndarray:
    """k_f(t) as an n x d matrix for a single state (w(t) or y(t))."""
    if not 0 <= t <= claim.T:
        raise DomainError("t must lie in [0, T]")
    state = np.atleast_1d(np.asarray(path_state, dtype=float))[None, :]
    return np.array(claim.kernel(t, state)[0])


def _simulate_states(claim: ClaimSpec, times, samples: int, seed: int, measure: str):
    """Euler paths of the claim state recorded at ``times`` (which must start at 0)."""
    rng = np.random.Generator(np.random.Philox(seed))
    times = np.asarray(times, dtype=float)
    state = claim.initial_state(samples)
    out = [state]
    for t0, t1 in zip(times[:-1], times[1:]):
        dt = t1 - t0
        dw = rng.standard_normal(state.shape) * np.sqrt(dt)
        if claim.variant == MARKOV and measure == GIRSANOV_Q:
            y = state[:, 0]
            state = (y + claim.diffusion.beta(y, t0) * dw[:, 0])[:, None]
        else:
            state = claim.step_state(state, t0, dt, dw)
        out.append(state)
    return out


def _fine_times(t_nodes, per_interval: int):
    pieces = [np.linspace(a, b, per_interval + 1)[:-1] for a, b in zip(t_nodes[:-1], t_nodes[1:])]
    return np.concatenate(pieces + [t_nodes[-1:]])


def kf_second_moment_mc(claim: ClaimSpec, *, nodes: int = 33, samples: int = 100_000,
                        substeps: int = 8, seed: int = 0):
    """Pre-pass Monte Carlo estimate of t -> E[k_f k_f'] on a grid, linearly interpolated."""
    T = claim.T
    t_nodes = np.linspace(0.0, T, nodes)
    times = _fine_times(t_nodes, substeps)
    states = _simulate_states(claim, times, samples, seed, claim.measure)
    M = []
    for j in range(0, times.size, substeps):
        k = claim.kernel(times[j], states[j])
        M.append(np.einsum("pij,pkj->ik", k, k) / samples)
    M = np.array(M)

    def second_moment(t):
        t = np.asarray(t, dtype=float)
        flat = M.reshape(nodes, -1)
        vals = np.stack([np.interp(t, t_nodes, flat[:, i]) for i in range(flat.shape[1])], axis=-1)
        return vals.reshape(t.shape + M.shape[1:])

    return second_moment


def kf_second_moment(claim: ClaimSpec, **mc_kwargs):
    """t -> E[k_f(t) k_f(t)'] (under the claim's measure), analytic when known."""
    if claim.variant == LINEAR:
        cc = claim.coeff @ claim.coeff.T
        return lambda t: np.broadcast_to(cc, np.shape(t) + cc.shape).copy()
    diff, pay, T = claim.diffusion, claim.payoff, claim.T
    driftless = diff.driftless or claim.measure == GIRSANOV_Q
    if diff.constant_vol and analytic_H(pay, diff, T, claim.measure) is not None:
        s2, y0 = diff.sigma**2, diff.y0
        if pay.kind == "linear":
            k = 0.0 if driftless else diff.kappa
            return lambda t: (s2 * np.exp(2 * k * (T - np.asarray(t, dtype=float))))[..., None, None]
        if pay.kind == "square":
            return lambda t: (4 * s2 * (y0**2 + s2 * np.asarray(t, dtype=float)))[..., None, None]
        if pay.kind == "cosine":
            def m(t):
                t = np.asarray(t, dtype=float)
                return (s2 * np.exp(-s2 * (T - t)) * 0.5 * (1 - np.exp(-2 * s2 * t) * np.cos(2 * y0)))[..., None, None]
            return m
    return kf_second_moment_mc(claim, **mc_kwargs)


def kf_condition_check(claim: ClaimSpec, tau: float, samples: int = 20_000, *, nodes: int = 65,
                       substeps: int = 4, seed: int = 0) -> float:
    """Monte Carlo estimate of sup over t in [tau, T] of E|k_f(t)|^2."""
    if not 0 < tau < claim.T:
        raise DomainError("need 0 < tau < T")
    if claim.variant == LINEAR:
        return float(np.sum(claim.coeff**2))
    t_nodes = np.linspace(tau, claim.T, nodes)
    times = np.concatenate([[0.0], _fine_times(t_nodes, substeps)])
    states = _simulate_states(claim, times, samples, seed, claim.measure)
    best = 0.0
    for j in range(1, times.size, substeps):
        k = claim.kernel(times[j], states[j])
        best = max(best, float(np.mean(np.sum(k**2, axis=(1, 2)))))
    return best


def mc_terminal_expectation(claim: ClaimSpec, samples: int = 100_000, n_steps: int = 256,
                            seed: int = 0, measure: str = PHYSICAL):
    """Plain Monte Carlo (mean, standard error) of f, independent of the H solver."""
    times = np.linspace(0.0, claim.T, n_steps + 1)
    state = _simulate_states(claim, times, samples, seed, measure)[-1]
    f = claim.terminal(state)
    return f.mean(axis=0), f.std(axis=0, ddof=1) / np.sqrt(samples)


def representation_mse(claim: ClaimSpec, n_steps: int, samples: int = 20_000, seed: int = 0) -> float:
    """E|f - (Ef + sum k_f(t_k) dw_k)|^2 on a uniform grid (physical measure)."""
    rng = np.random.Generator(np.random.Philox(seed))
    dt = claim.T / n_steps
    state = claim.initial_state(samples)
    acc = np.tile(claim_mean(claim), (samples, 1))
    for k in range(n_steps):
        t = k * dt
        dw = rng.standard_normal((samples, claim.d)) * np.sqrt(dt)
        acc = acc + np.einsum("pij,pj->pi", claim.kernel(t, state), dw)
        state = claim.step_state(state, t, dt, dw)
    return float(np.mean(np.sum((claim.terminal(state) - acc) ** 2, axis=1)))
