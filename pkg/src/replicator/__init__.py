"""Drive a linear system onto a random terminal target at minimal weighted
quadratic control cost, with a weight that degenerates at the horizon."""

from .claims import ClaimSpec, HSolverSpec, claim_mean, kf_at, kf_condition_check, kf_second_moment
from .controller import ControlLaw, adjoint_psi, mu_bar, optimal_cost_closed_form, u_value
from .gramian import GMatrix, GramianTable, WeightSpec, build_gramian, gramian_inverse, lemma1_diagnostic, q_kernel
from .linalg import mat_exp, min_eigenvalue, spd_inverse
from .pde import DiffusionSpec, HSolution, PayoffSpec, load_payoff_csv, solve_H
from .simulator import (McReport, PiecewiseProfile, SimResult, TimeGrid, balanced_two_piece, build_grid,
                        monte_carlo, perturbation_test, simulate_path)
from .system import SystemSpec

__version__ = "0.1.0"

__all__ = [
    "ClaimSpec", "HSolverSpec", "claim_mean", "kf_at", "kf_condition_check", "kf_second_moment",
    "ControlLaw", "adjoint_psi", "mu_bar", "optimal_cost_closed_form", "u_value",
    "GMatrix", "GramianTable", "WeightSpec", "build_gramian", "gramian_inverse", "lemma1_diagnostic",
    "q_kernel", "mat_exp", "min_eigenvalue", "spd_inverse",
    "DiffusionSpec", "HSolution", "PayoffSpec", "load_payoff_csv", "solve_H",
    "McReport", "PiecewiseProfile", "SimResult", "TimeGrid", "balanced_two_piece", "build_grid",
    "monte_carlo", "perturbation_test", "simulate_path", "SystemSpec",
]
