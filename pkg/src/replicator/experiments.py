"""Experiment configs, named presets and CSV/summary reports."""
from __future__ import annotations

import copy
import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .claims import ClaimSpec, HSolverSpec
from .controller import ControlLaw, mu_bar, optimal_cost_closed_form
from .errors import ConfigError, InvalidArgumentError
from .gramian import GMatrix, WeightSpec, weight_violations
from .linalg import is_symmetric
from .pde import GIRSANOV_Q, MEASURES, DiffusionSpec, PayoffSpec, analytic_H, load_payoff_csv, solve_H
from .simulator import McReport, build_grid, monte_carlo
from .system import SystemSpec

REPORT_COLUMNS = ("experiment", "grid_n", "paths", "mean_gap_sq", "se_gap", "mean_cost", "se_cost",
                  "closed_form_cost")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


@dataclass
class ExperimentConfig:
    name: str
    system: dict
    weight: dict
    gmatrix: dict
    claim: dict
    sim: dict
    thresholds: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


@dataclass
class ReportRow:
    experiment: str
    grid_n: int
    paths: int
    mean_gap_sq: float
    se_gap: float
    mean_cost: float
    se_cost: float
    closed_form_cost: float
    wall_time: float = 0.0

    def csv_fields(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in REPORT_COLUMNS]


SIM_DEFAULTS = {"paths": 20000, "grid_n": 4096, "gamma": 2.0, "seed": 0, "workers": 1, "gramian_nodes": 256}
SOLVER_DEFAULTS = asdict(HSolverSpec())
DIFFUSION_DEFAULTS = {"y0": 0.0, "kappa": 0.0, "drift_const": 0.0, "sigma": 1.0, "delta": 1e-3}


def _matrix(value, label, problems, square=True):
    try:
        M = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        problems.append(f"{label}: not a numeric matrix")
        return None
    if M.ndim != 2 or (square and M.shape[0] != M.shape[1]) or not np.all(np.isfinite(M)):
        problems.append(f"{label}: expected a finite {'square ' if square else ''}matrix, got shape {M.shape}")
        return None
    return M


def _listify(M):
    return np.asarray(M, dtype=float).tolist()


def parse_config(text, base_dir=".") -> ExperimentConfig:
    """Parse and validate a JSON document; raises ConfigError listing every violation."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from None
    else:
        doc = copy.deepcopy(text)
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in ("system", "weight", "gmatrix", "claim"):
        if not isinstance(doc.get(key), dict):
            problems.append(f"missing section {key!r}")
    if problems:
        raise ConfigError(problems)

    sysd, wd, gd, cd = doc["system"], doc["weight"], doc["gmatrix"], doc["claim"]
    A = _matrix(sysd.get("A"), "system.A", problems)
    b = _matrix(sysd.get("b"), "system.b", problems)
    n = A.shape[0] if A is not None else None
    T = sysd.get("T")
    if not isinstance(T, (int, float)) or not T > 0:
        problems.append("system.T must be a positive number")
        T = None
    if A is not None and b is not None:
        if b.shape != A.shape:
            problems.append(f"system.b must be {n}x{n}")
        elif abs(np.linalg.det(b)) <= 1e-12 * max(1.0, float(np.max(np.abs(b)))) ** n:
            problems.append("system.b is singular: b must be a non-degenerate matrix")
    a = sysd.get("a", [0.0] * (n or 1))
    if n is not None and (np.asarray(a, dtype=float).shape != (n,)):
        problems.append(f"system.a must have length {n}")

    form = wd.get("form", "pure-power")
    alpha = wd.get("alpha")
    if not isinstance(alpha, (int, float)):
        problems.append("weight.alpha must be a number")
    elif T is not None:
        for p in weight_violations(form, float(alpha), float(T), float(wd.get("c", 1.0)), wd.get("tau")):
            problems.append("weight: " + p)
    if "T" in wd and T is not None and wd["T"] != T:
        problems.append("weight.T differs from system.T")

    G = _matrix(gd.get("entries"), "gmatrix.entries", problems)
    if G is not None:
        if n is not None and G.shape != (n, n):
            problems.append(f"gmatrix.entries must be {n}x{n}")
        elif not is_symmetric(G) or np.linalg.eigvalsh(0.5 * (G + G.T))[0] <= 0:
            problems.append("gmatrix.entries must be symmetric positive definite")

    variant = cd.get("variant")
    claim = dict(cd)
    if "T" in cd and T is not None and cd["T"] != T:
        problems.append("claim.T differs from system.T")
    if variant == "linear":
        c = _matrix(cd.get("coeff"), "claim.coeff", problems, square=False)
        if c is not None and n is not None and c.shape[0] != n:
            problems.append(f"claim.coeff must have {n} rows")
        off = cd.get("offset", [0.0] * (n or 1))
        if n is not None and np.asarray(off, dtype=float).shape != (n,):
            problems.append(f"claim.offset must have length {n}")
        claim = {"variant": "linear", "coeff": _listify(cd.get("coeff", [[0.0]])) if c is not None else cd.get("coeff"),
                 "offset": [float(v) for v in off] if n is not None else off}
    elif variant == "markov":
        if n is not None and n != 1:
            problems.append("markov claims need a scalar system (n = 1)")
        pay = dict(cd.get("payoff", {}))
        if pay.get("kind") not in ("square", "cosine", "linear", "tabulated"):
            problems.append(f"claim.payoff.kind {pay.get('kind')!r} is not one of square, cosine, linear, tabulated")
        if pay.get("kind") == "tabulated" and not (pay.get("csv") or pay.get("points")):
            problems.append("tabulated payoff needs 'csv' or 'points'")
        diff = {**DIFFUSION_DEFAULTS, **cd.get("diffusion", {})}
        if not diff["sigma"] ** 2 / 2 >= diff["delta"]:
            problems.append("diffusion violates the ellipticity floor sigma^2/2 >= delta")
        solver = {**SOLVER_DEFAULTS, **cd.get("solver", {})}
        if solver["mode"] not in ("analytic", "finite-difference"):
            problems.append(f"claim.solver.mode {solver['mode']!r} unknown")
        if solver["measure"] not in MEASURES:
            problems.append(f"claim.solver.measure {solver['measure']!r} unknown")
        claim = {"variant": "markov", "payoff": pay, "diffusion": diff, "solver": solver}
    else:
        problems.append(f"claim.variant must be 'linear' or 'markov', got {variant!r}")

    sim = {**SIM_DEFAULTS, **doc.get("sim", {})}
    if not isinstance(sim["paths"], int) or sim["paths"] < 100:
        problems.append("sim.paths must be an integer >= 100")
    if not isinstance(sim["grid_n"], int) or sim["grid_n"] < 2:
        problems.append("sim.grid_n must be an integer >= 2")
    if not sim["gamma"] >= 1:
        problems.append("sim.gamma must be >= 1")
    if not isinstance(sim["workers"], int) or sim["workers"] < 1:
        problems.append("sim.workers must be a positive integer")
    if not isinstance(sim["seed"], int) or sim["seed"] < 0:
        problems.append("sim.seed must be a non-negative integer")
    if not isinstance(sim["gramian_nodes"], int) or sim["gramian_nodes"] < 64:
        problems.append("sim.gramian_nodes must be an integer >= 64")
    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        name=str(doc.get("name", "experiment")),
        system={"A": _listify(A), "b": _listify(b), "a": [float(v) for v in a], "T": float(T)},
        weight={"form": form, "alpha": float(alpha), "c": float(wd.get("c", 1.0)),
                "tau": None if wd.get("tau") is None else float(wd["tau"])},
        gmatrix={"entries": _listify(G)},
        claim=claim,
        sim={**sim, "gamma": float(sim["gamma"])},
        thresholds=dict(doc.get("thresholds", {})),
        outputs=dict(doc.get("outputs", {})),
        base_dir=str(base_dir),
    )


def emit_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def build_claim(cfg: ExperimentConfig) -> ClaimSpec:
    cd, T = cfg.claim, cfg.system["T"]
    if cd["variant"] == "linear":
        return ClaimSpec.linear(cd["coeff"], T, cd["offset"])
    pay = cd["payoff"]
    if pay["kind"] == "tabulated":
        if pay.get("csv"):
            payoff = load_payoff_csv(Path(cfg.base_dir) / pay["csv"])
        else:
            pts = np.asarray(pay["points"], dtype=float)
            payoff = PayoffSpec("tabulated", pts[:, 0], pts[:, 1])
    else:
        payoff = PayoffSpec(pay["kind"])
    diff = DiffusionSpec(**cd["diffusion"])
    return ClaimSpec.markov(payoff, diff, T, HSolverSpec(**cd["solver"]))


def build_law(cfg: ExperimentConfig) -> ControlLaw:
    s = cfg.system
    sys = SystemSpec(s["A"], s["b"], s["a"], s["T"])
    w = cfg.weight
    weight = WeightSpec(w["form"], w["alpha"], s["T"], w["c"], w["tau"])
    return ControlLaw(sys, weight, GMatrix(cfg.gmatrix["entries"]), build_claim(cfg),
                      nodes=cfg.sim["gramian_nodes"])


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``cfg`` with sim fields (paths, grid_n, gamma, seed, workers) replaced."""
    new = copy.deepcopy(cfg)
    for k, v in kw.items():
        if v is None:
            continue
        if k not in SIM_DEFAULTS:
            raise InvalidArgumentError(f"unknown sim override {k!r}")
        new.sim[k] = v
    return parse_config(new.to_dict(), base_dir=cfg.base_dir)


# presets

_SCALAR = {
    "system": {"A": [[0.0]], "b": [[1.0]], "a": [0.0], "T": 1.0},
    "weight": {"form": "pure-power", "alpha": 0.75, "c": 1.0},
    "gmatrix": {"entries": [[1.0]]},
}

PRESETS = {
    "scalar-w": {
        "description": "n=d=1, A=0, b=G=1, g=(1-t)^0.75, f=w(1), a=0; closed-form cost 1/3",
        **_SCALAR,
        "claim": {"variant": "linear", "coeff": [[1.0]], "offset": [0.0]},
        "thresholds": {"max_mean_gap_sq": 1e-3, "cost_within_se": 3.0, "cost_rel_tol": 0.02},
    },
    "scalar-w2": {
        "description": "scalar benchmark with f=w(1)^2; closed-form cost 85/84",
        **_SCALAR,
        "claim": {"variant": "markov", "payoff": {"kind": "square"},
                  "diffusion": {"y0": 0.0, "sigma": 1.0}, "solver": {"mode": "analytic"}},
        "thresholds": {"max_mean_gap_sq": 1e-3, "cost_within_se": 3.0},
    },
    "nilpotent-2d": {
        "description": "double integrator A=[[0,1],[0,0]], b=G=I, plateau weight, f=w(1) in R^2, a=(1,0)",
        "system": {"A": [[0.0, 1.0], [0.0, 0.0]], "b": [[1.0, 0.0], [0.0, 1.0]], "a": [1.0, 0.0], "T": 1.0},
        "weight": {"form": "plateau", "alpha": 0.75, "c": 2.0, "tau": 0.5},
        "gmatrix": {"entries": [[1.0, 0.0], [0.0, 1.0]]},
        "claim": {"variant": "linear", "coeff": [[1.0, 0.0], [0.0, 1.0]], "offset": [0.0, 0.0]},
        "thresholds": {"max_mean_gap_sq": 1e-3, "cost_within_se": 3.0},
    },
    "markov-square": {
        "description": "f=F(y(1)), F(x)=x^2, y=0.5+w, H from the Crank-Nicolson solver",
        **_SCALAR,
        "claim": {"variant": "markov", "payoff": {"kind": "square"},
                  "diffusion": {"y0": 0.5, "sigma": 1.0}, "solver": {"mode": "finite-difference"}},
        "thresholds": {"max_mean_gap_sq": 1e-3, "cost_within_se": 3.0, "max_h_error": 1e-3},
    },
    "markov-cos": {
        "description": "f=cos(y(1)), y=w, H from the Crank-Nicolson solver",
        **_SCALAR,
        "claim": {"variant": "markov", "payoff": {"kind": "cosine"},
                  "diffusion": {"y0": 0.0, "sigma": 1.0}, "solver": {"mode": "finite-difference"}},
        "thresholds": {"max_mean_gap_sq": 1e-3, "cost_within_se": 3.0, "max_h_error": 1e-3},
    },
    "girsanov-linear": {
        "description": "f=y(1), dy=0.5 y dt + dw, y0=1; H solved under the martingale measure",
        **_SCALAR,
        "claim": {"variant": "markov", "payoff": {"kind": "linear"},
                  "diffusion": {"y0": 1.0, "kappa": 0.5, "sigma": 1.0},
                  "solver": {"mode": "finite-difference", "measure": GIRSANOV_Q}},
        "thresholds": {"max_mean_gap_sq": 1e-3, "max_h_error": 1e-6},
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"])
    doc = copy.deepcopy(PRESETS[name])
    doc.pop("description")
    doc["name"] = name
    return parse_config(doc)


# running


def evaluate_thresholds(thresholds: dict, report: McReport) -> list[str]:
    fails = []
    th = thresholds
    if "max_mean_gap_sq" in th and not report.mean_gap_sq <= th["max_mean_gap_sq"]:
        fails.append(f"mean |x(T)-f|^2 = {report.mean_gap_sq:.3e} exceeds {th['max_mean_gap_sq']:.1e}")
    dev = abs(report.mean_cost - report.closed_form_cost)
    if "cost_within_se" in th and not dev <= th["cost_within_se"] * report.se_cost:
        fails.append(f"mean cost {report.mean_cost:.6f} is {dev / report.se_cost:.2f} SE from "
                     f"closed form {report.closed_form_cost:.6f}")
    if "cost_rel_tol" in th and not dev <= th["cost_rel_tol"] * abs(report.closed_form_cost):
        fails.append(f"mean cost deviates {dev / abs(report.closed_form_cost):.2%} from closed form")
    if "max_identity_residual" in th and not report.max_identity_residual <= th["max_identity_residual"]:
        fails.append(f"replication identity residual {report.max_identity_residual:.2e}")
    return fails


def write_report_csv(path, rows: list[ReportRow]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields())
    Path(path).write_text(buf.getvalue())


def write_table_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


def _out_dir(cfg, out):
    d = Path(out if out is not None else cfg.outputs.get("directory", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


@dataclass
class RunOutcome:
    report: McReport
    row: ReportRow
    failures: list
    files: list


def run(cfg: ExperimentConfig, out=None, write: bool = True) -> RunOutcome:
    """Monte Carlo run of one config; writes report.csv and summary.txt."""
    start = time.perf_counter()
    law = build_law(cfg)
    s = cfg.sim
    grid = build_grid(cfg.system["T"], s["grid_n"], s["gamma"])
    rep = monte_carlo(law, grid, s["paths"], seed=s["seed"], worker_count=s["workers"])
    wall = time.perf_counter() - start
    row = ReportRow(cfg.name, s["grid_n"], s["paths"], rep.mean_gap_sq, rep.se_gap, rep.mean_cost,
                    rep.se_cost, rep.closed_form_cost, wall)
    failures = evaluate_thresholds(cfg.thresholds, rep)
    files = []
    if write:
        d = _out_dir(cfg, out)
        write_report_csv(d / "report.csv", [row])
        (d / "summary.txt").write_text(summary_text(cfg, law, rep, failures, wall))
        files = [d / "report.csv", d / "summary.txt"]
    return RunOutcome(rep, row, failures, files)


def summary_text(cfg, law, rep: McReport, failures, wall) -> str:
    measure_note = ""
    if law.claim.measure == GIRSANOV_Q:
        measure_note = ("note: H solved under the martingale measure Q; the closed-form cost is "
                        "the minimal E_Q cost, while mean_cost is estimated under P\n")
    lines = [
        f"experiment        {cfg.name}",
        f"paths             {rep.n_paths}   grid_n {cfg.sim['grid_n']}   gamma {cfg.sim['gamma']}   seed {cfg.sim['seed']}",
        f"mu_bar            {np.array2string(mu_bar(law), precision=6)}",
        f"mean |x(T)-f|^2   {rep.mean_gap_sq:.6e} +- {rep.se_gap:.2e}",
        f"mean cost         {rep.mean_cost:.6f} +- {rep.se_cost:.6f}",
        f"closed-form cost  {rep.closed_form_cost:.6f}",
        f"E(int|u|dt)^2     {rep.l1_second_moment:.6f}",
        f"E int g|u|^2 dt   {rep.weighted_energy:.6f}",
        f"identity resid.   {rep.max_identity_residual:.2e}",
        f"aborted paths     {rep.n_aborted}",
        f"wall time         {wall:.2f} s",
    ]
    text = "\n".join(lines) + "\n" + measure_note
    if failures:
        text += "FAILED\n" + "".join(f"  - {f}\n" for f in failures)
    else:
        text += "PASSED all configured thresholds\n"
    return text


def converge(cfg: ExperimentConfig, n_list, out=None, write: bool = True, max_ratio: float = 0.7):
    """One run per step count (shared seed); returns rows, ratios and failures."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidArgumentError("n_list must be increasing")
    rows = []
    for n in n_list:
        rows.append(run(with_overrides(cfg, grid_n=n), write=False).row)
    ratios = [b.mean_gap_sq / a.mean_gap_sq if a.mean_gap_sq > 0 else float("nan")
              for a, b in zip(rows, rows[1:])]
    failures = [f"MSE ratio {n_list[i]}->{n_list[i + 1]} = {r:.3f} > {max_ratio}"
                for i, r in enumerate(ratios) if not r <= max_ratio]
    if write:
        d = _out_dir(cfg, out)
        write_report_csv(d / "report.csv", rows)
        table = [(r.grid_n, r.mean_gap_sq, "" if i == 0 else ratios[i - 1],
                  "" if i == 0 else int(ratios[i - 1] <= max_ratio)) for i, r in enumerate(rows)]
        write_table_csv(d / "converge.csv", ("grid_n", "mean_gap_sq", "ratio_to_previous", "ratio_ok"), table)
    return rows, ratios, failures


def pde_check(cfg: ExperimentConfig, resolutions=((200, 200), (400, 400), (800, 800)), out=None,
              write: bool = True):
    """Errors of the Crank-Nicolson H and dH/dx against closed forms, per grid size."""
    claim = build_claim(cfg)
    if claim.variant != "markov-terminal-1d":
        raise InvalidArgumentError("pde-check needs a markov claim")
    measure = claim.solver.measure
    ref = analytic_H(claim.payoff, claim.diffusion, claim.T, measure)
    if ref is None:
        raise InvalidArgumentError(
            "no analytic reference for this payoff; use the Monte Carlo consistency check instead")
    rows = []
    for n_x, n_t in resolutions:
        sol = solve_H(claim.payoff, claim.diffusion, claim.T, n_x=n_x, n_t=n_t, measure=measure,
                      boundary=claim.solver.boundary)
        X, Tt = np.meshgrid(sol.x, sol.t)
        win = (sol.x >= sol.window[0]) & (sol.x <= sol.window[1])
        eH = np.abs(sol.H - ref[0](X, Tt))[:, win]
        eG = np.abs(sol.Hx - ref[1](X, Tt))[:, win]
        term = float(np.max(np.abs(sol.H[-1] - claim.payoff(sol.x))))
        rows.append((n_x, n_t, float(eH.max()), float(np.sqrt(np.mean(eH**2))), float(eG.max()),
                     float(np.sqrt(np.mean(eG**2))), term))
    header = ("n_x", "n_t", "max_err_H", "l2_err_H", "max_err_Hx", "l2_err_Hx", "terminal_err")
    if write:
        write_table_csv(_out_dir(cfg, out) / "pde_check.csv", header, rows)
    failures = []
    lim = cfg.thresholds.get("max_h_error")
    if lim is not None and not rows[-1][2] <= lim:
        failures.append(f"H max error {rows[-1][2]:.2e} exceeds {lim:.1e} at the finest grid")
    return header, rows, failures


def cost_table(cfgs, out=None, write: bool = True):
    """Closed-form optimal cost, R(0) and mu_bar for each config."""
    header = ("experiment", "n", "R0_min_eig", "mu_bar_norm", "closed_form_cost")
    rows = []
    for cfg in cfgs:
        law = build_law(cfg)
        rows.append((cfg.name, law.sys.n, float(np.linalg.eigvalsh(law.R0)[0]),
                     float(np.linalg.norm(mu_bar(law))), optimal_cost_closed_form(law)))
    if write and cfgs:
        write_table_csv(_out_dir(cfgs[0], out) / "cost_table.csv", header, rows)
    return header, rows
