"""Monte Carlo experiments over random user drops.

Every experiment kind maps to one family of sweeps. A trial draws one user
drop, evaluates all requested schemes on it and emits one row per user
and scheme. Trials are independent, so they may run in worker processes;
the report is always assembled in trial order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .. import __version__
from ..channel import noma_sinrs
from ..clustering import multistream_rates, singlestream_rates, vuc
from ..geometry import search_space
from ..noma import (NomaInfeasible, candidate_pairs, noma_rates, optimize_coefficients, pair_users,
                    sic_feasible, slot_fractions)
from ..power import sca_power_opt, true_objective
from ..steering import baseline_genie_fast, baseline_no_steering, build_gain_table, solve_enumeration, solve_mm
from .report import RateReport
from .scenario import Scenario, sample_users

log = logging.getLogger(__name__)

KINDS = ("single_beam_sweep", "multi_beam_sweep", "beam_count_sweep", "power_opt_sweep", "noma_coeff_sweep",
         "noma_threshold_sweep", "cdf_report")
SCHEMES = ("no_steering", "sbs", "sbsf", "ga_fbs", "single_stream", "multi_stream", "power_opt_sum",
           "power_opt_log", "noma")
STEERING = ("sbs", "sbsf")
ACCESS = ("single_stream", "multi_stream", "power_opt_sum", "power_opt_log", "noma")

_DEFAULTS = {
    "single_beam_sweep": dict(users=tuple(range(1, 11)), beams=(1,),
                              schemes=("no_steering", "sbs", "sbsf", "ga_fbs")),
    "multi_beam_sweep": dict(users=tuple(range(1, 11)), beams=(3,),
                             schemes=("no_steering", "sbs", "sbsf", "single_stream", "multi_stream")),
    "beam_count_sweep": dict(users=(10,), beams=tuple(range(1, 6)),
                             schemes=("no_steering", "sbs", "sbsf", "single_stream", "multi_stream")),
    "power_opt_sweep": dict(users=tuple(range(3, 11)), beams=(3,),
                            schemes=("no_steering", "sbs", "sbsf", "multi_stream", "power_opt_sum",
                                     "power_opt_log")),
    "noma_coeff_sweep": dict(users=(10,), beams=(3,), schemes=("noma",)),
    "noma_threshold_sweep": dict(users=(10,), beams=(3,), schemes=("noma",)),
    "cdf_report": dict(users=(6,), beams=(3,),
                       schemes=("no_steering", "sbsf", "multi_stream", "power_opt_sum", "power_opt_log", "noma")),
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    users: tuple = None
    beams: tuple = None
    trials: int = None
    schemes: tuple = None
    seed: int = 0
    delta_deg: float = None
    steering_solver: str = "enumeration"
    noma_objective: str = "sum_rate"
    noma_power: str = "power_opt_log"
    rho2_values: tuple = (0.05, 0.08, 0.1, 0.12, 0.15, 0.2, 0.25, 0.3)
    xi_star_values: tuple = (1.0, 2.0, 3.0, 5.0, 10.0)
    threshold_rho2_values: tuple = (0.1, 0.2, 0.3)
    workers: int = 1
    name: str = None  # report label; defaults to ``kind``

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        d = _DEFAULTS[self.kind]
        for name in ("users", "beams", "schemes"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, d[name])
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials is None:
            object.__setattr__(self, "trials", 500 if self.kind == "cdf_report" else 200)
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown schemes {bad}; choose from {SCHEMES}")
        if any(k < 1 for k in self.users) or any(n < 1 for n in self.beams):
            raise ValueError("user and beam counts must be positive")
        if self.steering_solver not in ("enumeration", "mm"):
            raise ValueError("steering_solver must be 'enumeration' or 'mm'")
        if self.noma_power not in ("equal", "power_opt_log", "power_opt_sum"):
            raise ValueError("noma_power must be 'equal', 'power_opt_log' or 'power_opt_sum'")


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of one trial, a pure function of the master seed and trial index."""
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, dtype=np.uint32)[0])


# ---------------------------------------------------------------------------
# One drop
# ---------------------------------------------------------------------------


class _Drop:
    """A user drop with its gain table and the scenario-derived objects."""

    def __init__(self, scenario: Scenario, users, delta_deg):
        self.scenario = scenario
        self.users = users
        self.noise = scenario.noise()
        self.grid = scenario.grid(delta_deg)
        self.tx = scenario.tx_position
        self.table = build_gain_table(users, self.tx, self.grid, scenario.area_m2, scenario.responsivity_a_per_w)
        self._vuc = {}

    @property
    def K(self):
        return len(self.users)

    def gammas(self, steering):
        return self.scenario.gamma_def if steering == "sbs" else None

    def single_beam(self, steering, solver):
        sc = self.scenario
        ok = self.table.allowed(self.gammas(steering))
        ok = ok & search_space(self.users, self.tx, self.grid).cell_mask()
        if solver == "mm":
            return solve_mm(self.table, sc.total_power_w, self.noise, allowed=ok)[1]
        return solve_enumeration(self.table, sc.total_power_w, self.noise, allowed=ok)

    def clusters(self, steering, n_beams):
        key = (steering, n_beams)
        if key not in self._vuc:
            n_eff = min(n_beams, self.K)
            p_beam = self.scenario.total_power_w / n_beams
            self._vuc[key] = vuc(self.table, n_eff, p_beam, self.noise, gammas=self.gammas(steering))
        return self._vuc[key]


def _rows(label, rates, beams, objective, ctx):
    rates = np.asarray(rates, dtype=float)
    total = float(rates.sum())
    return [dict(ctx, scheme=label, user_id=k, beam_id=int(beams[k]), rate_bps=float(rates[k]),
                 sum_rate_bps=total, objective=float(objective)) for k in range(len(rates))]


def _log_objective(rates):
    rates = np.asarray(rates, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(rates))) if np.all(rates > 0) else -math.inf


def _single_beam_rows(drop: _Drop, spec: ExperimentSpec, ctx, diag):
    sc = drop.scenario
    rows = []
    zeros = np.zeros(drop.K, dtype=int)
    for scheme in spec.schemes:
        if scheme == "no_steering":
            sol = baseline_no_steering(drop.users, drop.tx, sc.gamma_def, sc.total_power_w, drop.noise, sc.area_m2,
                                       sc.responsivity_a_per_w)
            rows += _rows(scheme, sol.per_user_rate_bps, zeros, sol.objective, ctx)
        elif scheme in STEERING:
            sol = drop.single_beam(scheme, spec.steering_solver)
            rows += _rows(scheme, sol.per_user_rate_bps, zeros, sol.objective, ctx)
            diag.append(dict(ctx, scheme=scheme, cell=sol.cell, gamma=sol.gamma, converged=sol.converged))
        elif scheme == "ga_fbs":
            rates = baseline_genie_fast(drop.users, drop.tx, sc.gamma_max, sc.total_power_w, drop.noise,
                                        sc.area_m2, sc.responsivity_a_per_w)
            rows += _rows(scheme, rates, zeros, _log_objective(rates), ctx)
    return rows


def _noma_power(drop, sol, spec):
    sc = drop.scenario
    if spec.noma_power == "equal":
        return sol.powers
    objective = "log_rate" if spec.noma_power == "power_opt_log" else "sum_rate"
    alloc, _ = sca_power_opt(sol.gains, sol.assignment.assignment, sc.total_power_w, drop.noise, objective)
    return alloc.powers


def _multi_beam_rows(drop: _Drop, spec: ExperimentSpec, n_beams, ctx, diag):
    sc = drop.scenario
    rows = []
    steerings = [s for s in spec.schemes if s in STEERING] or ["sbsf"]
    access = [s for s in spec.schemes if s in ACCESS]
    if "no_steering" in spec.schemes:
        sol = baseline_no_steering(drop.users, drop.tx, sc.gamma_def, sc.total_power_w, drop.noise, sc.area_m2,
                                   sc.responsivity_a_per_w)
        rows += _rows("no_steering", sol.per_user_rate_bps, np.zeros(drop.K, dtype=int), sol.objective, ctx)
    if "ga_fbs" in spec.schemes:
        rates = baseline_genie_fast(drop.users, drop.tx, sc.gamma_max, sc.total_power_w, drop.noise, sc.area_m2,
                                    sc.responsivity_a_per_w)
        rows += _rows("ga_fbs", rates, np.zeros(drop.K, dtype=int), _log_objective(rates), ctx)
    for steering in steerings:
        sol = drop.clusters(steering, n_beams)
        a = sol.assignment.assignment
        diag.append(dict(ctx, scheme=f"{steering}_vuc", iterations=sol.iterations, converged=sol.converged,
                         cells=[int(c) for c in sol.cells]))
        for acc in access:
            label = f"{steering}_{acc}"
            if acc == "multi_stream":
                rates = multistream_rates(sol.gains, a, sol.powers, drop.noise)
                rows += _rows(label, rates, a, _log_objective(rates), ctx)
            elif acc == "single_stream":
                rates = singlestream_rates(sol.gains, sol.powers, drop.noise)
                rows += _rows(label, rates, a, _log_objective(rates), ctx)
            elif acc in ("power_opt_sum", "power_opt_log"):
                objective = "sum_rate" if acc == "power_opt_sum" else "log_rate"
                alloc, state = sca_power_opt(sol.gains, a, sc.total_power_w, drop.noise, objective)
                rates = multistream_rates(sol.gains, a, alloc.powers, drop.noise)
                rows += _rows(label, rates, a, true_objective(sol.gains, a, alloc.powers, drop.noise, objective), ctx)
                diag.append(dict(ctx, scheme=label, iterations=state.iteration, converged=state.converged,
                                 powers=[float(p) for p in alloc.powers]))
            elif acc == "noma":
                powers = _noma_power(drop, sol, spec)
                rates, schedules = noma_rates(sol.gains, a, powers, drop.noise, sc.xi_star, spec.noma_objective)
                rows += _rows(label, rates, a, _log_objective(rates), ctx)
                diag.append(dict(ctx, scheme=label, pairs=sum(len(s.pairs) for s in schedules),
                                 fallbacks=sum(len(s.fallbacks) for s in schedules)))
    return rows


def _link_rates(gains, assignment, powers, noise):
    """Interference-limited rate of every user while it holds its beam alone."""
    rx = (np.asarray(gains, dtype=float) * np.asarray(powers, dtype=float)) ** 2
    own = rx[np.arange(rx.shape[0]), assignment]
    return noise.bandwidth_hz * np.log2(1 + own / (noise.power + rx.sum(axis=1) - own))


def _noma_pair_rows(drop: _Drop, spec: ExperimentSpec, n_beams, ctx, diag):
    """Per-pair NOMA and TDMA rates with optimised and with fixed splits."""
    sc = drop.scenario
    sol = drop.clusters("sbsf", n_beams)
    a = sol.assignment.assignment
    powers = _noma_power(drop, sol, spec)
    link = _link_rates(sol.gains, a, powers, drop.noise)
    rows = []
    for n in range(len(sol.cells)):
        members = np.flatnonzero(a == n)
        pairs, singles = pair_users(members, sol.gains, powers, n, drop.noise, sc.xi_star)
        tau_pair, _ = slot_fractions(len(pairs), len(singles))
        for pair in pairs:
            users = (pair.weak_user, pair.strong_user)
            beams = {u: n for u in users}
            tdma = [tau_pair / 2 * link[u] for u in users]
            if spec.kind == "noma_coeff_sweep":
                for rho2 in spec.rho2_values:
                    eta = 1.0 - rho2 ** 2
                    if not sic_feasible(pair, eta, sol.gains, powers, drop.noise, sc.xi_star):
                        continue
                    s = _noma_link_rates(pair, eta, sol.gains, powers, drop.noise)
                    tag = f"rho2={rho2:.2f}"
                    rows += _pair_rows(f"noma_{tag}", users, beams, [tau_pair * r for r in s], ctx)
                    rows += _pair_rows(f"tdma_{tag}", users, beams, tdma, ctx)
            for mode in ("sum_rate", "log_rate"):
                try:
                    opt = optimize_coefficients(pair, sol.gains, powers, drop.noise, sc.xi_star, mode)
                except NomaInfeasible:
                    diag.append(dict(ctx, scheme=f"noma_{mode}", pair=list(users), fallback=True))
                    continue
                rows += _pair_rows(f"noma_opt_{mode}", users, beams, [tau_pair * r for r in opt.rates_bps], ctx,
                                   objective=opt.objective)
                diag.append(dict(ctx, scheme=f"noma_{mode}", pair=list(users), eta=opt.coefficients.eta,
                                 iterations=opt.iterations, converged=opt.converged))
            rows += _pair_rows("tdma", users, beams, tdma, ctx)
    return rows


def _noma_link_rates(pair, eta, gains, powers, noise):
    s = noma_sinrs(gains[pair.weak_user], gains[pair.strong_user], pair.serving_beam, powers, eta, noise)
    B = noise.bandwidth_hz
    return [B * math.log2(1 + s.xi_weak), B * math.log2(1 + s.xi_strong)]


def _pair_rows(label, users, beams, rates, ctx, objective=None):
    total = float(sum(rates))
    obj = total if objective is None else objective
    return [dict(ctx, scheme=label, user_id=int(u), beam_id=int(beams[u]), rate_bps=float(r), sum_rate_bps=total,
                 objective=float(obj)) for u, r in zip(users, rates)]


def _threshold_rows(drop: _Drop, spec: ExperimentSpec, n_beams, ctx, diag):
    """One row per candidate pair and setting; ``objective`` is 1 if decodable."""
    sol = drop.clusters("sbsf", n_beams)
    a = sol.assignment.assignment
    powers = _noma_power(drop, sol, spec)
    rows = []
    for n in range(len(sol.cells)):
        for pair in candidate_pairs(np.flatnonzero(a == n), sol.gains, n)[0]:
            for xi in spec.xi_star_values:
                for rho2 in spec.threshold_rho2_values:
                    eta = 1.0 - rho2 ** 2
                    ok = sic_feasible(pair, eta, sol.gains, powers, drop.noise, xi)
                    rates = _noma_link_rates(pair, eta, sol.gains, powers, drop.noise) if ok else [0.0, 0.0]
                    total = float(sum(rates))
                    rows.append(dict(ctx, scheme=f"sic_xi={xi:g}_rho2={rho2:.2f}", user_id=pair.strong_user,
                                     beam_id=n, rate_bps=total, sum_rate_bps=total, objective=1.0 if ok else 0.0))
    return rows


def _run_unit(args):
    scenario, spec, K, trial = args
    seed = trial_seed(spec.seed, trial)
    users = sample_users(scenario, K, seed)
    diag = []
    try:
        drop = _Drop(scenario, users, spec.delta_deg)
        rows = []
        for N in spec.beams:
            ctx = dict(experiment=spec.name or spec.kind, trial=trial, seed=seed, K=K, N=N)
            if spec.kind == "single_beam_sweep":
                rows += _single_beam_rows(drop, spec, ctx, diag)
            elif spec.kind == "noma_coeff_sweep":
                rows += _noma_pair_rows(drop, spec, N, ctx, diag)
            elif spec.kind == "noma_threshold_sweep":
                rows += _threshold_rows(drop, spec, N, ctx, diag)
            else:
                rows += _multi_beam_rows(drop, spec, N, ctx, diag)
        return rows, diag, None
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return [], diag, f"K={K} trial={trial}: {type(exc).__name__}: {exc}"


def run_experiment(scenario: Scenario, spec: ExperimentSpec, workers=None) -> RateReport:
    """Run every (K, trial) unit of ``spec`` and collect rows in trial order."""
    workers = spec.workers if workers is None else workers
    units = [(scenario, spec, K, t) for t in range(spec.trials) for K in spec.users]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_unit, units, chunksize=max(1, len(units) // (4 * workers))))
    else:
        results = [_run_unit(u) for u in units]
    rows, diags, excluded = [], [], []
    for r, d, err in results:
        rows += r
        diags += d
        if err:
            excluded.append(err)
            log.warning("trial excluded: %s", err)
    if spec.kind == "cdf_report":
        rows = _cdf_order(rows)
    meta = {
        "package_version": __version__,
        "scenario": scenario.to_dict(),
        "spec": _spec_dict(spec),
        "delta_deg": spec.delta_deg or scenario.grid_delta_deg,
        "tolerances": {"sca_ratio_rtol": 1e-4, "sca_max_iter": 50, "noma_eta_tol": 1e-6, "noma_max_iter": 50,
                       "vuc_max_iter": 20, "tie_rtol": 1e-12},
        "excluded_trials": excluded,
        "diagnostics": diags,
    }
    return RateReport(spec.name or spec.kind, rows, meta)


def _cdf_order(rows):
    """Group rows by scheme (first appearance) and sort each group by rate."""
    order = {s: i for i, s in enumerate(dict.fromkeys(r["scheme"] for r in rows))}
    return sorted(rows, key=lambda r: (order[r["scheme"]], r["rate_bps"], r["trial"], r["K"], r["N"], r["user_id"]))


def _spec_dict(spec):
    d = asdict(spec)
    d.pop("workers")
    return d
