"""Single-beam multi-user steering on a discretised (alpha, beta, gamma) grid.

Two solvers share one gain table: exhaustive enumeration (exact on the
grid) and a sparsity-penalised relaxation solved by majorization-
minimization. Time is always split equally between the users served by a
beam, so only the steering cell has to be chosen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import NoiseModel, link_rate, pointed_gain
from .geometry import AngleGrid, SteeringAngles, orientation_from_angles

log = logging.getLogger(__name__)

# Relative tolerance under which two cell objectives count as a tie.
TIE_RTOL = 1e-12


@dataclass
class GainTable:
    """Per-user channel gains for every grid cell, shape ``(K, grid.size)``."""

    grid: AngleGrid
    gains: np.ndarray
    tx_position: np.ndarray
    rx_positions: np.ndarray

    @property
    def n_users(self) -> int:
        return self.gains.shape[0]

    def allowed(self, gammas=None):
        """Boolean cell mask: grid mask, optionally restricted to some gammas."""
        ok = self.grid.cell_mask()
        if gammas is not None:
            keep = np.isin(self.grid.gammas, np.atleast_1d(gammas))
            if not keep.any():
                raise ValueError(f"no grid directivity matches {gammas}")
            ok = ok & np.tile(keep, len(self.grid.alphas) * len(self.grid.betas))
        return ok


@dataclass
class SteeringSolution:
    angles: SteeringAngles
    gamma: float
    tau: np.ndarray
    link_rate_bps: np.ndarray
    objective: float
    cell: int = -1
    feasible: bool = True
    converged: bool = True
    info: dict = field(default_factory=dict)

    @property
    def per_user_rate_bps(self):
        """Time-averaged user rates ``tau_k * R_k``."""
        return self.tau * self.link_rate_bps

    @property
    def sum_rate_bps(self) -> float:
        return float(self.per_user_rate_bps.sum())

    @property
    def orientation(self):
        return orientation_from_angles(self.angles.alpha, self.angles.beta)


def build_gain_table(rx_positions, tx_position, grid: AngleGrid, area_m2=1e-4, responsivity=1.0,
                     rx_orientations=None) -> GainTable:
    """Evaluate the Lambertian gain of every user for every grid cell.

    Cells outside ``grid.mask`` are stored as zero for all users.
    """
    if grid.size == 0:
        raise ValueError("empty angle grid")
    rx = np.asarray(rx_positions, dtype=float).reshape(-1, 3)
    tx = np.asarray(tx_position, dtype=float)
    v = rx - tx
    d = np.linalg.norm(v, axis=1)
    if np.any(d == 0):
        raise ValueError("a receiver coincides with the transmitter")
    n_rx = np.broadcast_to(np.array([0.0, 0.0, 1.0]) if rx_orientations is None
                           else np.asarray(rx_orientations, dtype=float), rx.shape)
    cos_theta = np.maximum(-np.sum(v * n_rx, axis=1) / d, 0.0)
    u = grid.directions()
    cos_phi = np.maximum((v @ u.T) / d[:, None], 0.0)
    cos_phi[:, ~grid.mask.reshape(-1)] = 0.0
    g = grid.gammas
    scale = (g + 1) / (2 * np.pi) * area_m2 * responsivity
    gains = cos_phi[:, :, None] ** g * scale
    gains *= (cos_theta / d ** 2)[:, None, None]
    return GainTable(grid=grid, gains=gains.reshape(len(rx), -1), tx_position=tx, rx_positions=rx)


def log_rates(gains, p_w, noise: NoiseModel):
    """Natural log of the link rate, ``-inf`` where the rate is zero."""
    r = link_rate(gains, p_w, noise)
    with np.errstate(divide="ignore"):
        return np.log(r)


def _argmax_first(values):
    """Index of the maximum, ties (within ``TIE_RTOL``) to the lowest index."""
    best = np.max(values)
    if not np.isfinite(best):
        return int(np.argmax(values))
    cand = np.flatnonzero(values >= best - TIE_RTOL * abs(best))
    return int(cand[0])


def _solution(table: GainTable, cell: int, users, p_w, noise, objective_mode="log_rate", **kw):
    alpha, beta, gamma = table.grid.cell(cell)
    h = table.gains[users, cell]
    rates = link_rate(h, p_w, noise)
    k = len(users)
    if objective_mode == "sum_rate":
        tau = np.zeros(k)
        tau[int(np.argmax(rates))] = 1.0
        obj = float(rates.max())
        feasible = obj > 0
    else:
        tau = np.full(k, 1.0 / k)
        feasible = bool(np.all(rates > 0))
        with np.errstate(divide="ignore"):
            obj = float(np.sum(np.log(tau * rates))) if feasible else -math.inf
    return SteeringSolution(angles=SteeringAngles(alpha, beta), gamma=gamma, tau=tau, link_rate_bps=rates,
                            objective=obj, cell=int(cell), feasible=feasible, **kw)


def cell_objectives(table: GainTable, p_w, noise: NoiseModel, users=None, objective_mode="log_rate",
                    logr=None):
    """Objective of every cell for a user subset (``-inf`` if a user gets no rate)."""
    users = np.arange(table.n_users) if users is None else np.asarray(users)
    if objective_mode == "sum_rate":
        return link_rate(table.gains[users], p_w, noise).max(axis=0)
    if logr is None:
        logr = log_rates(table.gains[users], p_w, noise)
    else:
        logr = logr[users]
    return logr.sum(axis=0) - len(users) * math.log(len(users))


def solve_enumeration(table: GainTable, p_w, noise: NoiseModel, users=None, gammas=None, allowed=None,
                      objective_mode="log_rate", logr=None) -> SteeringSolution:
    """Exact optimum over all allowed grid cells.

    ``objective_mode="sum_rate"`` drops the logarithm; the optimal time split
    then hands the whole frame to the strongest user.
    """
    users = np.arange(table.n_users) if users is None else np.asarray(users)
    if len(users) == 0:
        raise ValueError("at least one user is required")
    ok = table.allowed(gammas) if allowed is None else allowed
    if not ok.any():
        raise ValueError("no allowed grid cells")
    obj = cell_objectives(table, p_w, noise, users, objective_mode, logr)
    obj = np.where(ok, obj, -np.inf)
    cell = _argmax_first(obj)
    return _solution(table, cell, users, p_w, noise, objective_mode)


# ---------------------------------------------------------------------------
# Majorization-minimization on the relaxed selection vector
# ---------------------------------------------------------------------------


def project_simplex(v):
    """Euclidean projection onto ``{d >= 0, sum d = 1}`` (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


class _RelaxedObjective:
    """``sum_k log(log(1 + c (h_k . d)^2))`` with gains rescaled to O(1)."""

    def __init__(self, H, p_w, noise):
        self.scale = float(H.max())
        self.H = H / self.scale
        self.c = (p_w * self.scale) ** 2 / noise.power

    def value_grad(self, d):
        x = self.H @ d
        y = self.c * x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log1p(y)
            val = float(np.sum(np.log(L)))
            dx = 2 * self.c * x / ((1 + y) * L)
        if not np.isfinite(val):
            return -math.inf, None
        return val, self.H.T @ dx


def _pgd(f, d0, lam, w, max_iter=500, tol=1e-10):
    """Accelerated projected gradient ascent on ``f(d) - lam * w.d``.

    The objective is divided by ``1 + lam`` so that gradients stay O(1) as the
    penalty grows; this does not move the maximiser. Backtracking keeps the
    usual sufficient-ascent condition and momentum restarts whenever the
    penalised value drops.
    """
    s = 1.0 / (1.0 + lam)

    def evaluate(d):
        val, g = f.value_grad(d)
        if g is None:
            return -math.inf, None
        return s * (val - lam * float(w @ d)), s * (g - lam * w)

    d = d0
    pen, _ = evaluate(d)
    y, y_pen, y_grad = d, *evaluate(d)
    t = 1.0
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        while True:
            cand = project_simplex(y + step * y_grad)
            cpen, cgrad = evaluate(cand)
            diff = cand - y
            if cgrad is not None and cpen >= y_pen + y_grad @ diff - (diff @ diff) / (2 * step):
                break
            step *= 0.5
            if step < 1e-30:
                return d, pen, it
        if cpen < pen:
            # momentum overshot: restart from the last accepted iterate
            t = 1.0
            y, y_pen, y_grad = d, *evaluate(d)
            continue
        moved = float(np.abs(cand - d).sum())
        gain = cpen - pen
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = cand + ((t - 1) / t_next) * (cand - d)
        y = project_simplex(y)
        y_pen, y_grad = evaluate(y)
        if y_grad is None:
            y, y_pen, y_grad = cand, cpen, cgrad
        d, pen, t = cand, cpen, t_next
        step *= 1.5
        if moved < tol or gain <= tol * max(1.0, abs(pen)):
            break
    return d, pen, it


def _canonical_cells(grid: AngleGrid):
    """Drop cells that repeat an earlier cell's physical beam direction.

    ``(alpha, beta)`` and ``(540 - alpha, beta + 180)`` describe the same
    axis, as do all azimuths at nadir; identical columns would otherwise
    split the relaxed mass evenly forever.
    """
    u = np.round(grid.directions(), 9) + 0.0
    _, first = np.unique(u, axis=0, return_index=True)
    keep = np.zeros(len(u), dtype=bool)
    keep[first] = True
    return np.repeat(keep, len(grid.gammas))


def solve_mm(table: GainTable, p_w, noise: NoiseModel, users=None, gammas=None, allowed=None, q=0.5,
             eps=1e-8, lam0=1e-3, lam_growth=2.0, max_outer=100, restarts=0, concentration=0.99,
             seed=0):
    """Sparsity-penalised relaxation of the cell selection, solved by MM.

    Each outer step linearises the ``l_q`` penalty at the current iterate
    (weights ``q (d_i + eps)**(q - 1)``) and maximises the resulting concave
    program over the simplex; ``lam`` grows geometrically until one entry of
    ``d`` holds at least ``concentration`` of the mass. The first subproblem
    starts from the uniform vector plus ``restarts`` random points; it is
    concave, so extra starts only matter when its maximiser is not unique.

    Returns ``(d, solution)`` where ``d`` is the selection vector over the
    full grid and ``solution`` its one-hot rounding (the argmax cell). If
    ``d`` never concentrates, the best rounding seen along the path is
    returned with ``converged=False``.
    """
    if not 0 < q < 1 or eps <= 0:
        raise ValueError("need 0 < q < 1 and eps > 0")
    users = np.arange(table.n_users) if users is None else np.asarray(users)
    ok = table.allowed(gammas) if allowed is None else allowed
    exact = cell_objectives(table, p_w, noise, users)
    idx = np.flatnonzero(ok & np.isfinite(exact) & _canonical_cells(table.grid))
    if len(idx) == 0:
        sol = solve_enumeration(table, p_w, noise, users, allowed=ok)
        sol.feasible = False
        return np.zeros(table.grid.size), sol
    H = table.gains[np.ix_(users, idx)]
    f = _RelaxedObjective(H, p_w, noise)
    n = len(idx)
    rng = np.random.default_rng(seed)

    starts = [np.full(n, 1.0 / n)] + [rng.dirichlet(np.ones(n)) for _ in range(restarts)]
    w = np.full(n, q * (1.0 / n + eps) ** (q - 1))
    best_d, best_val = None, -math.inf
    for d0 in starts:
        d, val, _ = _pgd(f, d0, lam0, w)
        if val > best_val:
            best_d, best_val = d, val
    d = best_d

    best_cell, best_obj = None, -math.inf
    lam = lam0
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        cell = int(idx[np.argmax(d)])
        if exact[cell] > best_obj:
            best_cell, best_obj = cell, exact[cell]
        if d.max() >= concentration:
            converged = True
            break
        lam *= lam_growth
        w = q * (d + eps) ** (q - 1)
        d, _, _ = _pgd(f, d, lam, w)
    final = int(idx[np.argmax(d)])
    if converged:
        best_cell = final
    else:
        if exact[final] > best_obj:
            best_cell = final
        log.warning("MM steering did not concentrate within %d iterations", max_outer)
    full = np.zeros(table.grid.size)
    full[idx] = d
    sol = _solution(table, best_cell, users, p_w, noise, converged=converged,
                    info={"outer_iterations": outer, "lambda": lam, "max_weight": float(d.max())})
    return full, sol


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def baseline_no_steering(rx_positions, tx_position, gamma_def, p_w, noise: NoiseModel, area_m2=1e-4,
                         responsivity=1.0) -> SteeringSolution:
    """Downward-facing beam with the default directivity, equal time split."""
    rx = np.asarray(rx_positions, dtype=float).reshape(-1, 3)
    v = rx - np.asarray(tx_position, dtype=float)
    d = np.linalg.norm(v, axis=1)
    cos = np.maximum(-v[:, 2] / d, 0.0)
    h = (gamma_def + 1) / (2 * np.pi) * area_m2 * responsivity * cos ** gamma_def * cos / d ** 2
    rates = link_rate(h, p_w, noise)
    k = len(rx)
    tau = np.full(k, 1.0 / k)
    with np.errstate(divide="ignore"):
        obj = float(np.sum(np.log(tau * rates)))
    return SteeringSolution(angles=SteeringAngles(270.0, 0.0), gamma=float(gamma_def), tau=tau,
                            link_rate_bps=rates, objective=obj, feasible=bool(np.all(rates > 0)))


def baseline_genie_fast(rx_positions, tx_position, gamma_max, p_w, noise: NoiseModel, area_m2=1e-4,
                        responsivity=1.0):
    """Time-averaged rates when every user gets a beam aimed exactly at it.

    Each user is served for ``1/K`` of the frame at the on-axis rate with
    the narrowest beam, so this upper-bounds any slow-steering schedule.
    """
    rx = np.asarray(rx_positions, dtype=float).reshape(-1, 3)
    h = pointed_gain(tx_position, rx, gamma_max, area_m2, responsivity)
    return link_rate(h, p_w, noise) / len(rx)
