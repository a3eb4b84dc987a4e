"""Per-beam transmit power under a total budget.

The SINR-coupled allocation problem is handled by successive convex
approximation: the non-convex term ``p_n**2 / kappa`` in the SINR lower
bound is replaced by its tangent plane ``2 (a/b) p_n - (a/b)**2 kappa`` at
the previous iterate, the resulting concave program is solved with a small
log-barrier Newton method, and the ratios ``a/b`` are refreshed until they
settle.

All internal quantities are normalised by the noise power ``N0 B`` (SINR
is homogeneous in that scale), so the solver works with O(1) numbers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import NoiseModel, sinr_all

log = logging.getLogger(__name__)

OBJECTIVES = ("log_rate", "sum_rate")
# Rates below this floor (bits/s) are clamped inside the log objective.
RATE_FLOOR = 1e-6


@dataclass(frozen=True)
class PowerAllocation:
    powers: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.powers))


@dataclass
class AuxiliaryBounds:
    """Rate, SINR and interference bounds at an inner-solver optimum."""

    eta: np.ndarray  # rate lower bounds, bits/s
    zeta: np.ndarray  # SINR lower bounds
    kappa: np.ndarray  # interference-plus-noise upper bounds, A^2


@dataclass
class ScaState:
    ratios: np.ndarray
    iteration: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    tolerance: float = 1e-4
    bounds: AuxiliaryBounds | None = None


def equal_power(n_beams: int, p_max: float) -> PowerAllocation:
    if n_beams < 1:
        raise ValueError("need at least one beam")
    return PowerAllocation(np.full(n_beams, p_max / n_beams))


def time_shares(assignment, n_beams):
    """``1 / K_n`` for every user, where ``K_n`` is the size of its cluster."""
    assignment = np.asarray(assignment)
    counts = np.bincount(assignment, minlength=n_beams)
    return 1.0 / counts[assignment]


def user_rates(gains, assignment, powers, noise: NoiseModel):
    """Time-averaged multi-stream rates ``tau_k B log2(1 + SINR_k)``."""
    gains = np.asarray(gains, dtype=float)
    sinr = sinr_all(gains, assignment, powers, noise)
    return time_shares(assignment, gains.shape[1]) * noise.bandwidth_hz * np.log2(1 + sinr)


def true_objective(gains, assignment, powers, noise: NoiseModel, objective="log_rate"):
    """Objective of an allocation evaluated with the exact SINR."""
    rates = user_rates(gains, assignment, powers, noise)
    if objective == "sum_rate":
        return float(rates.sum())
    return float(np.sum(np.log(np.maximum(rates, RATE_FLOOR))))


def taylor_surrogate(p, kappa, ratio):
    """Tangent plane of ``p**2 / kappa`` at any point with ``p / kappa = ratio``."""
    return 2 * ratio * p - ratio ** 2 * kappa


class _Surrogate:
    """Concave surrogate objective in the beam powers for fixed ratios."""

    def __init__(self, G, assignment, ratios, tau, objective, active):
        self.G = G  # (K, N) squared gains / noise power
        self.n = assignment
        self.r = ratios
        self.tau = tau
        self.objective = objective
        self.active = active
        k = np.arange(G.shape[0])
        self.Gown = G[k, assignment]
        self.Gint = G.copy()
        self.Gint[k, assignment] = 0.0

    def kappa(self, p):
        return 1.0 + self.Gint @ (p * p)

    def s(self, p):
        return self.Gown * taylor_surrogate(p[self.n], self.kappa(p), self.r)

    def in_domain(self, s):
        if self.objective == "sum_rate":
            return bool(np.all(s > -1.0))
        return bool(np.all(s[self.active] > 0.0))

    def value(self, s):
        if self.objective == "sum_rate":
            return float(np.sum(self.tau * np.log1p(s)) / math.log(2))
        return float(np.sum(np.log(np.log1p(s[self.active]))))

    def derivatives(self, p, s):
        """Gradient and Hessian of the surrogate with respect to ``p``."""
        K, N = self.G.shape
        grad_s = -2 * (self.Gown * self.r ** 2)[:, None] * self.Gint * p[None, :]
        grad_s[np.arange(K), self.n] = 2 * self.Gown * self.r
        hdiag_s = -2 * (self.Gown * self.r ** 2)[:, None] * self.Gint
        if self.objective == "sum_rate":
            d1 = self.tau / ((1 + s) * math.log(2))
            d2 = -self.tau / ((1 + s) ** 2 * math.log(2))
        else:
            d1 = np.zeros(K)
            d2 = np.zeros(K)
            a = self.active
            L = np.log1p(s[a])
            d1[a] = 1.0 / ((1 + s[a]) * L)
            d2[a] = -(L + 1) / ((1 + s[a]) ** 2 * L ** 2)
        g = grad_s.T @ d1
        H = (grad_s.T * d2) @ grad_s + np.diag(hdiag_s.T @ d1)
        return g, H


def _normalised(gains, noise):
    return (np.asarray(gains, dtype=float) ** 2) / noise.power


def _barrier_solve(sur: _Surrogate, p0, p_max, gap_tol=1e-10, newton_tol=1e-9, mu=20.0, max_newton=100, t0=1.0):
    """Maximise the surrogate over ``{p > 0, sum p < p_max}`` by a log barrier.

    Stops once the duality-gap bound ``m / t`` falls below ``gap_tol``
    relative to the objective; each centering step runs Newton's method
    until half the squared decrement is below ``newton_tol``.
    """
    m = len(p0) + 1
    p = p0.copy()

    def psi(p, t):
        slack = p_max - p.sum()
        if np.any(p <= 0) or slack <= 0:
            return -math.inf, None
        s = sur.s(p)
        if not sur.in_domain(s):
            return -math.inf, None
        return t * sur.value(s) + np.sum(np.log(p)) + math.log(slack), s

    t = t0
    newton_steps = 0
    while True:
        val, s = psi(p, t)
        for _ in range(max_newton):
            g, H = sur.derivatives(p, s)
            slack = p_max - p.sum()
            g = t * g + 1.0 / p - 1.0 / slack
            H = t * H - np.diag(1.0 / p ** 2) - 1.0 / slack ** 2
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, -g, rcond=None)[0]
            decrement = float(g @ step)
            newton_steps += 1
            if decrement / 2 <= newton_tol:
                break
            alpha = 1.0
            while alpha > 1e-12:
                cval, cs = psi(p + alpha * step, t)
                if cval >= val + 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            else:
                break  # no progress possible at working precision
            p, val, s = p + alpha * step, cval, cs
        obj = sur.value(s)
        if m / t <= gap_tol * max(1.0, abs(obj)):
            break
        t *= mu
    return p, {"gap": m / t, "newton_steps": newton_steps, "t": t}


def inner_convex_solve(gains, assignment, ratios, p_max, noise: NoiseModel, objective="log_rate",
                       p_start=None):
    """Solve the linearised program for fixed ``a/b`` ratios.

    The auxiliary rate, SINR and interference variables are tight at any
    optimum (the objective increases in the rate bounds, which increase in
    the SINR bounds, which decrease in the interference bounds), so they are
    eliminated and recovered afterwards. Returns ``(allocation, bounds,
    surrogate objective)``.
    """
    return _inner(gains, assignment, ratios, p_max, noise, objective, p_start)[:3]


def _inner(gains, assignment, ratios, p_max, noise, objective, p_start, t0=1.0):
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    gains = np.asarray(gains, dtype=float)
    assignment = np.asarray(assignment)
    K, N = gains.shape
    G = _normalised(gains, noise)
    tau = time_shares(assignment, N)
    active = _active_users(G, assignment, tau, p_max, noise)
    sur = _Surrogate(G, assignment, np.asarray(ratios, dtype=float), tau, objective, active)
    if p_start is None:
        p_start = np.full(N, p_max / N)
    p0 = np.maximum(np.asarray(p_start, dtype=float), 1e-12 * p_max)
    p0 = p0 * min(1.0, (1 - 1e-6) * p_max / p0.sum())
    if not sur.in_domain(sur.s(p0)):
        raise RuntimeError("linearisation point is outside the surrogate domain")
    p, info = _barrier_solve(sur, p0, p_max, t0=t0)
    s = sur.s(p)
    B = noise.bandwidth_hz
    kappa = sur.kappa(p) * noise.power
    eta = B * np.log2(1 + np.maximum(s, -1 + 1e-300))
    if objective == "log_rate":
        eta = np.where(active, eta, RATE_FLOOR / tau)
        value = float(np.sum(np.log(tau * np.maximum(eta, RATE_FLOOR))))
    else:
        value = float(np.sum(tau * eta))
    bounds = AuxiliaryBounds(eta=eta, zeta=s, kappa=kappa)
    return PowerAllocation(p), bounds, value, info


def _active_users(G, assignment, tau, p_max, noise):
    """Users that could clear the rate floor with the whole budget on their beam."""
    own = G[np.arange(G.shape[0]), assignment]
    return tau * noise.bandwidth_hz * np.log2(1 + own * p_max ** 2) > RATE_FLOOR


def _ratios(G, assignment, p):
    k = np.arange(G.shape[0])
    Gint = G.copy()
    Gint[k, assignment] = 0.0
    kappa = 1.0 + Gint @ (p * p)
    return p[assignment] / kappa


def sca_power_opt(gains, assignment, p_max, noise: NoiseModel, objective="log_rate", tol=1e-4, max_iter=50,
                  p_init=None):
    """Successive convex approximation of the beam-power problem.

    ``gains`` is the ``(K, N)`` matrix of user-to-beam channel gains and
    ``assignment`` the serving beam of every user. Starts from equal power
    unless ``p_init`` is given and stops once the largest relative change in
    the linearisation ratios drops below ``tol``.
    """
    gains = np.asarray(gains, dtype=float)
    assignment = np.asarray(assignment)
    N = gains.shape[1]
    G = _normalised(gains, noise)
    p = equal_power(N, p_max).powers if p_init is None else np.asarray(p_init, dtype=float)
    state = ScaState(ratios=_ratios(G, assignment, p), tolerance=tol)
    state.objective_trace.append(true_objective(gains, assignment, p, noise, objective))
    t0 = 1.0
    for it in range(1, max_iter + 1):
        alloc, bounds, _, info = _inner(gains, assignment, state.ratios, p_max, noise, objective, p, t0)
        # the previous optimum is nearly central for the next surrogate
        t0 = info["t"] / 400.0
        p = alloc.powers
        new = _ratios(G, assignment, p)
        # ratios of switched-off beams are ~0; measure them against the largest
        denom = np.maximum(np.abs(state.ratios), 1e-6 * np.max(np.abs(state.ratios)))
        change = float(np.max(np.abs(new - state.ratios) / denom))
        state.ratios = new
        state.iteration = it
        state.bounds = bounds
        state.objective_trace.append(true_objective(gains, assignment, p, noise, objective))
        if change <= tol:
            state.converged = True
            break
    if not state.converged:
        log.debug("SCA stopped after %d iterations without ratio convergence", max_iter)
    return PowerAllocation(p), state


def brute_force_power_oracle(gains, assignment, p_max, noise: NoiseModel, objective="log_rate", step=None):
    """Best point of the simplex grid ``{p_n = i_n * step, sum p <= p_max}``.

    Exhaustive, so only offered for up to three beams.
    """
    gains = np.asarray(gains, dtype=float)
    assignment = np.asarray(assignment)
    N = gains.shape[1]
    if N > 3:
        raise ValueError("brute-force oracle supports at most 3 beams")
    step = p_max / 200 if step is None else step
    M = int(math.floor(p_max / step + 1e-9))
    K = gains.shape[0]
    tau = time_shares(assignment, N)
    G = _normalised(gains, noise)
    own = G[np.arange(K), assignment]
    B = noise.bandwidth_hz
    best_val, best_p = -math.inf, None
    # One vectorised chunk per value of the first coordinate.
    for first in range(M + 1):
        rest = _simplex_points(N - 1, M - first)
        P = np.column_stack([np.full(len(rest), first), rest]) * step
        sq = P * P
        rx = sq @ G.T
        own_rx = own[None, :] * sq[:, assignment]
        sinr = own_rx / (1.0 + rx - own_rx)
        rates = tau * B * np.log2(1 + sinr)
        if objective == "sum_rate":
            vals = rates.sum(axis=1)
        else:
            vals = np.log(np.maximum(rates, RATE_FLOOR)).sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_p = float(vals[i]), P[i].copy()
    return PowerAllocation(best_p)


def _simplex_points(dim, total):
    """All non-negative integer vectors of length ``dim`` with sum <= ``total``."""
    if dim == 0:
        return np.zeros((1, 0))
    if dim == 1:
        return np.arange(total + 1)[:, None]
    a, b = np.meshgrid(np.arange(total + 1), np.arange(total + 1), indexing="ij")
    keep = a + b <= total
    return np.column_stack([a[keep], b[keep]])
