"""Two-user power-domain NOMA inside a beam.

Pairs are formed from the weakest and strongest users of a cluster
inwards, kept only if the strong user can decode the weak user's message,
and their power split ``eta = rho_1**2`` is tuned by minorize-maximize:
the weak user's SINR bound ``eta / kappa`` is linearised at ``(a, b)`` and
the expansion point follows the iterate.

Once the auxiliary variables are eliminated (they are tight at the
optimum) every step is a concave problem in ``eta`` alone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channel import NoiseModel, noma_sinrs

log = logging.getLogger(__name__)

OBJECTIVE_MODES = ("sum_rate", "log_rate")
DEFAULT_XI_STAR = 3.0
ETA_MIN = 0.5  # keeps rho_1 >= rho_2


class NomaInfeasible(RuntimeError):
    """No admissible power split; the pair should be served by TDMA."""


@dataclass(frozen=True)
class NomaPair:
    weak_user: int
    strong_user: int
    serving_beam: int


@dataclass(frozen=True)
class NomaCoefficients:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")

    @property
    def rho1(self) -> float:
        return math.sqrt(self.eta)

    @property
    def rho2(self) -> float:
        return math.sqrt(1.0 - self.eta)


@dataclass
class NomaSolution:
    coefficients: NomaCoefficients
    rates_bps: tuple  # (weak, strong) link rates while the pair holds the beam
    sic_margin: float
    objective_mode: str
    objective: float
    iterations: int = 0
    converged: bool = True

    @property
    def sum_rate_bps(self) -> float:
        return float(sum(self.rates_bps))


@dataclass(frozen=True)
class _PairChannel:
    """Received powers of a pair, normalised by the noise power."""

    g_weak: float  # own-beam received power of the weak user
    c_weak: float  # noise plus other-beam interference, weak user
    g_strong: float
    c_strong: float


def _pair_channel(pair: NomaPair, gains, powers, noise: NoiseModel) -> _PairChannel:
    gains = np.asarray(gains, dtype=float)
    rx = (gains * np.asarray(powers, dtype=float)) ** 2 / noise.power
    n = pair.serving_beam
    w, s = rx[pair.weak_user], rx[pair.strong_user]
    return _PairChannel(w[n], 1.0 + w.sum() - w[n], s[n], 1.0 + s.sum() - s[n])


def _sic_threshold(ch: _PairChannel, xi_star):
    """Smallest ``eta`` at which the strong user decodes the weak message."""
    if ch.g_strong <= 0:
        return math.inf
    return xi_star * (ch.c_strong + ch.g_strong) / (ch.g_strong * (1 + xi_star))


def _objective(r_weak, r_strong, mode):
    if mode == "sum_rate":
        return r_weak + r_strong
    if r_weak <= 0 or r_strong <= 0:
        return -math.inf
    return math.log(r_weak) + math.log(r_strong)


def sic_feasible(pair: NomaPair, eta, gains, powers, noise: NoiseModel, xi_star=DEFAULT_XI_STAR) -> bool:
    """Whether the strong user reaches ``xi_star`` when decoding the weak message."""
    gains = np.asarray(gains, dtype=float)
    s = noma_sinrs(gains[pair.weak_user], gains[pair.strong_user], pair.serving_beam, powers, eta, noise)
    return bool(s.xi_cross >= xi_star)


def candidate_pairs(members, gains, serving_beam):
    """Weakest with strongest, second weakest with second strongest, and so on.

    Returns ``(pairs, leftover)``; ``leftover`` is the middle user of an odd
    cluster or ``None``.
    """
    gains = np.asarray(gains, dtype=float)
    order = sorted((int(k) for k in members), key=lambda k: (gains[k, serving_beam], k))
    half = len(order) // 2
    pairs = [NomaPair(order[i], order[-1 - i], serving_beam) for i in range(half)]
    return pairs, (order[half] if len(order) % 2 else None)


def pair_users(members, gains, powers, serving_beam, noise: NoiseModel, xi_star=DEFAULT_XI_STAR):
    """Pair the users of one beam from the extremes of the gain order inwards.

    A candidate is kept if decoding works at ``eta = 1``, the most
    favourable split; otherwise both users stay single. Returns
    ``(pairs, singles)``.
    """
    cand, leftover = candidate_pairs(members, gains, serving_beam)
    pairs, singles = [], []
    for pair in cand:
        if sic_feasible(pair, 1.0, gains, powers, noise, xi_star):
            pairs.append(pair)
        else:
            singles.extend([pair.weak_user, pair.strong_user])
    if leftover is not None:
        singles.append(leftover)
    return pairs, sorted(singles)


def _pair_sinrs(ch: _PairChannel, eta):
    """``(weak, strong, cross)`` SINRs at split ``eta``."""
    xi_w = ch.g_weak * eta / (ch.c_weak + ch.g_weak * (1 - eta))
    xi_s = ch.g_strong * (1 - eta) / ch.c_strong
    return xi_w, xi_s, _xi_cross(ch, eta)


def _solution(ch, eta, noise, xi_star, mode, iterations=0, converged=True):
    xi_w, xi_s, xi_x = _pair_sinrs(ch, eta)
    B = noise.bandwidth_hz
    rates = (B * math.log2(1 + xi_w), B * math.log2(1 + xi_s))
    return NomaSolution(NomaCoefficients(float(eta)), rates, float(xi_x - xi_star), mode,
                        _objective(*rates, mode), iterations, converged)


def _xi_cross(ch: _PairChannel, eta):
    return ch.g_strong * eta / (ch.c_strong + ch.g_strong * (1 - eta))


def _feasible_interval(ch, xi_star, mode):
    lo = max(ETA_MIN, _sic_threshold(ch, xi_star))
    # round-off can leave the closed-form threshold a hair short
    while lo <= 1.0 and _xi_cross(ch, lo) < xi_star:
        lo = np.nextafter(lo, 2.0)
    hi = 1.0
    if lo > hi:
        raise NomaInfeasible("decoding threshold unreachable for eta <= 1")
    if mode == "log_rate" and lo >= hi:
        raise NomaInfeasible("only eta = 1 decodes, leaving the strong user without rate")
    return lo, hi


def _maximise_step(ch: _PairChannel, a, b, lo, hi, mode):
    """Maximise the linearised objective over ``eta`` in ``[lo, hi]``.

    The weak SINR bound is ``zeta = G (eta/b - a kappa/b**2 + a/b)`` with
    ``kappa = C + G (1 - eta)``, linear in ``eta``; the strong SINR is
    ``G2 (1 - eta) / C2``. Both objective modes are concave in ``eta``.
    """
    slope_w = ch.g_weak / b * (1.0 + a * ch.g_weak / b)
    zeta0 = ch.g_weak / b * (a - a * (ch.c_weak + ch.g_weak) / b)  # zeta at eta = 0
    slope_s = ch.g_strong / ch.c_strong

    def zeta(eta):
        return zeta0 + slope_w * eta

    def xi2(eta):
        return slope_s * (1.0 - eta)

    def deriv(eta):
        z, x = zeta(eta), xi2(eta)
        if z <= (-1.0 if mode == "sum_rate" else 0.0):
            return math.inf  # round-off at the clipped lower end
        if mode == "sum_rate":
            return slope_w / (1 + z) - slope_s / (1 + x)
        return slope_w / ((1 + z) * math.log1p(z)) - slope_s / ((1 + x) * math.log1p(x))

    # keep strictly inside the surrogate's domain: zeta > -1 for the sum of
    # rates, zeta > 0 (and a positive strong rate) for the sum of log rates
    floor = -1.0 if mode == "sum_rate" else 0.0
    if slope_w > 0 and zeta0 + slope_w * lo <= floor:
        lo = min(np.nextafter((floor - zeta0) / slope_w, hi), hi)
    if mode == "log_rate":
        hi = min(hi, 1.0 - 1e-15)
        lo = min(np.nextafter(lo, hi), hi)
    if deriv(lo) <= 0:
        return lo
    if deriv(hi) >= 0:
        return hi
    return brentq(deriv, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def optimize_coefficients(pair: NomaPair, gains, powers, noise: NoiseModel, xi_star=DEFAULT_XI_STAR,
                          objective_mode="sum_rate", tol=1e-6, max_iter=50, eta0=0.75) -> NomaSolution:
    """Power split of a NOMA pair by minorize-maximize over ``(a, b)``.

    Starts from ``a = eta0`` with ``b`` the weak user's interference plus
    noise at that split, and stops after two consecutive steps that move
    ``eta`` by at most ``tol``. Raises :class:`NomaInfeasible` when no
    split in ``[0.5, 1]`` lets the strong user decode the weak message.
    """
    if objective_mode not in OBJECTIVE_MODES:
        raise ValueError(f"objective_mode must be one of {OBJECTIVE_MODES}")
    ch = _pair_channel(pair, gains, powers, noise)
    if ch.g_weak <= 0:
        raise NomaInfeasible("weak user receives nothing from the serving beam")
    lo, hi = _feasible_interval(ch, xi_star, objective_mode)
    eta = min(max(eta0, lo), hi)
    quiet = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a, b = eta, ch.c_weak + ch.g_weak * (1.0 - eta)
        new = float(_maximise_step(ch, a, b, lo, hi, objective_mode))
        quiet = quiet + 1 if abs(new - eta) <= tol else 0
        eta = new
        if quiet >= 2:
            converged = True
            break
    return _solution(ch, eta, noise, xi_star, objective_mode, it, converged)


def oracle_1d(pair: NomaPair, gains, powers, noise: NoiseModel, xi_star=DEFAULT_XI_STAR,
              objective_mode="sum_rate", step=1e-4) -> NomaSolution:
    """Best feasible split on the grid ``eta = 0.5, 0.5 + step, ..., 1``."""
    if step <= 0:
        raise ValueError("step must be positive")
    gains = np.asarray(gains, dtype=float)
    etas = np.append(np.arange(ETA_MIN, 1.0, step), 1.0)
    ch = _pair_channel(pair, gains, powers, noise)
    xi_w, xi_s, xi_x = _pair_sinrs(ch, etas)
    B = noise.bandwidth_hz
    rw, rs = B * np.log2(1 + xi_w), B * np.log2(1 + xi_s)
    if objective_mode == "sum_rate":
        vals = rw + rs
    else:
        with np.errstate(divide="ignore"):
            vals = np.log(rw) + np.log(rs)
    vals = np.where(xi_x >= xi_star, vals, -np.inf)
    i = int(np.argmax(vals))
    if not np.isfinite(vals[i]):
        raise NomaInfeasible("no grid split is decodable")
    return _solution(ch, etas[i], noise, xi_star, objective_mode)


def slot_fractions(n_pairs: int, n_singles: int):
    """Time shares ``(tau_pair, tau_single)`` of one beam's frame.

    A pair occupies one full slot and a single half a slot.
    """
    if n_pairs + n_singles == 0:
        return 0.0, 0.0
    tau_pair = 1.0 / (n_pairs + n_singles / 2)
    return tau_pair, tau_pair / 2


def tdma_rates(users, gains, powers, assignment, noise: NoiseModel, n_pairs: int, n_singles: int):
    """TDMA rates with everyone in the beam on a half-pair slot, ``tau_pair / 2 * R``."""
    gains = np.asarray(gains, dtype=float)
    users = np.asarray(users)
    p = np.asarray(powers, dtype=float)
    rx = (gains[users] * p) ** 2
    own = rx[np.arange(len(users)), np.asarray(assignment)[users]]
    link = noise.bandwidth_hz * np.log2(1 + own / (noise.power + rx.sum(axis=1) - own))
    return slot_fractions(n_pairs, n_singles)[1] * link


@dataclass
class BeamSchedule:
    """Outcome of NOMA scheduling on one beam."""

    beam: int
    pairs: list
    solutions: list
    singles: list
    fallbacks: list


def noma_rates(gains, assignment, powers, noise: NoiseModel, xi_star=DEFAULT_XI_STAR, objective_mode="sum_rate"):
    """Per-user time-averaged rates when every beam schedules NOMA pairs.

    Pairs that cannot decode at their optimised split, or whose NOMA sum
    rate falls short of what TDMA would give them, revert to single users.
    Returns ``(rates, schedules)``.
    """
    gains = np.asarray(gains, dtype=float)
    assignment = np.asarray(assignment)
    K, N = gains.shape
    B = noise.bandwidth_hz
    p = np.asarray(powers, dtype=float)
    rx = (gains * p) ** 2
    own = rx[np.arange(K), assignment]
    link = B * np.log2(1 + own / (noise.power + rx.sum(axis=1) - own))
    rates = np.zeros(K)
    schedules = []
    for n in range(N):
        members = np.flatnonzero(assignment == n)
        if len(members) == 0:
            continue
        cand, singles = pair_users(members, gains, p, n, noise, xi_star)
        pairs, sols, fallbacks = [], [], []
        for pair in cand:
            try:
                sol = optimize_coefficients(pair, gains, p, noise, xi_star, objective_mode)
            except NomaInfeasible:
                sol = None
            tdma_sum = (link[pair.weak_user] + link[pair.strong_user]) / 2
            if sol is None or sol.sic_margin < 0 or sol.sum_rate_bps < tdma_sum:
                log.debug("pair %s falls back to TDMA", pair)
                fallbacks.append(pair)
                singles.extend([pair.weak_user, pair.strong_user])
            else:
                pairs.append(pair)
                sols.append(sol)
        tau_pair, tau_single = slot_fractions(len(pairs), len(singles))
        for pair, sol in zip(pairs, sols):
            rates[pair.weak_user] = tau_pair * sol.rates_bps[0]
            rates[pair.strong_user] = tau_pair * sol.rates_bps[1]
        for k in singles:
            rates[k] = tau_single * link[k]
        schedules.append(BeamSchedule(n, pairs, sols, sorted(singles), fallbacks))
    return rates, schedules
