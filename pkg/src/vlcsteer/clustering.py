"""User clustering for several independently steerable beams.

Alternates two steps in the style of k-means: steer every beam for the
users currently in its cluster, then move every user to the beam that
delivers the strongest gain. Stops when the beam cells repeat.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import BeamState, NoiseModel, link_rate, sinr_all
from .geometry import SteeringAngles, search_space
from .steering import GainTable, SteeringSolution, log_rates, solve_enumeration

log = logging.getLogger(__name__)

SteeringSolver = Callable[..., SteeringSolution]


@dataclass(frozen=True)
class ClusterAssignment:
    """Serving beam (0-based) of every user."""

    assignment: np.ndarray
    n_beams: int

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1 or np.any(a < 0) or np.any(a >= self.n_beams):
            raise ValueError("assignment entries must be beam indices in [0, n_beams)")

    @property
    def members(self):
        return [np.flatnonzero(self.assignment == n) for n in range(self.n_beams)]

    @property
    def sizes(self):
        return np.bincount(self.assignment, minlength=self.n_beams)


@dataclass
class MultiBeamSolution:
    beams: list
    cells: np.ndarray
    assignment: ClusterAssignment
    gains: np.ndarray  # (K, N) user-to-beam gains at the chosen cells
    powers: np.ndarray
    per_user_rate_bps: np.ndarray
    objective: float
    converged: bool
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def sum_rate_bps(self) -> float:
        return float(np.sum(self.per_user_rate_bps))


def assign_best_beam(gains) -> ClusterAssignment:
    """Send each user to the beam with the largest gain, ties to the lowest index."""
    gains = np.asarray(gains, dtype=float)
    return ClusterAssignment(np.argmax(gains, axis=1), gains.shape[1])


def repair_empty(assignment, gains):
    """Refill empty clusters from clusters that hold two or more users.

    The user moved is the one with the weakest serving gain among all
    donor clusters (lowest index on ties).
    """
    a = np.array(assignment, copy=True)
    gains = np.asarray(gains, dtype=float)
    n_beams = gains.shape[1]
    while True:
        counts = np.bincount(a, minlength=n_beams)
        empty = np.flatnonzero(counts == 0)
        if len(empty) == 0:
            return a
        donors = np.flatnonzero(counts[a] >= 2)
        if len(donors) == 0:
            raise ValueError("fewer users than beams")
        serving = gains[donors, a[donors]]
        a[donors[int(np.argmin(serving))]] = empty[0]


def multistream_rates(gains, assignment, powers, noise: NoiseModel):
    """Each beam carries its own stream; other beams interfere.

    Users of one beam share it by TDMA, so ``tau_k = 1 / |cluster|``.
    """
    assignment = np.asarray(assignment)
    gains = np.asarray(gains, dtype=float)
    counts = np.bincount(assignment, minlength=gains.shape[1])
    sinr = sinr_all(gains, assignment, powers, noise)
    return noise.bandwidth_hz * np.log2(1 + sinr) / counts[assignment]


def singlestream_rates(gains, powers, noise: NoiseModel):
    """All beams send the same stream; amplitudes add and users share it by TDMA."""
    gains = np.asarray(gains, dtype=float)
    h_eff = gains @ np.asarray(powers, dtype=float)
    return link_rate(h_eff, 1.0, noise) / gains.shape[0]


def _cluster_objective(table, cells, assignment, logr):
    """Sum over beams of the single-beam log-rate objective of its cluster."""
    total = 0.0
    for n, cell in enumerate(cells):
        users = np.flatnonzero(assignment == n)
        if len(users):
            total += float(np.sum(logr[users, cell])) - len(users) * math.log(len(users))
    return total


def vuc(table: GainTable, n_beams: int, p_beam, noise: NoiseModel, solver: SteeringSolver | None = None,
        max_iters=20, gammas=None, reduce=True) -> MultiBeamSolution:
    """Alternate per-cluster steering and best-gain reassignment.

    ``solver`` is called as ``solver(table, p_beam, noise, users=...,
    allowed=...)`` and defaults to grid enumeration. With ``reduce`` the
    search of each cluster is restricted to cells aimed at its hull.
    Returns the fixpoint, or on a cycle the best iterate visited.
    """
    K = table.n_users
    if n_beams < 1:
        raise ValueError("need at least one beam")
    if K < n_beams:
        raise ValueError(f"{K} users cannot fill {n_beams} beams")
    base_ok = table.allowed(gammas)
    logr = log_rates(table.gains, p_beam, noise)
    if solver is None:
        def solver(tab, p, nz, users, allowed):
            return solve_enumeration(tab, p, nz, users=users, allowed=allowed, logr=logr)

    def steer(users):
        ok = base_ok
        if reduce:
            ok = ok & search_space(table.rx_positions[users], table.tx_position, table.grid).cell_mask()
            if not ok.any():
                ok = base_ok
        return solver(table, p_beam, noise, users=users, allowed=ok)

    members = [np.array([n]) for n in range(n_beams)]
    prev_cells = None
    seen = set()
    history = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        sols = [steer(m) for m in members]
        cells = np.array([s.cell for s in sols])
        gains = table.gains[:, cells]
        assignment = repair_empty(assign_best_beam(gains).assignment, gains)
        history.append((cells, assignment, _cluster_objective(table, cells, assignment, logr)))
        if prev_cells is not None and np.array_equal(cells, prev_cells):
            converged = True
            break
        key = (cells.tobytes(), assignment.tobytes())
        if key in seen:
            log.info("clustering revisited an earlier state after %d iterations", it)
            break
        seen.add(key)
        members = [np.flatnonzero(assignment == n) for n in range(n_beams)]
        prev_cells = cells
    if converged:
        cells, assignment, obj = history[-1]
    else:
        best = max(range(len(history)), key=lambda i: (history[i][2], -i))
        cells, assignment, obj = history[best]
    return _assemble(table, cells, assignment, p_beam, noise, obj, converged, it)


def _assemble(table, cells, assignment, p_beam, noise, objective, converged, iterations):
    n_beams = len(cells)
    beams = []
    for cell in cells:
        alpha, beta, gamma = table.grid.cell(int(cell))
        beams.append(BeamState(table.tx_position, SteeringAngles(alpha, beta), gamma, p_beam))
    gains = table.gains[:, cells]
    powers = np.full(n_beams, float(p_beam))
    return MultiBeamSolution(beams=beams, cells=np.asarray(cells), assignment=ClusterAssignment(assignment, n_beams),
                             gains=gains, powers=powers,
                             per_user_rate_bps=multistream_rates(gains, assignment, powers, noise),
                             objective=objective, converged=converged, iterations=iterations)
