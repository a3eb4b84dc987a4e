"""Lambertian line-of-sight channel, link rates and SINR expressions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SteeringAngles, link_geometry, orientation_from_angles

UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class NoiseModel:
    n0: float = 2.5e-20  # A^2/Hz
    bandwidth_hz: float = 20e6

    def __post_init__(self):
        if not (self.n0 > 0 and self.bandwidth_hz > 0):
            raise ValueError("noise density and bandwidth must be positive")

    @property
    def power(self) -> float:
        """Noise power ``N0 * B``."""
        return self.n0 * self.bandwidth_hz


@dataclass(frozen=True)
class ReceiverParams:
    position: np.ndarray
    orientation: np.ndarray = UP
    area_m2: float = 1e-4
    responsivity: float = 1.0

    def __post_init__(self):
        if not (self.area_m2 > 0 and self.responsivity > 0):
            raise ValueError("receiver area and responsivity must be positive")


@dataclass(frozen=True)
class BeamState:
    position: np.ndarray
    angles: SteeringAngles
    gamma: float
    power_w: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.power_w < 0:
            raise ValueError("directivity index and power must be non-negative")

    @property
    def orientation(self):
        return orientation_from_angles(self.angles.alpha, self.angles.beta)


@dataclass(frozen=True)
class NomaSinrs:
    xi_weak: float
    xi_strong: float
    xi_cross: float


def lambertian_gain(cos_phi, cos_theta, d, gamma, area_m2, responsivity):
    """Vectorised ``(g+1)/(2 pi) A r cos^g(phi) cos(theta) / d^2``.

    Negative cosines (receiver behind the emitter or facing away) give zero.
    """
    cos_phi = np.maximum(np.asarray(cos_phi, dtype=float), 0.0)
    cos_theta = np.maximum(np.asarray(cos_theta, dtype=float), 0.0)
    gamma = np.asarray(gamma, dtype=float)
    return (gamma + 1) / (2 * np.pi) * area_m2 * responsivity * cos_phi ** gamma * cos_theta / np.asarray(d) ** 2


def los_gain(beam: BeamState, rx: ReceiverParams) -> float:
    cos_phi, cos_theta, d = link_geometry(beam.position, beam.orientation, rx.position, rx.orientation)
    return float(lambertian_gain(cos_phi, cos_theta, d, beam.gamma, rx.area_m2, rx.responsivity))


def pointed_gain(tx_pos, rx_positions, gamma, area_m2, responsivity, rx_orientations=None):
    """Gain with the beam axis aimed exactly at each receiver (cos phi = 1)."""
    v = np.asarray(rx_positions, dtype=float).reshape(-1, 3) - np.asarray(tx_pos, dtype=float)
    n = UP if rx_orientations is None else np.asarray(rx_orientations, dtype=float)
    d = np.linalg.norm(v, axis=1)
    cos_theta = -np.sum(v * n, axis=-1) / d
    return lambertian_gain(1.0, cos_theta, d, gamma, area_m2, responsivity)


def snr(h, p_w, noise: NoiseModel):
    return (np.asarray(p_w) * np.asarray(h)) ** 2 / noise.power


def link_rate(h, p_w, noise: NoiseModel):
    """``B log2(1 + (p h)^2 / (N0 B))`` in bits/s."""
    return noise.bandwidth_hz * np.log2(1.0 + snr(h, p_w, noise))


def rate_from_sinr(sinr, noise: NoiseModel):
    return noise.bandwidth_hz * np.log2(1.0 + np.asarray(sinr))


def sinr_multibeam(gains, powers, serving: int, noise: NoiseModel) -> float:
    """SINR of a user served by beam ``serving`` with all other beams interfering."""
    gains = np.asarray(gains, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if gains.shape != powers.shape:
        raise ValueError("gains and powers must have the same length")
    rx = (powers * gains) ** 2
    return float(rx[serving] / (noise.power + rx.sum() - rx[serving]))


def sinr_all(gains, assignment, powers, noise: NoiseModel):
    """Vectorised multi-beam SINR for gains ``(K, N)`` and a user->beam map."""
    rx = (np.asarray(gains, dtype=float) * np.asarray(powers, dtype=float)) ** 2
    k = np.arange(rx.shape[0])
    own = rx[k, assignment]
    return own / (noise.power + rx.sum(axis=1) - own)


def noma_sinrs(gains_weak, gains_strong, serving: int, powers, eta: float, noise: NoiseModel) -> NomaSinrs:
    """SINRs of a two-user superposition on beam ``serving``.

    ``eta`` is the weak user's power share ``rho_1**2``. The strong user is
    assumed to cancel the weak user's message before decoding its own.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    p = np.asarray(powers, dtype=float)
    rw = (np.asarray(gains_weak, dtype=float) * p) ** 2
    rs = (np.asarray(gains_strong, dtype=float) * p) ** 2
    inter_w = rw.sum() - rw[serving]
    inter_s = rs.sum() - rs[serving]
    xi_weak = eta * rw[serving] / (noise.power + inter_w + (1 - eta) * rw[serving])
    xi_strong = (1 - eta) * rs[serving] / (noise.power + inter_s)
    xi_cross = eta * rs[serving] / (noise.power + inter_s + (1 - eta) * rs[serving])
    return NomaSinrs(float(xi_weak), float(xi_strong), float(xi_cross))
