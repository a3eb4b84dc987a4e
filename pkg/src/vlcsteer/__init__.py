"""Beam steering, clustering, power allocation and NOMA for indoor VLC downlinks."""

__version__ = "0.1.0"

from .channel import NoiseModel, link_rate, sinr_all
from .clustering import ClusterAssignment, MultiBeamSolution, vuc
from .geometry import AngleGrid, SteeringAngles, convex_hull, make_grid, orientation_from_angles, reduced_grid
from .noma import NomaCoefficients, NomaPair, noma_rates, optimize_coefficients, sic_feasible
from .power import PowerAllocation, sca_power_opt
from .steering import GainTable, SteeringSolution, build_gain_table, solve_enumeration, solve_mm

__all__ = [
    "AngleGrid", "ClusterAssignment", "GainTable", "MultiBeamSolution", "NoiseModel", "NomaCoefficients",
    "NomaPair", "PowerAllocation", "SteeringAngles", "SteeringSolution", "build_gain_table", "convex_hull",
    "link_rate", "make_grid", "noma_rates", "optimize_coefficients", "orientation_from_angles", "reduced_grid",
    "sca_power_opt", "sic_feasible", "sinr_all", "solve_enumeration", "solve_mm", "vuc",
]
