"""Room scenario: configuration, validation and random user drops."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel import NoiseModel
from ..geometry import AngleGrid, make_grid


class ScenarioError(ValueError):
    """Invalid scenario; ``errors`` lists one message per offending field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Scenario:
    room_m: tuple = (8.0, 8.0, 4.0)
    ap_position_m: tuple = (4.0, 4.0, 4.0)
    n_beams: int = 3
    user_height_m: float = 0.85
    alpha_min_deg: float = 200.0
    alpha_max_deg: float = 340.0
    grid_delta_deg: float = 2.0
    gamma_min: float = 1.0
    gamma_max: float = 15.0
    gamma_step: float = 1.0
    gamma_def: float = 5.0
    receiver_area_cm2: float = 1.0
    responsivity_a_per_w: float = 1.0
    noise_psd_a2_per_hz: float = 2.5e-20
    bandwidth_hz: float = 20e6
    total_power_w: float = 1.0
    xi_star: float = 3.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "room_m", tuple(float(v) for v in self.room_m))
        object.__setattr__(self, "ap_position_m", tuple(float(v) for v in self.ap_position_m))
        errors = self.problems()
        if errors:
            raise ScenarioError(errors)

    def problems(self):
        errs = []
        if len(self.room_m) != 3 or any(v <= 0 for v in self.room_m):
            errs.append("room_m: need three positive dimensions")
        if len(self.ap_position_m) != 3:
            errs.append("ap_position_m: need three coordinates")
        elif len(self.room_m) == 3:
            x, y, z = self.ap_position_m
            if not (0 <= x <= self.room_m[0] and 0 <= y <= self.room_m[1]):
                errs.append("ap_position_m: must lie inside the room footprint")
            if not np.isclose(z, self.room_m[2]):
                errs.append("ap_position_m: must sit at ceiling height")
        if int(self.n_beams) != self.n_beams or self.n_beams < 1:
            errs.append("n_beams: must be a positive integer")
        if len(self.room_m) == 3 and not 0 <= self.user_height_m < self.room_m[2]:
            errs.append("user_height_m: must lie between the floor and the ceiling")
        if not 180 < self.alpha_min_deg <= self.alpha_max_deg < 360:
            errs.append("alpha_min_deg/alpha_max_deg: need 180 < min <= max < 360 (downward beams)")
        for name in ("grid_delta_deg", "gamma_step", "receiver_area_cm2", "responsivity_a_per_w",
                     "noise_psd_a2_per_hz", "bandwidth_hz", "total_power_w", "xi_star"):
            if not getattr(self, name) > 0:
                errs.append(f"{name}: must be positive")
        if not 0 <= self.gamma_min <= self.gamma_max:
            errs.append("gamma_min/gamma_max: need 0 <= min <= max")
        if not self.gamma_min <= self.gamma_def <= self.gamma_max:
            errs.append("gamma_def: must lie within [gamma_min, gamma_max]")
        if int(self.seed) != self.seed or self.seed < 0:
            errs.append("seed: must be a non-negative integer")
        return errs

    # derived objects -----------------------------------------------------

    @property
    def tx_position(self):
        return np.array(self.ap_position_m)

    @property
    def area_m2(self) -> float:
        return self.receiver_area_cm2 * 1e-4

    def noise(self) -> NoiseModel:
        return NoiseModel(self.noise_psd_a2_per_hz, self.bandwidth_hz)

    def grid(self, delta_deg=None) -> AngleGrid:
        return make_grid(self.alpha_min_deg, self.alpha_max_deg, delta_deg or self.grid_delta_deg,
                         self.gamma_min, self.gamma_max, self.gamma_step)

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    # serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["room_m"] = list(self.room_m)
        d["ap_position_m"] = list(self.ap_position_m)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> Scenario:
        if not isinstance(data, dict):
            raise ScenarioError(["<root>: expected a JSON object"])
        names = {f.name for f in dataclasses.fields(cls)}
        errs = [f"{k}: unknown field" for k in data if k not in names]
        kwargs = {}
        for k, v in data.items():
            if k not in names:
                continue
            if k in ("room_m", "ap_position_m"):
                ok = isinstance(v, list) and all(_is_number(x) for x in v)
            elif k in ("n_beams", "seed"):
                ok = isinstance(v, int) and not isinstance(v, bool)
            else:
                ok = _is_number(v)
            if not ok:
                errs.append(f"{k}: wrong type {type(v).__name__}")
            else:
                kwargs[k] = v
        try:
            scenario = cls(**kwargs)
        except ScenarioError as exc:
            errs += exc.errors
        if errs:
            raise ScenarioError(errs)
        return scenario


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def load_scenario(path) -> Scenario:
    """Read a JSON scenario; omitted fields take the default room setup."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror}"]) from exc
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})"]) from exc
    return Scenario.from_dict(data)


def dump_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def sample_users(scenario: Scenario, n_users: int, seed) -> np.ndarray:
    """Uniform user drop over the floor at the receiver height, shape ``(K, 3)``."""
    if n_users < 1:
        raise ValueError("need at least one user")
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, 1.0, size=(n_users, 2)) * np.array(scenario.room_m[:2])
    return np.column_stack([xy, np.full(n_users, scenario.user_height_m)])
