"""Beam orientation, planar convex hulls and the reduced steering search space.

Positions and orientations are plain ``numpy`` arrays of shape ``(3,)``
(or ``(..., 3)`` when vectorised). Angles are in degrees throughout the
public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# Relative tolerance used for on-boundary tests in the user plane.
_PLANE_TOL = 1e-9


@dataclass(frozen=True)
class SteeringAngles:
    """Elevation ``alpha`` and azimuth ``beta`` of a beam axis, in degrees."""

    alpha: float
    beta: float


def orientation_from_angles(alpha, beta):
    """Unit orientation vector ``[cos b cos a, sin b cos a, sin a]``.

    Accepts scalars or broadcastable arrays (degrees). With this convention
    ``alpha = 270`` points straight down regardless of ``beta``.
    """
    a = np.radians(np.asarray(alpha, dtype=float))
    b = np.radians(np.asarray(beta, dtype=float))
    ca = np.cos(a)
    return np.stack([np.cos(b) * ca, np.sin(b) * ca, np.sin(a)], axis=-1)


def link_geometry(tx_pos, tx_orient, rx_pos, rx_orient):
    """Return ``(cos_phi, cos_theta, d)`` for one transmitter/receiver link.

    ``cos_phi`` is measured between the transmitter axis and the vector to
    the receiver, ``cos_theta`` between the receiver normal and the vector
    back to the transmitter. Negative cosines are returned as-is.
    """
    v = np.asarray(rx_pos, dtype=float) - np.asarray(tx_pos, dtype=float)
    d = float(np.linalg.norm(v))
    if d == 0.0:
        raise ValueError("transmitter and receiver positions coincide")
    cos_phi = float(np.clip(v @ np.asarray(tx_orient, dtype=float) / d, -1.0, 1.0))
    cos_theta = float(np.clip(-(v @ np.asarray(rx_orient, dtype=float)) / d, -1.0, 1.0))
    return cos_phi, cos_theta, d


# ---------------------------------------------------------------------------
# Convex hull
# ---------------------------------------------------------------------------


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class Hull2D:
    """Counterclockwise hull vertices; may degenerate to a point or a segment."""

    vertices: np.ndarray

    @property
    def kind(self) -> str:
        n = len(self.vertices)
        return "point" if n == 1 else "segment" if n == 2 else "polygon"

    def contains(self, pts, tol=_PLANE_TOL):
        """Vectorised inside-or-on test for points of shape ``(..., 2)``.

        Only meaningful for polygons; for degenerate hulls a point counts as
        inside when it lies within ``tol`` (scaled) of the point/segment.
        """
        pts = np.asarray(pts, dtype=float)
        v = self.vertices
        scale = max(1.0, float(np.abs(v).max()))
        if self.kind == "polygon":
            inside = np.ones(pts.shape[:-1], dtype=bool)
            for i in range(len(v)):
                a, b = v[i], v[(i + 1) % len(v)]
                edge = b - a
                cross = edge[0] * (pts[..., 1] - a[1]) - edge[1] * (pts[..., 0] - a[0])
                inside &= cross >= -tol * scale * np.hypot(*edge)
            return inside
        a = v[0]
        b = v[-1]
        ab = b - a
        denom = float(ab @ ab)
        t = np.zeros(pts.shape[:-1]) if denom == 0 else np.clip(((pts - a) @ ab) / denom, 0, 1)
        nearest = a + t[..., None] * ab
        return np.linalg.norm(pts - nearest, axis=-1) <= tol * scale


def convex_hull(points) -> Hull2D:
    """Graham scan over 2-D points.

    The pivot is the lowest point (ties: smallest x); the rest are sorted by
    polar angle about it, keeping only the farthest point on any shared ray.
    Collinear inputs collapse to the two extreme points and duplicates to a
    single vertex.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("convex_hull needs at least one point")
    uniq = sorted({(float(x), float(y)) for x, y in pts}, key=lambda p: (p[1], p[0]))
    pivot = uniq[0]
    rest = uniq[1:]
    if not rest:
        return Hull2D(np.array([pivot]))

    def polar(p):
        return math.atan2(p[1] - pivot[1], p[0] - pivot[0])

    def dist2(p):
        return (p[0] - pivot[0]) ** 2 + (p[1] - pivot[1]) ** 2

    rest.sort(key=lambda p: (polar(p), dist2(p)))
    # Keep only the farthest point along each ray out of the pivot.
    ordered = []
    for p in rest:
        # same ray: sine of the angle between the two directions, not an absolute cross product
        if ordered and abs(_cross(pivot, ordered[-1], p)) <= 1e-12 * math.sqrt(dist2(ordered[-1]) * dist2(p)) and \
                (ordered[-1][0] - pivot[0]) * (p[0] - pivot[0]) + (ordered[-1][1] - pivot[1]) * (p[1] - pivot[1]) > 0:
            ordered[-1] = max(ordered[-1], p, key=dist2)
        else:
            ordered.append(p)

    stack = [pivot]
    for p in ordered:
        while len(stack) > 1 and _cross(stack[-2], stack[-1], p) <= 1e-12 * max(dist2(p), 1.0):
            stack.pop()
        stack.append(p)
    if len(stack) == 2 or all(abs(_cross(stack[0], stack[1], q)) <= 1e-12 * max(dist2(q), 1.0) for q in stack[2:]):
        # all points on one line: return the extreme pair
        far = max(uniq, key=dist2)
        return Hull2D(np.array([pivot, far]))
    return Hull2D(np.array(stack))


# ---------------------------------------------------------------------------
# Angle grid and search-space reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AngleGrid:
    """Discretised ``(alpha, beta, gamma)`` search space.

    ``mask`` has shape ``(len(alphas), len(betas))`` and marks the cells that
    belong to the (possibly reduced) search space. Flattened cell indices are
    row-major over ``(alpha, beta, gamma)``.
    """

    alphas: np.ndarray
    betas: np.ndarray
    gammas: np.ndarray
    delta: float
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mask is None:
            object.__setattr__(self, "mask", np.ones((len(self.alphas), len(self.betas)), dtype=bool))

    @property
    def shape(self):
        return len(self.alphas), len(self.betas), len(self.gammas)

    @property
    def size(self) -> int:
        sa, sb, sg = self.shape
        return sa * sb * sg

    @property
    def mask_ratio(self) -> float:
        return float(self.mask.mean())

    def directions(self):
        """Unit beam axes for every ``(alpha, beta)`` cell, shape ``(sa*sb, 3)``."""
        aa, bb = np.meshgrid(self.alphas, self.betas, indexing="ij")
        return orientation_from_angles(aa, bb).reshape(-1, 3)

    def cell(self, index: int):
        """Map a flattened cell index back to ``(alpha, beta, gamma)``."""
        ia, ib, ig = np.unravel_index(int(index), self.shape)
        return float(self.alphas[ia]), float(self.betas[ib]), float(self.gammas[ig])

    def index(self, ia: int, ib: int, ig: int) -> int:
        return int(np.ravel_multi_index((ia, ib, ig), self.shape))

    def cell_mask(self):
        """Mask broadcast over gamma and flattened to cell order."""
        return np.repeat(self.mask.reshape(-1), len(self.gammas))

    def with_mask(self, mask):
        return replace(self, mask=np.asarray(mask, dtype=bool))


def make_grid(alpha_min=200.0, alpha_max=340.0, delta=2.0, gamma_min=1.0, gamma_max=15.0,
              gamma_step=1.0) -> AngleGrid:
    """Full grid: alpha in ``[alpha_min, alpha_max]``, beta in ``[0, 360)``."""
    if delta <= 0 or gamma_step <= 0:
        raise ValueError("sampling intervals must be positive")
    if alpha_max < alpha_min or gamma_max < gamma_min:
        raise ValueError("empty angle or directivity range")
    n_a = int(math.floor((alpha_max - alpha_min) / delta + 1e-9)) + 1
    n_b = max(1, int(math.ceil(360.0 / delta - 1e-9)))
    n_g = int(math.floor((gamma_max - gamma_min) / gamma_step + 1e-9)) + 1
    alphas = alpha_min + delta * np.arange(n_a)
    betas = delta * np.arange(n_b)
    gammas = gamma_min + gamma_step * np.arange(n_g)
    return AngleGrid(alphas=alphas, betas=betas, gammas=gammas, delta=float(delta))


def _angle_to_segment_fan(u, tx, a, b):
    """Smallest angle (rad) between unit rows of ``u`` and any ray tx->[a, b]."""
    va = np.asarray(a, dtype=float) - tx
    vb = np.asarray(b, dtype=float) - tx
    ua = va / np.linalg.norm(va)
    ub = vb / np.linalg.norm(vb)
    ang_a = np.arccos(np.clip(u @ ua, -1, 1))
    ang_b = np.arccos(np.clip(u @ ub, -1, 1))
    best = np.minimum(ang_a, ang_b)
    n = np.cross(va, vb)
    nn = np.linalg.norm(n)
    if nn == 0:
        return best
    n = n / nn
    un = u @ n
    proj = u - un[:, None] * n
    within = (np.cross(va, proj) @ n >= 0) & (np.cross(proj, vb) @ n >= 0) & (np.linalg.norm(proj, axis=1) > 0)
    perp = np.arcsin(np.clip(np.abs(un), 0, 1))
    return np.where(within, np.minimum(best, perp), best)


def hull_angular_distance(hull: Hull2D, tx_pos, user_plane_z: float, u):
    """Angle (rad) between unit axes ``u`` and the nearest ray from ``tx_pos``
    into the hull lying in the plane ``z = user_plane_z``; zero inside it.
    """
    tx = np.asarray(tx_pos, dtype=float)
    v = np.column_stack([hull.vertices, np.full(len(hull.vertices), user_plane_z)])
    if hull.kind == "point":
        w = v[0] - tx
        return np.arccos(np.clip(u @ (w / np.linalg.norm(w)), -1, 1))
    edges = [(v[0], v[1])] if hull.kind == "segment" else [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
    dist = np.min([_angle_to_segment_fan(u, tx, p, q) for p, q in edges], axis=0)
    if hull.kind == "polygon":
        down = u[:, 2] < -1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(down, (user_plane_z - tx[2]) / u[:, 2], np.nan)
        hit = np.nan_to_num(tx[:2] + t[:, None] * u[:, :2], nan=np.inf)
        dist = np.where(down & hull.contains(hit), 0.0, dist)
    return dist


def reduced_grid(hull: Hull2D, tx_pos, user_plane_z: float, grid: AngleGrid | None = None,
                 margin_deg: float | None = None, **grid_kwargs) -> AngleGrid:
    """Restrict ``grid`` to the beam axes that point into the users' hull.

    A cell is kept when its axis is within ``margin_deg`` (default: one grid
    step) of some ray from ``tx_pos`` into the hull. The margin absorbs the
    grid's quantisation: the best cell need not hit the hull exactly even
    though the continuous optimum does. Axes that never reach the plane are
    dropped.
    """
    tx = np.asarray(tx_pos, dtype=float)
    if user_plane_z >= tx[2]:
        raise ValueError("user plane must lie below the transmitter")
    if grid is None:
        grid = make_grid(**grid_kwargs)
    margin = np.radians(grid.delta if margin_deg is None else margin_deg)
    u = grid.directions()
    sa, sb, _ = grid.shape
    dist = hull_angular_distance(hull, tx, user_plane_z, u)
    mask = (u[:, 2] < -1e-12) & (dist <= margin + 1e-12)
    return grid.with_mask(mask.reshape(sa, sb))


def users_share_plane(positions, tol=0.01) -> bool:
    z = np.asarray(positions, dtype=float)[:, 2]
    return float(z.max() - z.min()) <= tol


def search_space(positions, tx_pos, grid: AngleGrid) -> AngleGrid:
    """Reduced grid for a user set, or the full grid when heights differ."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    if not users_share_plane(pos) or pos[:, 2].mean() >= np.asarray(tx_pos)[2]:
        return grid.with_mask(np.ones_like(grid.mask))
    hull = convex_hull(pos[:, :2])
    reduced = reduced_grid(hull, tx_pos, float(pos[:, 2].mean()), grid)
    if not reduced.mask.any():
        # hull entirely outside the steerable range
        return grid.with_mask(np.ones_like(grid.mask))
    return reduced
