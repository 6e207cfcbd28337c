"""Random trap environments: Poissonian fields, clearings, and queries.

A trap field is the union of closed a-balls centered at the atoms of a
Poisson point process, realized inside a bounding box (padded by a so
boundary traps are represented).  Point-in-trap queries are exact and
index-accelerated; clearing searches run on a grid of candidate centers
and report certified lower bounds on the clearing radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .kernels import Box, ParameterError, RngStream, sample_ppp_in_box


class OutOfDomainError(ValueError):
    """A query point lies outside the realized bounding box."""


@dataclass(frozen=True)
class TrapField:
    """Immutable realization of the trap field inside a bounding box."""

    dim: int
    intensity: float
    trap_radius: float
    atoms: np.ndarray            # (n, dim), sampled in bounding_box padded by a
    bounding_box: Box            # the query domain
    env_seed: int

    @cached_property
    def _tree(self) -> cKDTree | None:
        if len(self.atoms) == 0:
            return None
        return cKDTree(self.atoms)

    def nearest_atom_distance(self, points: np.ndarray) -> np.ndarray:
        """Exact distance to the closest atom for an (n, dim) batch."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self._tree is None:
            return np.full(len(pts), np.inf)
        d, _ = self._tree.query(pts, k=1)
        return np.atleast_1d(d)

    def in_trap(self, points: np.ndarray) -> np.ndarray:
        """Vectorized closed-ball membership; domain already checked."""
        return self.nearest_atom_distance(points) <= self.trap_radius


def build_trap_field(
    env_stream: RngStream,
    dim: int,
    nu: float,
    trap_radius: float,
    box: Box,
) -> TrapField:
    """Sample PPP(nu) atoms in ``box`` padded by the trap radius."""
    if trap_radius <= 0:
        raise ParameterError(f"trap_radius must be > 0, got {trap_radius}")
    if nu < 0:
        raise ParameterError(f"intensity must be >= 0, got {nu}")
    if box.dim != dim:
        raise ParameterError(f"box dim {box.dim} != dim {dim}")
    if np.any(box.side_lengths() < 2.0 * trap_radius):
        raise ParameterError("box smaller than one trap diameter")
    atoms = sample_ppp_in_box(env_stream, nu, box.padded(trap_radius))
    return TrapField(
        dim=dim,
        intensity=nu,
        trap_radius=trap_radius,
        atoms=atoms,
        bounding_box=box,
        env_seed=env_stream.stream_id,
    )


# environment streams live in their own id namespace so they can never
# collide with replica or path streams of the same experiment seed
ENV_STREAM_BASE = 1 << 62


def trap_field_from_seed(
    seed: int, env_seed: int, dim: int, nu: float, trap_radius: float, box: Box
) -> TrapField:
    """Deterministic field for (seed, env_seed); the quenched handle."""
    stream = RngStream(seed, ENV_STREAM_BASE + env_seed)
    field = build_trap_field(stream, dim, nu, trap_radius, box)
    return TrapField(
        dim=field.dim,
        intensity=field.intensity,
        trap_radius=field.trap_radius,
        atoms=field.atoms,
        bounding_box=field.bounding_box,
        env_seed=env_seed,
    )


def is_in_trap(field: TrapField, x) -> bool:
    """True iff x lies in the closed trap union K."""
    pt = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not bool(field.bounding_box.contains(pt)[0]):
        raise OutOfDomainError(f"point {x} outside realized box {field.bounding_box}")
    return bool(field.in_trap(pt)[0])


@dataclass(frozen=True)
class ClearingReport:
    """Best trap-free ball found by a grid search at a given resolution."""

    center: tuple[float, ...]
    radius: float
    search_box: Box
    resolution: float


def _grid_centers(box: Box, resolution: float) -> np.ndarray:
    axes = []
    for lo, hi in zip(box.lo, box.hi):
        n = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
        axes.append(np.linspace(lo, hi, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def largest_clearing(
    field: TrapField,
    search_box: Box,
    resolution: float,
    inscribed: bool = False,
) -> ClearingReport:
    """Grid search for the largest clearing center in ``search_box``.

    The reported radius is min over atoms of (distance - a), optionally
    clamped by the distance to the search box boundary (inscribed
    mode).  It is a certified lower bound on the true largest clearing
    radius, exact as resolution -> 0.
    """
    if resolution <= 0 or resolution > field.trap_radius / 2.0:
        raise ParameterError(
            f"resolution must be in (0, a/2] = (0, {field.trap_radius / 2}], got {resolution}"
        )
    if search_box.volume <= 0:
        raise ParameterError("empty search box")
    centers = _grid_centers(search_box, resolution)
    radius = field.nearest_atom_distance(centers) - field.trap_radius
    if inscribed:
        lo = np.asarray(search_box.lo)
        hi = np.asarray(search_box.hi)
        wall = np.minimum(centers - lo, hi - centers).min(axis=1)
        radius = np.minimum(radius, wall)
    best = int(np.argmax(radius))
    return ClearingReport(
        center=tuple(float(c) for c in centers[best]),
        radius=float(radius[best]),
        search_box=search_box,
        resolution=resolution,
    )


def clearing_scale(dim: int, nu: float, ell: float):
    """The clearing radius scale (R0, R_ell) for the cube (-ell, ell)^d.

    R_ell = R0 (log ell)^{1/d} - (log log ell)^2 is clamped at 0 when
    the desk-scale formula goes negative; the flag records the clamp.
    """
    from .theory import ClearingScale, constants_for

    if nu <= 0:
        raise ParameterError(f"nu must be > 0, got {nu}")
    if ell <= math.e:
        raise ParameterError(f"need ell > e, got {ell}")
    r0 = constants_for(dim, nu).r0
    raw = r0 * math.log(ell) ** (1.0 / dim) - math.log(math.log(ell)) ** 2
    return ClearingScale(r0=r0, r_ell=max(0.0, raw), clamped=raw < 0.0)


def good_point_hit(field: TrapField, vertices: np.ndarray, clearing_radius: float) -> bool:
    """Whether some path vertex is the center of a clearing of this radius.

    Exact at the vertices: B(x, rho) avoids K iff the nearest atom is at
    distance >= rho + a.  Vertex-only, exact as the path step -> 0.
    """
    pts = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
    if not np.all(field.bounding_box.contains(pts)):
        raise OutOfDomainError("path leaves the realized bounding box")
    d = field.nearest_atom_distance(pts)
    return bool(np.any(d >= clearing_radius + field.trap_radius))


_ENV_MAGIC = "bbmlab-env v1"


def _box_to_str(box: Box) -> str:
    return ";".join(f"{repr(l)}:{repr(h)}" for l, h in zip(box.lo, box.hi))


def _box_from_str(s: str) -> Box:
    lo, hi = [], []
    for part in s.split(";"):
        l, h = part.split(":")
        lo.append(float(l))
        hi.append(float(h))
    return Box(tuple(lo), tuple(hi))


def save_trap_field(field: TrapField, path: str) -> None:
    """Versioned environment file: header line, then one row per atom."""
    with open(path, "w", newline="") as f:
        f.write(
            f"{_ENV_MAGIC},{field.dim},{repr(field.intensity)},"
            f"{repr(field.trap_radius)},{field.env_seed},{_box_to_str(field.bounding_box)}\n"
        )
        for row in field.atoms:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_trap_field(path: str) -> TrapField:
    """Load an environment file; queries reproduce bit-identically."""
    with open(path) as f:
        header = f.readline().strip()
        parts = header.split(",")
        if parts[0] != _ENV_MAGIC:
            raise ValueError(f"not a {_ENV_MAGIC} file: {path}")
        dim = int(parts[1])
        nu = float(parts[2])
        a = float(parts[3])
        env_seed = int(parts[4])
        box = _box_from_str(parts[5])
        rows = [
            [float(v) for v in line.strip().split(",")]
            for line in f
            if line.strip()
        ]
    atoms = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    return TrapField(
        dim=dim,
        intensity=nu,
        trap_radius=a,
        atoms=atoms,
        bounding_box=box,
        env_seed=env_seed,
    )
