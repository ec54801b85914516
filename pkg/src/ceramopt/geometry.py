"""Parametrized shapes, structured simplicial meshes and admissibility checks.

Two built-in scenario families are provided:

* :class:`RectangleScenario` -- a 2D plate ``[0, L] x [0, H]`` clamped on the
  left edge (tag ``D``), loaded on the right edge (tag ``N``), whose top and
  bottom edges (tag ``F``) move along their outward normals by piecewise-linear
  offsets given at ``k`` interior control stations.
* :class:`BoxScenario` -- the 3D analog; the top face is a height field.

Meshes are mapped lattices, so mesh topology depends only on the scenario and
the resolution, never on the design parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, permutations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateElement, DegenerateGeometry, GeometryError, InvalidDesign

DIRICHLET = "D"
NEUMANN = "N"
FREE = "F"
TAGS = (DIRICHLET, NEUMANN, FREE)

_VOLUME_RTOL = 1e-12


def simplex_volumes(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Signed volumes of simplices (positive for counter-clockwise/right-handed order)."""
    x0 = nodes[elements[:, 0]]
    edges = nodes[elements[:, 1:]] - x0[:, None, :]
    dim = nodes.shape[1]
    return np.linalg.det(edges) / math.factorial(dim)


def facet_measures(nodes: np.ndarray, facets: np.ndarray) -> np.ndarray:
    """Length (2D) or area (3D) of boundary facets."""
    p = nodes[facets]
    if facets.shape[1] == 2:
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def extract_boundary_facets(elements: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Facets that belong to exactly one element.

    Returns ``(facets, owner)`` with facets in the node order in which they
    appear in the owning element and ``owner`` the owning element index.
    """
    nv = elements.shape[1]
    local = list(combinations(range(nv), nv - 1))
    all_faces = np.concatenate([elements[:, list(c)] for c in local])
    owners = np.tile(np.arange(len(elements)), len(local))
    keys = np.sort(all_faces, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    order = np.lexsort(np.sort(all_faces[once], axis=1).T[::-1])
    return all_faces[once][order], owners[once][order]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh with tagged boundary facets.

    ``facet_tags`` holds one of ``"D"``, ``"N"``, ``"F"`` per boundary facet.
    Arrays are made read-only on construction.
    """

    nodes: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    element_volumes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        elements = np.array(self.elements, dtype=np.int64)
        facets = np.array(self.facets, dtype=np.int64)
        tags = np.array(self.facet_tags, dtype="<U1")
        if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
            raise GeometryError("nodes must have shape (n, 2) or (n, 3)")
        dim = nodes.shape[1]
        if elements.ndim != 2 or elements.shape[1] != dim + 1:
            raise GeometryError(f"elements must have {dim + 1} nodes each")
        if facets.ndim != 2 or facets.shape[1] != dim or len(tags) != len(facets):
            raise GeometryError(f"facets must have {dim} nodes each and one tag per facet")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise GeometryError("element node index out of range")
        vols = simplex_volumes(nodes, elements)
        scale = np.ptp(nodes, axis=0).max() ** dim
        tiny = np.abs(vols) <= _VOLUME_RTOL * scale
        if tiny.any():
            raise DegenerateElement(f"zero-volume simplex at element {int(np.argmax(tiny))}")
        if (vols < 0).any():
            raise DegenerateGeometry(f"inverted element {int(np.argmax(vols < 0))}")
        bad = set(tags.tolist()) - set(TAGS)
        if bad:
            raise GeometryError(f"unknown facet tags {sorted(bad)}")
        if not (tags == DIRICHLET).any() or not (tags == NEUMANN).any():
            raise GeometryError("Dirichlet and fixed-Neumann boundary portions must be non-empty")
        boundary, _ = extract_boundary_facets(elements)
        want = {tuple(f) for f in np.sort(boundary, axis=1).tolist()}
        have = [tuple(f) for f in np.sort(facets, axis=1).tolist()]
        if len(set(have)) != len(have) or set(have) != want:
            raise GeometryError("tagged facets must be exactly the boundary facets of the mesh")
        for name, arr in (("nodes", nodes), ("elements", elements), ("facets", facets),
                          ("facet_tags", tags), ("element_volumes", vols)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def tagged(self, tag: str) -> np.ndarray:
        """Facets carrying ``tag``."""
        return self.facets[self.facet_tags == tag]

    def tagged_nodes(self, tag: str) -> np.ndarray:
        return np.unique(self.tagged(tag))

    def diameters(self) -> np.ndarray:
        p = self.nodes[self.elements]
        nv = p.shape[1]
        d = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in combinations(range(nv), 2)]
        return np.max(d, axis=0)

    def with_nodes(self, nodes: np.ndarray) -> "Mesh":
        """Same topology and tags, moved nodes."""
        return Mesh(nodes, self.elements, self.facets, self.facet_tags)


def volume(mesh: Mesh) -> float:
    """Lebesgue measure of the meshed domain."""
    return float(np.sum(mesh.element_volumes))


# ---------------------------------------------------------------------------
# lattice builders

def _tag_by_lattice(facets: np.ndarray, idx: np.ndarray, last_i: int) -> np.ndarray:
    """Left lattice face -> D, right lattice face -> N, everything else -> F."""
    i = idx[facets]
    tags = np.full(len(facets), FREE, dtype="<U1")
    tags[(i == 0).all(axis=1)] = DIRICHLET
    tags[(i == last_i).all(axis=1)] = NEUMANN
    return tags


def rectangle_lattice(xs: np.ndarray, bottom: np.ndarray, top: np.ndarray, ny: int) -> Mesh:
    """Mapped triangle lattice between ``bottom`` and ``top`` profiles.

    Column ``i`` sits at ``xs[i]`` and spans ``[bottom[i], top[i]]`` with ``ny``
    equal layers. Cells in the lower half are cut along ``/``, cells in the upper
    half along ``\\`` so that the mesh is mirror symmetric about mid-height when
    ``ny`` is even and the profiles are.
    """
    xs = np.asarray(xs, dtype=float)
    nx = len(xs) - 1
    thick = np.asarray(top) - np.asarray(bottom)
    if (thick <= 0).any():
        raise DegenerateGeometry(f"non-positive thickness at x={xs[np.argmax(thick <= 0)]:.6g}")
    s = np.arange(ny + 1) / ny
    X = np.repeat(xs, ny + 1)
    Y = (np.asarray(bottom)[:, None] + thick[:, None] * s[None, :]).ravel()
    nodes = np.column_stack([X, Y])
    col = np.repeat(np.arange(nx + 1), ny + 1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if 2 * j < ny:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    elements = np.array(tris, dtype=np.int64)
    facets, _ = extract_boundary_facets(elements)
    return Mesh(nodes, elements, facets, _tag_by_lattice(facets, col, nx))


def box_lattice(xs: np.ndarray, ys: np.ndarray, top: np.ndarray, nz: int,
                bottom: float = 0.0) -> Mesh:
    """Mapped tetrahedral lattice under the height field ``top[i, j]``.

    Each hexahedral cell is split into six tetrahedra around its main diagonal
    (Kuhn split), which is conforming across cells.
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    top = np.asarray(top, float)
    nx, ny = len(xs) - 1, len(ys) - 1
    if (top - bottom <= 0).any():
        raise DegenerateGeometry("non-positive thickness of the box height field")
    s = np.arange(nz + 1) / nz
    I, J, K = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    Z = bottom + (top[I, J] - bottom) * s[K]
    nodes = np.column_stack([xs[I].ravel(), ys[J].ravel(), Z.ravel()])
    col = I.ravel()

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    unit = np.eye(3, dtype=int)
    paths = []
    for p in permutations(range(3)):
        c1 = unit[p[0]]
        c2 = c1 + unit[p[1]]
        paths.append([np.zeros(3, int), c1, c2, np.ones(3, int)])
    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                for path in paths:
                    tets.append([nid(i + o[0], j + o[1], k + o[2]) for o in path])
    elements = np.array(tets, dtype=np.int64)
    vols = simplex_volumes(nodes, elements)
    flip = vols < 0
    elements[flip, 0], elements[flip, 1] = elements[flip, 1].copy(), elements[flip, 0].copy()
    facets, _ = extract_boundary_facets(elements)
    return Mesh(nodes, elements, facets, _tag_by_lattice(facets, col, nx))


def rectangle_mesh(length: float = 1.0, height: float = 1.0, nx: int = 4, ny: int = 4) -> Mesh:
    xs = np.linspace(0.0, length, nx + 1)
    return rectangle_lattice(xs, np.zeros(nx + 1), np.full(nx + 1, float(height)), ny)


def box_mesh(lengths: Sequence[float] = (1.0, 1.0, 1.0), n: Sequence[int] = (2, 2, 2)) -> Mesh:
    xs = np.linspace(0.0, lengths[0], n[0] + 1)
    ys = np.linspace(0.0, lengths[1], n[1] + 1)
    return box_lattice(xs, ys, np.full((n[0] + 1, n[1] + 1), float(lengths[2])), n[2])


def single_simplex_mesh(dim: int, vol: float = 1.0) -> Mesh:
    """One right simplex of the requested volume; facet tags D, N, then F."""
    side = (vol * math.factorial(dim)) ** (1.0 / dim)
    nodes = np.vstack([np.zeros(dim), side * np.eye(dim)])
    elements = np.arange(dim + 1)[None, :]
    facets, _ = extract_boundary_facets(elements)
    tags = [DIRICHLET, NEUMANN] + [FREE] * (len(facets) - 2)
    return Mesh(nodes, elements, facets, tags)


# ---------------------------------------------------------------------------
# scenario families and designs

def _columns(n_intervals: int, resolution: int, extent: float) -> np.ndarray:
    """Uniform grid whose cell count is the smallest multiple of ``n_intervals`` >= resolution."""
    n = n_intervals * max(1, math.ceil(resolution / n_intervals))
    return np.linspace(0.0, extent, n + 1)


@dataclass(frozen=True)
class RectangleScenario:
    """2D plate with free top/bottom edges; see module docstring.

    Design layout: ``[top_1..top_k, bottom_1..bottom_k]``, outward-normal
    offsets at stations ``x_j = j L / (k + 1)``; offsets at ``x = 0`` and
    ``x = L`` are pinned to zero so the D and N edges never move.
    """

    length: float = 2.0
    height: float = 1.0
    n_stations: int = 4
    lower_offset: float = -0.45
    upper_offset: float = 0.5
    name: str = "rectangle"

    dim = 2

    def __post_init__(self):
        if self.length <= 0 or self.height <= 0 or self.n_stations < 1:
            raise GeometryError("rectangle scenario needs positive sizes and >= 1 station")
        if not self.lower_offset < 0 < self.upper_offset:
            raise GeometryError("offset bounds must bracket zero")

    @property
    def n_params(self) -> int:
        return 2 * self.n_stations

    @property
    def stations(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_stations + 2)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.n_params, self.lower_offset * self.height)
        hi = np.full(self.n_params, self.upper_offset * self.height)
        return lo, hi

    def design(self, params: Optional[Iterable[float]] = None) -> "DesignVector":
        lo, hi = self.bounds()
        p = np.zeros(self.n_params) if params is None else np.asarray(list(params), float)
        return DesignVector(p, lo, hi, self)

    def profiles(self, params: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_stations
        top_off = np.concatenate([[0.0], params[:k], [0.0]])
        bot_off = np.concatenate([[0.0], params[k:], [0.0]])
        top = self.height + np.interp(xs, self.stations, top_off)
        bottom = -np.interp(xs, self.stations, bot_off)
        return bottom, top

    def mesh(self, params: np.ndarray, resolution: int) -> Mesh:
        bottom, top = self.profiles(params, self.stations)
        if (top - bottom <= 0).any():
            raise DegenerateGeometry("top and bottom edges cross")
        xs = _columns(self.n_stations + 1, resolution, self.length)
        bottom, top = self.profiles(params, xs)
        return rectangle_lattice(xs, bottom, top, resolution)

    def exact_volume(self, params: np.ndarray) -> float:
        """Closed-form area of the piecewise-linear profile."""
        spacing = self.length / (self.n_stations + 1)
        return self.length * self.height + spacing * float(np.sum(params))

    def reference_volume(self) -> float:
        return self.length * self.height

    def hold_all_volume(self) -> float:
        return self.length * self.height * (1.0 + 2.0 * self.upper_offset)

    def mirror_permutation(self) -> np.ndarray:
        """Index map of the design under reflection about mid-height (top <-> bottom)."""
        k = self.n_stations
        return np.concatenate([np.arange(k, 2 * k), np.arange(k)])


@dataclass(frozen=True)
class BoxScenario:
    """3D box ``[0,Lx] x [0,Ly] x [0,Lz]`` with a free top height field.

    Design layout: offsets on a ``kx x ky`` station grid, x-major. Stations in
    x are interior (the D and N faces stay fixed); stations in y span
    ``[0, Ly]`` including the ends (a single y station means a y-constant field).
    """

    lengths: tuple = (2.0, 1.0, 1.0)
    n_stations: tuple = (3, 1)
    lower_offset: float = -0.45
    upper_offset: float = 0.5
    name: str = "box"

    dim = 3

    @property
    def n_params(self) -> int:
        return self.n_stations[0] * self.n_stations[1]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        h = self.lengths[2]
        return (np.full(self.n_params, self.lower_offset * h),
                np.full(self.n_params, self.upper_offset * h))

    def design(self, params: Optional[Iterable[float]] = None) -> "DesignVector":
        lo, hi = self.bounds()
        p = np.zeros(self.n_params) if params is None else np.asarray(list(params), float)
        return DesignVector(p, lo, hi, self)

    def _height(self, params: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        lx, ly, lz = self.lengths
        kx, ky = self.n_stations
        sx = np.linspace(0.0, lx, kx + 2)
        grid = np.zeros((kx + 2, ky))
        grid[1:-1, :] = np.asarray(params).reshape(kx, ky)
        along_x = np.array([np.interp(xs, sx, grid[:, j]) for j in range(ky)]).T
        if ky == 1:
            off = np.repeat(along_x, len(ys), axis=1)
        else:
            sy = np.linspace(0.0, ly, ky)
            off = np.array([np.interp(ys, sy, row) for row in along_x])
        return lz + off

    def mesh(self, params: np.ndarray, resolution: int) -> Mesh:
        lx, ly, _ = self.lengths
        kx, ky = self.n_stations
        xs = _columns(kx + 1, resolution, lx)
        ys = _columns(max(ky - 1, 1), resolution, ly)
        return box_lattice(xs, ys, self._height(params, xs, ys), resolution)

    def reference_volume(self) -> float:
        return float(np.prod(self.lengths))

    def hold_all_volume(self) -> float:
        lx, ly, lz = self.lengths
        return lx * ly * lz * (1.0 + self.upper_offset)


SCENARIOS = {"rectangle": RectangleScenario, "box": BoxScenario}


@dataclass(frozen=True, eq=False)
class DesignVector:
    """Design parameters of one scenario family together with their box bounds."""

    params: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scenario: object

    def __post_init__(self):
        p, lo, hi = (np.array(a, dtype=float).ravel() for a in (self.params, self.lower, self.upper))
        if not (len(p) == len(lo) == len(hi)):
            raise InvalidDesign("params and bounds differ in length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()) or (lo > hi).any():
            raise InvalidDesign("bounds must be finite with lower <= upper")
        if not np.isfinite(p).all():
            raise InvalidDesign("non-finite design parameter")
        out = (p < lo) | (p > hi)
        if out.any():
            i = int(np.argmax(out))
            raise InvalidDesign(f"parameter {i} = {p[i]:.6g} outside [{lo[i]:.6g}, {hi[i]:.6g}]")
        for name, arr in (("params", p), ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def scenario_id(self) -> str:
        return self.scenario.name

    def with_params(self, params) -> "DesignVector":
        return DesignVector(params, self.lower, self.upper, self.scenario)

    def project(self, params) -> "DesignVector":
        return self.with_params(np.clip(params, self.lower, self.upper))


def generate_mesh(design: DesignVector, resolution: int) -> Mesh:
    """Mesh of the shape described by ``design`` at the given lattice resolution."""
    if int(resolution) != resolution or resolution < 1:
        raise GeometryError("resolution must be a positive integer")
    if not isinstance(design, DesignVector):
        raise InvalidDesign("expected a DesignVector")
    return design.scenario.mesh(design.params, int(resolution))


# ---------------------------------------------------------------------------
# admissibility

@dataclass(frozen=True)
class AdmissibilityConstants:
    """Cone opening half-angle ``theta``, cone height ``l``, ball radius ``r``, minimum thickness."""

    theta: float
    l: float
    r: float
    min_thickness: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi / 2:
            raise GeometryError("theta must lie in ]0, pi/2[")
        if not (self.l > 0 and self.r > 0 and 2 * self.r <= self.l):
            raise GeometryError("need l > 0, r > 0 and 2 r <= l")
        if self.min_thickness <= 0:
            raise GeometryError("min_thickness must be positive")

    @classmethod
    def for_height(cls, height: float) -> "AdmissibilityConstants":
        """Defaults used by the built-in scenarios, scaled to the reference height."""
        return cls(theta=math.pi / 6, l=0.2 * height, r=0.05 * height, min_thickness=0.2 * height)


@dataclass
class AdmissibilityReport:
    ok: bool
    thickness_violations: list = field(default_factory=list)  # (node, thickness)
    cone_violations: list = field(default_factory=list)  # node indices

    def __bool__(self):
        return self.ok


class PointLocator:
    """Brute-force point-in-mesh test via barycentric coordinates."""

    def __init__(self, mesh: Mesh, tol: float = 1e-9):
        p = mesh.nodes[mesh.elements]
        self.origin = p[:, 0]
        self.inv = np.linalg.inv(np.transpose(p[:, 1:] - self.origin[:, None, :], (0, 2, 1)))
        self.tol = tol

    def contains(self, points: np.ndarray, chunk: int = 512) -> np.ndarray:
        points = np.atleast_2d(points)
        out = np.zeros(len(points), dtype=bool)
        for s in range(0, len(points), chunk):
            d = points[s:s + chunk, None, :] - self.origin[None]
            lam = np.einsum("eij,pej->pei", self.inv, d)
            inside = (lam >= -self.tol).all(axis=2) & (lam.sum(axis=2) <= 1 + self.tol)
            out[s:s + chunk] = inside.any(axis=1)
        return out


def _direction_grid(dim: int, n: int) -> np.ndarray:
    if dim == 2:
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(t), np.sin(t)])
    # Fibonacci sphere plus the coordinate axes
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5 ** 0.5) * i
    rr = np.sqrt(1 - z * z)
    pts = np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])
    # box corners and edges need the exact diagonal directions
    diag = np.array([v for v in np.ndindex(3, 3, 3) if v != (1, 1, 1)], dtype=float) - 1.0
    diag /= np.linalg.norm(diag, axis=1)[:, None]
    return np.vstack([diag, pts])


def _cone_rays(zeta: np.ndarray, theta: float, n_around: int = 6) -> np.ndarray:
    """Unit rays on the axis and (just inside) the mantle of the cone around ``zeta``."""
    half = theta * (1 - 1e-6)
    if len(zeta) == 2:
        c, s = math.cos(half), math.sin(half)
        rot = np.array([[c, -s], [s, c]])
        return np.array([zeta, rot @ zeta, rot.T @ zeta])
    a = np.eye(3)[np.argmin(np.abs(zeta))]
    e1 = np.cross(zeta, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(zeta, e1)
    t = 2 * np.pi * np.arange(n_around) / n_around
    mantle = (math.cos(half) * zeta[None]
              + math.sin(half) * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2))
    return np.vstack([zeta, mantle])


def _facet_normals(mesh: Mesh, facets: np.ndarray) -> np.ndarray:
    p = mesh.nodes[facets]
    if mesh.dim == 2:
        t = p[:, 1] - p[:, 0]
        nrm = np.column_stack([t[:, 1], -t[:, 0]])
    else:
        nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    # orient outward: away from the centroid of the owning element
    all_f, all_owner = extract_boundary_facets(mesh.elements)
    key = {tuple(sorted(f)): o for f, o in zip(all_f.tolist(), all_owner.tolist())}
    own = np.array([key[tuple(sorted(f))] for f in facets.tolist()])
    cen = mesh.nodes[mesh.elements[own]].mean(axis=1)
    sgn = np.sign(np.einsum("ij,ij->i", nrm, p.mean(axis=1) - cen))
    return nrm * sgn[:, None]


def _ray_exit(mesh: Mesh, origin: np.ndarray, direction: np.ndarray, eps: float) -> float:
    """Distance from ``origin`` along ``direction`` to the first boundary facet hit beyond ``eps``."""
    p = mesh.nodes[mesh.facets]
    if mesh.dim == 2:
        a, b = p[:, 0], p[:, 1]
        e = b - a
        den = direction[0] * (-e[:, 1]) - direction[1] * (-e[:, 0])
        ok = np.abs(den) > 1e-14
        rhs = a - origin
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (rhs[:, 0] * (-e[:, 1]) - rhs[:, 1] * (-e[:, 0])) / den
            u = (direction[0] * rhs[:, 1] - direction[1] * rhs[:, 0]) / den
        hit = ok & (u >= -1e-12) & (u <= 1 + 1e-12) & (s > eps)
    else:
        v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
        e1, e2 = v1 - v0, v2 - v0
        pv = np.cross(direction[None], e2)
        det = np.einsum("ij,ij->i", e1, pv)
        ok = np.abs(det) > 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            tv = origin[None] - v0
            u = np.einsum("ij,ij->i", tv, pv) / det
            qv = np.cross(tv, e1)
            v = (qv @ direction) / det
            s = np.einsum("ij,ij->i", e2, qv) / det
            hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (s > eps)
    return float(s[hit].min()) if hit.any() else math.inf


def local_thickness(mesh: Mesh, nodes: Optional[np.ndarray] = None) -> dict:
    """Thickness through each free-boundary node, measured along the inward normal."""
    free = mesh.tagged(FREE)
    normals = _facet_normals(mesh, free)
    if nodes is None:
        nodes = np.unique(free)
    scale = np.ptp(mesh.nodes, axis=0).max()
    out = {}
    for v in np.asarray(nodes).tolist():
        adj = (free == v).any(axis=1)
        nrm = normals[adj].sum(axis=0)
        norm = np.linalg.norm(nrm)
        if norm < 1e-12:
            continue
        out[v] = _ray_exit(mesh, mesh.nodes[v], -nrm / norm, 1e-9 * scale)
    return out


def check_admissible(mesh: Mesh, consts: AdmissibilityConstants, stride: int = 1,
                     n_directions: Optional[int] = None) -> AdmissibilityReport:
    """Approximate discrete test of the minimum-thickness and uniform cone conditions.

    Every ``stride``-th boundary node is sampled. A node passes the cone test
    if some direction of a fixed grid carries a cone of height ``l`` and
    half-angle ``theta`` whose sample points stay inside the mesh from every
    sampled apex in ``B(x, r)``.
    """
    report = AdmissibilityReport(ok=True)
    free_nodes = np.unique(mesh.tagged(FREE))[::stride]
    for v, t in local_thickness(mesh, free_nodes).items():
        if t < consts.min_thickness:
            report.thickness_violations.append((int(v), float(t)))

    locator = PointLocator(mesh)
    dim = mesh.dim
    dirs = _direction_grid(dim, n_directions or (24 if dim == 2 else 48))
    apex_dirs = _direction_grid(dim, 8)
    heights = consts.l * np.array([0.25, 0.5, 0.75, 1.0 - 1e-6])
    rays = np.stack([_cone_rays(z, consts.theta) for z in dirs])  # (n_dir, n_ray, dim)
    normals = _facet_normals(mesh, mesh.facets)
    for v in np.unique(mesh.facets)[::stride].tolist():
        x = mesh.nodes[v]
        apexes = np.vstack([x] + [x + rho * apex_dirs for rho in (0.5 * consts.r, 0.95 * consts.r)])
        apexes = apexes[locator.contains(apexes)]
        inward = -normals[(mesh.facets == v).any(axis=1)].sum(axis=0)
        order = np.argsort(-(dirs @ inward))
        found = False
        for batch in np.array_split(order, max(1, len(order) // 4)):
            pts = (apexes[None, :, None, None, :]
                   + heights[None, None, None, :, None] * rays[batch][:, None, :, None, :])
            inside = locator.contains(pts.reshape(-1, dim)).reshape(len(batch), -1)
            if inside.all(axis=1).any():
                found = True
                break
        if not found:
            report.cone_violations.append(int(v))
    report.ok = not report.thickness_violations and not report.cone_violations
    return report


# ---------------------------------------------------------------------------
# ASCII mesh format

def write_mesh(mesh: Mesh, path) -> None:
    """Write ``dim n_nodes n_elements n_facets`` then nodes, elements and tagged facets."""
    lines = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} {len(mesh.facets)}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in mesh.nodes.tolist()]
    lines += [" ".join(str(i) for i in row) for row in mesh.elements.tolist()]
    lines += [" ".join(str(i) for i in row) + f" {t}"
              for row, t in zip(mesh.facets.tolist(), mesh.facet_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        dim, nn, ne, nf = (int(v) for v in rows[0])
        body = rows[1:]
        if len(body) != nn + ne + nf:
            raise ValueError("line count does not match header")
        nodes = np.array(body[:nn], dtype=float)
        elements = np.array(body[nn:nn + ne], dtype=np.int64)
        facet_rows = body[nn + ne:]
        facets = np.array([r[:-1] for r in facet_rows], dtype=np.int64)
        tags = [r[-1] for r in facet_rows]
    except (ValueError, IndexError) as exc:
        raise GeometryError(f"malformed mesh file {path}: {exc}") from exc
    if nodes.shape[1] != dim:
        raise GeometryError("node coordinates do not match dim")
    return Mesh(nodes, elements, facets, tags)
