"""Finite-element thermal systems for the bar and plate test problems.

Two element families are provided:

* a two-node linear fin element for a 1D bar of length ``L`` with
  cross-section area ``A`` and perimeter ``P``; the lateral surface convects
  to ambient and the flux enters through the end face at ``x = 0``;
* a four-node bilinear quadrilateral (2x2 Gauss) for a thin plate whose two
  faces convect to ambient, with prescribed flux on boundary edge segments.

Units are cm, g, s, degC and W throughout.  Node numbering is lexicographic:
along ``x`` for the bar, and ``x`` fastest then ``y`` for the plate, so the
node at column ``i`` and row ``j`` has index ``j * (nx + 1) + i``.  All
indices are zero-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "MaterialProperties",
    "MATERIALS",
    "EdgeRegion",
    "Mesh",
    "ThermalSystem",
    "SensorSelector",
    "build_mesh_1d",
    "build_mesh_2d",
    "assemble",
    "build_sensor_selector",
    "penetration_depth",
]


@dataclass(frozen=True)
class MaterialProperties:
    """Homogeneous, temperature-independent material and ambient data."""

    density: float
    specific_heat: float
    conductivity: float
    convection_coeff: float
    ambient_temp: float = 40.0
    initial_temp: float = 40.0

    def __post_init__(self):
        for name in ("density", "specific_heat", "conductivity"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.convection_coeff >= 0:
            raise InvalidArgumentError("convection_coeff must be non-negative")

    @property
    def diffusivity(self) -> float:
        """Thermal diffusivity ``k / (rho c_p)`` in cm^2/s."""
        return self.conductivity / (self.density * self.specific_heat)


# Table of the benchmark materials (1D bar) and the plate material (2D).
MATERIALS = {
    "silicon": MaterialProperties(2.330, 0.700, 1.300, 0.005),
    "carbon_carbon": MaterialProperties(1.720, 0.700, 0.125, 0.005),
    "stainless_steel": MaterialProperties(7.860, 0.500, 0.162, 0.005),
    "plate": MaterialProperties(1.330, 0.940, 2.330, 0.0005),
}


_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class EdgeRegion:
    """A flux region on the plate boundary.

    ``start``/``end`` bound the coordinate running along the edge (``x`` for
    bottom/top, ``y`` for left/right); ``None`` means the full edge.  A
    boundary segment belongs to the region when its midpoint lies inside.
    """

    side: str
    start: float | None = None
    end: float | None = None

    def __post_init__(self):
        if self.side not in _SIDES:
            raise InvalidArgumentError(
                f"unknown edge side {self.side!r}; expected one of {_SIDES}")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured mesh with flux-region bookkeeping.

    ``flux_regions[j]`` holds the boundary facets of region ``j``: node
    indices of shape ``(k, 1)`` in 1D and edge node pairs ``(k, 2)`` in 2D.
    """

    dimension: int
    coords: np.ndarray
    elements: np.ndarray
    flux_regions: tuple
    geometry: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise InvalidArgumentError("dimension must be 1 or 2")
        n = len(self.coords)
        if len(self.elements) < 1:
            raise InvalidArgumentError("mesh needs at least one element")
        if self.elements.min() < 0 or self.elements.max() >= n:
            raise InvalidArgumentError("element connectivity out of range")
        if not self.flux_regions:
            raise InvalidArgumentError("mesh needs at least one flux region")
        seen: set = set()
        for j, region in enumerate(self.flux_regions):
            if len(region) == 0:
                raise InvalidArgumentError(f"flux region {j} is empty")
            if region.min() < 0 or region.max() >= n:
                raise InvalidArgumentError(f"flux region {j} out of range")
            facets = {tuple(sorted(f)) for f in region.tolist()}
            if facets & seen:
                raise InvalidArgumentError(
                    f"flux region {j} overlaps another flux region")
            seen |= facets

    @property
    def num_nodes(self) -> int:
        return len(self.coords)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def num_flux_regions(self) -> int:
        return len(self.flux_regions)

    def nearest_node(self, point) -> int:
        """Index of the node closest to ``point``."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        d = np.linalg.norm(self.coords - p[None, :], axis=1)
        return int(np.argmin(d))


def build_mesh_1d(length: float, perimeter: float, area: float,
                  num_elements: int) -> Mesh:
    """Uniform bar mesh with the flux region at node 0 (``x = 0``).

    The far end is insulated and the lateral surface convects.
    """
    if not (length > 0 and perimeter > 0 and area > 0):
        raise InvalidArgumentError("bar geometry must be positive")
    if int(num_elements) != num_elements or num_elements < 1:
        raise InvalidArgumentError("num_elements must be an integer >= 1")
    ne = int(num_elements)
    coords = np.linspace(0.0, length, ne + 1)[:, None]
    elements = np.column_stack([np.arange(ne), np.arange(1, ne + 1)])
    return Mesh(
        dimension=1,
        coords=coords,
        elements=elements,
        flux_regions=(np.array([[0]]),),
        geometry={"length": float(length), "perimeter": float(perimeter),
                  "area": float(area)},
    )


def _edge_segments(side, nx, ny):
    """Boundary segments of one side as (node_a, node_b, local_index)."""
    if side == "bottom":
        nodes = [i for i in range(nx + 1)]
    elif side == "top":
        nodes = [ny * (nx + 1) + i for i in range(nx + 1)]
    elif side == "left":
        nodes = [j * (nx + 1) for j in range(ny + 1)]
    else:
        nodes = [j * (nx + 1) + nx for j in range(ny + 1)]
    return [(nodes[k], nodes[k + 1]) for k in range(len(nodes) - 1)]


def build_mesh_2d(width: float, height: float, thickness: float, nx: int,
                  ny: int, flux_regions: Sequence[EdgeRegion]) -> Mesh:
    """Structured ``nx`` x ``ny`` quad mesh of a thin plate.

    Parameters
    ----------
    width, height, thickness : float
        Plate dimensions in cm.
    nx, ny : int
        Element counts along ``x`` and ``y``.
    flux_regions : sequence of EdgeRegion
        One entry per unknown flux component, in order.

    Raises
    ------
    InvalidArgumentError
        For non-positive sizes, empty or overlapping flux regions.
    """
    if not (width > 0 and height > 0 and thickness > 0):
        raise InvalidArgumentError("plate geometry must be positive")
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("nx and ny must be >= 1")
    if not flux_regions:
        raise InvalidArgumentError("at least one flux region is required")
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    coords = np.column_stack([gx.ravel(), gy.ravel()])

    elements = []
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            elements.append((n0, n0 + 1, n0 + nx + 2, n0 + nx + 1))
    elements = np.array(elements)

    regions = []
    for k, region in enumerate(flux_regions):
        if isinstance(region, dict):
            region = EdgeRegion(**region)
        along = 0 if region.side in ("bottom", "top") else 1
        lo = -math.inf if region.start is None else region.start
        hi = math.inf if region.end is None else region.end
        segs = []
        for a, b in _edge_segments(region.side, nx, ny):
            mid = 0.5 * (coords[a, along] + coords[b, along])
            if lo <= mid <= hi:
                segs.append((a, b))
        if not segs:
            raise InvalidArgumentError(
                f"flux region {k} ({region}) contains no boundary segment")
        regions.append(np.array(segs))
    return Mesh(
        dimension=2,
        coords=coords,
        elements=elements,
        flux_regions=tuple(regions),
        geometry={"width": float(width), "height": float(height),
                  "thickness": float(thickness), "nx": int(nx),
                  "ny": int(ny)},
    )


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ThermalSystem:
    """Assembled semi-discrete system ``C dT/dt + K T = q_g(t)``.

    ``q_g = unit_flux @ q + convection_load`` where ``q`` holds one flux
    value (W/cm^2) per flux region.
    """

    capacity: np.ndarray
    conductance: np.ndarray
    convection_load: np.ndarray
    unit_flux: np.ndarray
    mesh: Mesh
    material: MaterialProperties
    lumped: bool = False

    @property
    def num_dofs(self) -> int:
        return self.capacity.shape[0]

    @property
    def num_flux_regions(self) -> int:
        return self.unit_flux.shape[1]

    def load(self, q) -> np.ndarray:
        """Global nodal load vector for the flux vector ``q``."""
        return self.unit_flux @ np.atleast_1d(q) + self.convection_load


def _bar_matrices(mesh, mat):
    g = mesh.geometry
    area, perim = g["area"], g["perimeter"]
    n = mesh.num_nodes
    C = np.zeros((n, n))
    K = np.zeros((n, n))
    f = np.zeros(n)
    mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    stiff = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for e in mesh.elements:
        ell = mesh.coords[e[1], 0] - mesh.coords[e[0], 0]
        idx = np.ix_(e, e)
        C[idx] += mat.density * mat.specific_heat * area * ell * mass
        K[idx] += mat.conductivity * area / ell * stiff
        K[idx] += mat.convection_coeff * perim * ell * mass
        f[e] += mat.convection_coeff * perim * mat.ambient_temp * ell / 2.0
    Q = np.zeros((n, 1))
    for node in mesh.flux_regions[0][:, 0]:
        Q[node, 0] += area
    return C, K, f, Q


_GAUSS = (-1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))
_QUAD_XI = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def _quad_element(xy):
    """Consistent mass, stiffness and load integrals of one bilinear quad."""
    m = np.zeros((4, 4))
    s = np.zeros((4, 4))
    v = np.zeros(4)
    for xi in _GAUSS:
        for eta in _GAUSS:
            N = 0.25 * (1 + _QUAD_XI[:, 0] * xi) * (1 + _QUAD_XI[:, 1] * eta)
            dN = 0.25 * np.vstack([
                _QUAD_XI[:, 0] * (1 + _QUAD_XI[:, 1] * eta),
                _QUAD_XI[:, 1] * (1 + _QUAD_XI[:, 0] * xi),
            ])
            J = dN @ xy
            detJ = np.linalg.det(J)
            B = np.linalg.solve(J, dN)
            m += np.outer(N, N) * detJ
            s += B.T @ B * detJ
            v += N * detJ
    return m, s, v


def _plate_matrices(mesh, mat):
    g = mesh.geometry
    t = g["thickness"]
    n = mesh.num_nodes
    C = np.zeros((n, n))
    K = np.zeros((n, n))
    f = np.zeros(n)
    # Both faces convect: 2h per unit plate area.
    h2 = 2.0 * mat.convection_coeff
    for e in mesh.elements:
        m, s, v = _quad_element(mesh.coords[e])
        idx = np.ix_(e, e)
        C[idx] += mat.density * mat.specific_heat * t * m
        K[idx] += mat.conductivity * t * s + h2 * m
        f[e] += h2 * mat.ambient_temp * v
    Q = np.zeros((n, mesh.num_flux_regions))
    for j, region in enumerate(mesh.flux_regions):
        for a, b in region:
            seg = np.linalg.norm(mesh.coords[b] - mesh.coords[a])
            Q[a, j] += 0.5 * seg * t
            Q[b, j] += 0.5 * seg * t
    return C, K, f, Q


def assemble(mesh: Mesh, material: MaterialProperties,
             lumped: bool = False) -> ThermalSystem:
    """Galerkin assembly of capacity, conductance, loads and unit fluxes.

    ``lumped=True`` replaces the consistent capacity matrix with its
    row-sum diagonal.  Explicit integration (``beta`` near 0) with a lumped
    capacity is prone to instability on fine meshes.
    """
    if mesh.dimension == 1:
        C, K, f, Q = _bar_matrices(mesh, material)
    else:
        C, K, f, Q = _plate_matrices(mesh, material)
    if lumped:
        C = np.diag(C.sum(axis=1))
    return ThermalSystem(
        capacity=_frozen(C),
        conductance=_frozen(K),
        convection_load=_frozen(f),
        unit_flux=_frozen(Q),
        mesh=mesh,
        material=material,
        lumped=bool(lumped),
    )


@dataclass(frozen=True, eq=False)
class SensorSelector:
    """Boolean row-selection operator ``L_s`` for the sensed nodes."""

    nodes: tuple
    num_dofs: int

    @property
    def num_sensors(self) -> int:
        return len(self.nodes)

    @property
    def matrix(self) -> np.ndarray:
        L = np.zeros((len(self.nodes), self.num_dofs))
        L[np.arange(len(self.nodes)), list(self.nodes)] = 1.0
        return L

    def extract(self, values: np.ndarray) -> np.ndarray:
        """Pick sensor entries along the last axis, in sensor order."""
        return np.asarray(values)[..., list(self.nodes)]


def build_sensor_selector(mesh_or_dofs, sensor_nodes) -> SensorSelector:
    """Selection operator for ``sensor_nodes`` (zero-based, ordered).

    ``mesh_or_dofs`` is a :class:`Mesh` or a DOF count.
    """
    n = mesh_or_dofs.num_nodes if isinstance(mesh_or_dofs, Mesh) \
        else int(mesh_or_dofs)
    nodes = tuple(int(i) for i in np.atleast_1d(sensor_nodes))
    if not nodes:
        raise InvalidArgumentError("at least one sensor is required")
    if len(set(nodes)) != len(nodes):
        raise InvalidArgumentError("duplicate sensor node")
    if min(nodes) < 0 or max(nodes) >= n:
        raise InvalidArgumentError("sensor node index out of range")
    return SensorSelector(nodes=nodes, num_dofs=n)


def penetration_depth(kappa: float, time: float, gamma: float = 4.0) -> float:
    """Thermal penetration depth ``gamma * sqrt(kappa * t)`` in cm."""
    if kappa < 0 or time < 0 or gamma < 0:
        raise InvalidArgumentError("penetration_depth arguments must be >= 0")
    return gamma * math.sqrt(kappa * time)
