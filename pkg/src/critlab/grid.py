"""Grids, nodal fields, and quadrature.

Two domain discretizations are supported:

* :class:`RadialGrid` reduces a ball in dimension ``n >= 3`` to the radial
  coordinate.  Integrals carry the measure ``omega_{n-1} r^{n-1} dr`` where
  ``omega_{n-1}`` is the area of the unit sphere, so a nodal profile stands
  for the radially symmetric function it samples.  Nodes may be graded
  toward the origin so that profiles concentrating at scales down to 1e-3
  and below stay resolved.
* :class:`TensorGrid` is a uniform n=3 box used to cross-check the radial
  reduction on problems with genuinely three-dimensional boundary data.

Quadrature uses midpoint (control-volume) node weights on radial grids and
tensor-product trapezoid weights on boxes.  Both integrate smooth functions
with O(h^2) error and reduce in a fixed summation order, so repeated runs
give bit-identical results.  Gradient energies use midpoint differences on
cell faces; this is exactly the quadratic form of the flux-form stiffness
operator assembled in :mod:`critlab.elliptic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    GeometryError,
    InvalidFieldError,
    ValidationError,
)

__all__ = [
    "RadialGrid",
    "TensorGrid",
    "Field",
    "unit_sphere_area",
    "integrate",
    "h1_seminorm_weighted",
]

Grid = Union["RadialGrid", "TensorGrid"]


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n, ``2 pi^{n/2} / Gamma(n/2)``."""
    if n < 2:
        raise ValidationError(f"dimension must be >= 2, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Radial reduction of the ball of radius ``nodes[-1]`` in R^n.

    ``nodes`` must be strictly increasing with ``nodes[0] == 0``.  The last
    node is the only boundary node; all others, including the center, are
    interior degrees of freedom.
    """

    n: int
    nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError(f"radial grids need integer n >= 3, got {self.n}")
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "n", int(self.n))
        if nodes.ndim != 1 or nodes.size < 17:
            raise ValidationError("radial grid needs at least 17 nodes (16 cells)")
        if nodes[0] != 0.0:
            raise ValidationError("first radial node must sit at r = 0")
        if not np.all(np.diff(nodes) > 0):
            raise ValidationError("radial nodes must be strictly increasing")
        if not np.isfinite(nodes[-1]) or nodes[-1] <= 0:
            raise ValidationError("outer radius must be positive and finite")

    # -- constructors ---------------------------------------------------

    @classmethod
    def uniform(cls, n: int, radius: float, m: int) -> "RadialGrid":
        """Equispaced nodes 0 = r_0 < ... < r_m = radius."""
        return cls(n, np.linspace(0.0, float(radius), int(m) + 1))

    @classmethod
    def geometric(
        cls, n: int, radius: float, m: int, rmin_frac: float = 1e-5
    ) -> "RadialGrid":
        """Log-uniform nodes from ``rmin_frac * radius`` to ``radius``.

        The origin is prepended, giving m+1 nodes total.  Spacing grows by a
        constant ratio, so the relative resolution h(r)/r is roughly uniform
        over five decades; profiles concentrating near the origin remain
        resolved without wasting nodes near the boundary.
        """
        if not 0 < rmin_frac < 0.5:
            raise ValidationError(f"rmin_frac must be in (0, 0.5), got {rmin_frac}")
        radius = float(radius)
        ring = np.geomspace(rmin_frac * radius, radius, int(m))
        return cls(n, np.concatenate([[0.0], ring]))

    @classmethod
    def power_law(
        cls, n: int, radius: float, m: int, strength: float = 2.0
    ) -> "RadialGrid":
        """Nodes ``radius * (i/m)**strength``; strength 1 recovers uniform."""
        if strength < 1.0:
            raise ValidationError(f"grading strength must be >= 1, got {strength}")
        i = np.arange(int(m) + 1, dtype=float) / m
        return cls(n, float(radius) * i**strength)

    # -- geometry -------------------------------------------------------

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    @property
    def num_nodes(self) -> int:
        return self.nodes.size

    @property
    def num_interior(self) -> int:
        return self.nodes.size - 1

    @property
    def sphere_area(self) -> float:
        return unit_sphere_area(self.n)

    @property
    def spacings(self) -> np.ndarray:
        """Cell widths h_i = r_{i+1} - r_i."""
        return self._cached("spacings", lambda: np.diff(self.nodes))

    @property
    def face_radii(self) -> np.ndarray:
        """Cell midpoints, where gradients and weights are sampled."""
        return self._cached(
            "face_radii", lambda: 0.5 * (self.nodes[:-1] + self.nodes[1:])
        )

    @property
    def face_areas(self) -> np.ndarray:
        """Sphere areas omega_{n-1} r^{n-1} at the cell midpoints."""
        return self._cached(
            "face_areas", lambda: self.sphere_area * self.face_radii ** (self.n - 1)
        )

    @property
    def node_weights(self) -> np.ndarray:
        """Control-volume quadrature weights.

        Node i owns the shell between the adjacent cell midpoints; the shell
        volume is integrated exactly, so the weights sum to the ball volume.
        """

        def build():
            fences = np.concatenate([[0.0], self.face_radii, [self.radius]])
            return self.sphere_area * np.diff(fences**self.n) / self.n

        return self._cached("node_weights", build)

    @property
    def mean_spacing(self) -> float:
        return self.radius / (self.num_nodes - 1)

    def nodes_inside(self, r: float) -> int:
        """Number of nodes with radius strictly below r."""
        return int(np.searchsorted(self.nodes, r, side="left"))

    def descriptor(self) -> str:
        return (
            f"radial(n={self.n}, radius={self.radius:g}, "
            f"cells={self.num_nodes - 1})"
        )

    def _cached(self, key: str, build: Callable[[], np.ndarray]):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Uniform tensor-product grid on a box in R^3.

    ``origin`` is the lower corner, ``spacing`` the common mesh width, and
    ``shape`` the node count per axis.  The boundary consists of all nodes on
    a face of the box.
    """

    origin: tuple
    spacing: float
    shape: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    n: int = 3

    def __post_init__(self):
        if len(self.origin) != 3 or len(self.shape) != 3:
            raise ValidationError("tensor grids are three-dimensional only")
        if self.spacing <= 0 or not math.isfinite(self.spacing):
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        if any(int(s) != s or s < 4 for s in self.shape):
            raise ValidationError("tensor grids need at least 4 nodes per axis")
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float], m: int) -> "TensorGrid":
        """Box [lo_1, hi_1] x ... with m cells per axis (m+1 nodes).

        Extents must agree across axes so the spacing stays uniform.
        """
        lo = [float(c) for c in lo]
        hi = [float(c) for c in hi]
        extents = [b - a for a, b in zip(lo, hi)]
        if any(e <= 0 for e in extents):
            raise GeometryError(f"box extents must be positive, got {extents}")
        if max(extents) - min(extents) > 1e-12 * max(extents):
            raise GeometryError("box extents must match so the spacing is uniform")
        m = int(m)
        return cls(tuple(lo), extents[0] / m, (m + 1, m + 1, m + 1))

    @property
    def axes(self) -> tuple:
        def build():
            return tuple(
                self.origin[k] + self.spacing * np.arange(self.shape[k])
                for k in range(3)
            )

        return self._cached("axes", build)

    @property
    def boundary_mask(self) -> np.ndarray:
        def build():
            mask = np.zeros(self.shape, dtype=bool)
            for k in range(3):
                idx = [slice(None)] * 3
                idx[k] = 0
                mask[tuple(idx)] = True
                idx[k] = -1
                mask[tuple(idx)] = True
            return mask

        return self._cached("boundary_mask", build)

    @property
    def node_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights; they sum to the box volume."""

        def build():
            one_d = []
            for k in range(3):
                w = np.full(self.shape[k], self.spacing)
                w[0] = w[-1] = 0.5 * self.spacing
                one_d.append(w)
            return (
                one_d[0][:, None, None]
                * one_d[1][None, :, None]
                * one_d[2][None, None, :]
            )

        return self._cached("node_weights", build)

    def meshgrid(self) -> tuple:
        return self._cached(
            "meshgrid", lambda: np.meshgrid(*self.axes, indexing="ij")
        )

    def face_midpoints(self, axis: int) -> tuple:
        """Coordinate arrays of the cell-face midpoints normal to ``axis``."""
        coords = list(self.axes)
        coords[axis] = 0.5 * (coords[axis][:-1] + coords[axis][1:])
        return tuple(np.meshgrid(*coords, indexing="ij"))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def descriptor(self) -> str:
        return (
            f"tensor(origin={self.origin}, spacing={self.spacing:g}, "
            f"shape={self.shape})"
        )

    def _cached(self, key: str, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]


@dataclass
class Field:
    """Nodal values attached to a grid.

    Radial fields store one value per node; the final entry is the boundary
    trace.  Tensor fields store the full (nx, ny, nz) array; boundary values
    live on the masked border nodes.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if isinstance(self.grid, RadialGrid):
            if values.shape != (self.grid.num_nodes,):
                raise DimensionMismatchError(
                    f"radial field needs shape ({self.grid.num_nodes},), "
                    f"got {values.shape}"
                )
        elif isinstance(self.grid, TensorGrid):
            if values.shape != self.grid.shape:
                raise DimensionMismatchError(
                    f"tensor field needs shape {self.grid.shape}, got {values.shape}"
                )
        else:
            raise ValidationError(f"unsupported grid type {type(self.grid)!r}")
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        shape = (grid.num_nodes,) if isinstance(grid, RadialGrid) else grid.shape
        return cls(grid, np.zeros(shape))

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "Field":
        if isinstance(grid, RadialGrid):
            return cls(grid, np.asarray(fn(grid.nodes), dtype=float))
        x, y, z = grid.meshgrid()
        return cls(grid, np.asarray(fn(x, y, z), dtype=float))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def boundary_values(self) -> np.ndarray:
        if isinstance(self.grid, RadialGrid):
            return self.values[-1:]
        return self.values[self.grid.boundary_mask]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise InvalidFieldError("field contains non-finite values")


def integrate(f: Field, power: float = 1.0) -> float:
    """Integral of |f|^power over the domain.

    ``power`` must be at least 1.  Powers are applied pointwise to the nodal
    values before the weighted reduction, so the result is the quadrature of
    the sampled ``|f|^power``.
    """
    if power < 1.0:
        raise ValidationError(f"integrate needs power >= 1, got {power}")
    f.check_finite()
    w = f.grid.node_weights
    if power == 1.0:
        vals = np.abs(f.values)
    elif power == 2.0:
        vals = f.values * f.values
    else:
        vals = np.abs(f.values) ** power
    return float(np.dot(w.ravel(), vals.ravel()))


def _radial_face_weight(p, grid: RadialGrid) -> np.ndarray:
    if callable(p):
        return np.asarray(p(grid.face_radii), dtype=float)
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        return np.broadcast_to(arr, grid.face_radii.shape)
    if arr.shape != grid.face_radii.shape:
        raise DimensionMismatchError(
            f"face weight needs shape {grid.face_radii.shape}, got {arr.shape}"
        )
    return arr


def h1_seminorm_weighted(f: Field, p=1.0) -> float:
    """Weighted gradient energy ``int p |grad f|^2``.

    Gradients are midpoint differences across cell faces; ``p`` may be a
    scalar, a callable sampled at the face midpoints, or (radially) an array
    of face values.  Multiplying ``p`` by a constant scales the result by
    exactly that constant.
    """
    f.check_finite()
    grid = f.grid
    if isinstance(grid, RadialGrid):
        pf = _radial_face_weight(p, grid)
        du = np.diff(f.values) / grid.spacings
        return float(np.dot(pf * grid.face_areas * grid.spacings, du * du))

    total = 0.0
    h = grid.spacing
    for axis in range(3):
        du = np.diff(f.values, axis=axis) / h
        if callable(p):
            pf = np.asarray(p(*grid.face_midpoints(axis)), dtype=float)
        else:
            pf = np.asarray(p, dtype=float)
            if pf.ndim != 0:
                raise DimensionMismatchError(
                    "tensor face weights must be scalars or callables"
                )
        total += float(np.sum(pf * du * du * _tensor_face_volumes(grid, axis)))
    return total


def _tensor_face_volumes(grid: TensorGrid, axis: int) -> np.ndarray:
    """Quadrature volume attached to each cell face normal to ``axis``.

    Trapezoid weights transverse to the face, full spacing along it.  Cached
    per grid since the flow loops reuse them heavily.
    """
    key = f"face_volumes_{axis}"

    def build():
        one_d = []
        for k in range(3):
            if k == axis:
                one_d.append(np.full(grid.shape[k] - 1, grid.spacing))
            else:
                w = np.full(grid.shape[k], grid.spacing)
                w[0] = w[-1] = 0.5 * grid.spacing
                one_d.append(w)
        return (
            one_d[0][:, None, None]
            * one_d[1][None, :, None]
            * one_d[2][None, None, :]
        )

    return grid._cached(key, build)
