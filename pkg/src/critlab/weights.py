"""Coefficient weights and Dirichlet boundary data.

The energy density is ``p(x) |grad u|^2`` with ``p`` bounded between
positive constants.  Three weight shapes cover every experiment here:

* ``constant``: p = p0 everywhere.
* ``power_bump``: ``p0 + gamma * min(|x - a|, r_bump)**alpha``, a weight
  with a single flat-bottomed well at ``a``.  The cap at ``r_bump`` keeps
  the weight bounded on large domains; inside radius ``r_bump`` the profile
  is exactly the power law.
* ``tabulated``: arbitrary positive nodal values on a radial grid.

The flatness exponent ``alpha`` controls how degenerate the minimum is.
Values above 1 matter for attainment predictions; smaller positive values
are still allowed so expansion sweeps can probe the full exponent range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    GeometryError,
    OutOfDomainError,
    ValidationError,
)
from .grid import Field, Grid, RadialGrid, TensorGrid

__all__ = [
    "WeightSpec",
    "WeightReport",
    "BoundarySpec",
    "eval_weight",
    "node_weight_values",
    "face_weight_values",
    "validate_weight",
    "boundary_values",
]


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    p0: float = 1.0
    gamma: float = 0.0
    alpha: float = 1.0
    center: Optional[tuple] = None
    r_bump: float = 1.0
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "power_bump", "tabulated"):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and self.p0 <= 0:
            raise ValidationError(f"constant weight must be positive, got {self.p0}")
        if self.kind == "power_bump":
            if self.p0 <= 0:
                raise ValidationError(f"bump floor must be positive, got {self.p0}")
            if self.gamma <= 0:
                raise ValidationError(f"bump height must be positive, got {self.gamma}")
            if self.alpha <= 0:
                raise ValidationError(
                    f"bump exponent must be positive, got {self.alpha}"
                )
            if self.r_bump <= 0:
                raise ValidationError(f"bump radius must be positive, got {self.r_bump}")
        if self.kind == "tabulated":
            if self.table is None or len(self.table) == 0:
                raise ValidationError("tabulated weight needs nodal values")

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, p0: float) -> "WeightSpec":
        return cls(kind="constant", p0=float(p0))

    @classmethod
    def power_bump(
        cls,
        p0: float,
        gamma: float,
        alpha: float,
        center=None,
        r_bump: float = 1.0,
    ) -> "WeightSpec":
        if center is not None:
            center = tuple(float(c) for c in np.atleast_1d(center))
        return cls(
            kind="power_bump",
            p0=float(p0),
            gamma=float(gamma),
            alpha=float(alpha),
            center=center,
            r_bump=float(r_bump),
        )

    @classmethod
    def tabulated(cls, values) -> "WeightSpec":
        vals = tuple(float(v) for v in np.asarray(values, dtype=float))
        return cls(kind="tabulated", table=vals)

    # -- declared bounds ------------------------------------------------

    @property
    def lower_bound(self) -> float:
        if self.kind == "tabulated":
            return float(min(self.table))
        return self.p0

    @property
    def upper_bound(self) -> float:
        if self.kind == "constant":
            return self.p0
        if self.kind == "power_bump":
            return self.p0 + self.gamma * self.r_bump**self.alpha
        return float(max(self.table))

    @property
    def flat_enough_for_attainment(self) -> bool:
        """Whether the well is flatter than linear (exponent above 1)."""
        return self.kind == "power_bump" and self.alpha > 1.0


def _distance_from_center(spec: WeightSpec, x, grid: Optional[Grid]):
    """Radial distance |x - center| for scalar radii or point arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:  # radii on a radial grid
        if spec.center is not None and any(c != 0.0 for c in spec.center):
            raise GeometryError(
                "radial evaluation requires the bump centered at the origin"
            )
        if np.any(x < 0):
            raise OutOfDomainError("radii must be nonnegative")
        if grid is not None and np.any(x > grid.radius * (1 + 1e-12)):
            raise OutOfDomainError("point lies outside the ball")
        return x
    # stacked coordinate arrays: shape (3, ...) for tensor use
    center = np.zeros(x.shape[0]) if spec.center is None else np.asarray(spec.center)
    if center.size != x.shape[0]:
        raise DimensionMismatchError(
            f"center has dimension {center.size}, points have {x.shape[0]}"
        )
    d = np.sqrt(sum((x[k] - center[k]) ** 2 for k in range(x.shape[0])))
    return d


def eval_weight(spec: WeightSpec, x, grid: Optional[Grid] = None) -> np.ndarray:
    """Evaluate the weight at radii (radial) or stacked points (tensor)."""
    if spec.kind == "constant":
        shape = np.asarray(x, dtype=float)
        base = shape[0] * 0.0 if shape.ndim > 1 else shape * 0.0
        return base + spec.p0
    if spec.kind == "power_bump":
        d = _distance_from_center(spec, x, grid)
        return spec.p0 + spec.gamma * np.minimum(d, spec.r_bump) ** spec.alpha
    raise ValidationError("tabulated weights are evaluated via node_weight_values")


def node_weight_values(spec: WeightSpec, grid: Grid) -> np.ndarray:
    """Weight sampled at every grid node."""
    if spec.kind == "tabulated":
        if not isinstance(grid, RadialGrid):
            raise ValidationError("tabulated weights are radial-only")
        vals = np.asarray(spec.table, dtype=float)
        if vals.shape != (grid.num_nodes,):
            raise DimensionMismatchError(
                f"table has {vals.size} entries, grid has {grid.num_nodes} nodes"
            )
        return vals
    if isinstance(grid, RadialGrid):
        return eval_weight(spec, grid.nodes, grid)
    return eval_weight(spec, np.stack(grid.meshgrid()), grid)


def face_weight_values(spec: WeightSpec, grid: Grid, axis: int = 0) -> np.ndarray:
    """Weight sampled at cell-face midpoints (per axis on tensor grids)."""
    if isinstance(grid, RadialGrid):
        if spec.kind == "tabulated":
            vals = node_weight_values(spec, grid)
            return 0.5 * (vals[:-1] + vals[1:])
        return eval_weight(spec, grid.face_radii, grid)
    if spec.kind == "tabulated":
        raise ValidationError("tabulated weights are radial-only")
    return eval_weight(spec, np.stack(grid.face_midpoints(axis)), grid)


@dataclass(frozen=True)
class WeightReport:
    minimum: float
    maximum: float
    argmin_radius: float
    within_declared_bounds: bool


def validate_weight(spec: WeightSpec, grid: Grid) -> WeightReport:
    """Check positivity on the grid and report the observed range.

    Nonpositive nodes are a hard error; the message lists where they sit so
    tabulated inputs can be repaired.
    """
    vals = node_weight_values(spec, grid)
    flat = vals.ravel()
    bad = np.nonzero(flat <= 0.0)[0]
    if bad.size:
        preview = ", ".join(str(int(b)) for b in bad[:8])
        raise ValidationError(
            f"weight is nonpositive at {bad.size} node(s); first indices: {preview}"
        )
    if isinstance(grid, RadialGrid):
        argmin_radius = float(grid.nodes[int(np.argmin(vals))])
    else:
        idx = np.unravel_index(int(np.argmin(vals)), vals.shape)
        x, y, z = (grid.axes[k][idx[k]] for k in range(3))
        argmin_radius = float(np.sqrt(x * x + y * y + z * z))
    lo, hi = float(flat.min()), float(flat.max())
    ok = lo >= spec.lower_bound - 1e-12 and hi <= spec.upper_bound + 1e-12
    return WeightReport(lo, hi, argmin_radius, ok)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data on the domain boundary.

    ``constant`` carries a single value; ``trace`` carries a callable of the
    space coordinates whose restriction to the boundary is used.  The
    ``nonnegative`` flag declares the sign hypothesis used by attainment
    predictions and is checked, not assumed.
    """

    kind: str
    value: float = 0.0
    fn: Optional[Callable] = None
    nonnegative: bool = True

    def __post_init__(self):
        if self.kind not in ("constant", "trace"):
            raise ValidationError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "trace" and self.fn is None:
            raise ValidationError("trace boundary data needs a callable")

    @classmethod
    def constant(cls, value: float, nonnegative: Optional[bool] = None) -> "BoundarySpec":
        if nonnegative is None:
            nonnegative = value >= 0
        return cls(kind="constant", value=float(value), nonnegative=nonnegative)

    @classmethod
    def trace_of(cls, fn: Callable, nonnegative: bool = False) -> "BoundarySpec":
        return cls(kind="trace", fn=fn, nonnegative=nonnegative)


def boundary_values(spec: BoundarySpec, grid: Grid) -> np.ndarray:
    """Boundary data sampled on the grid's boundary nodes."""
    if isinstance(grid, RadialGrid):
        if spec.kind == "constant":
            vals = np.array([spec.value])
        else:
            vals = np.atleast_1d(np.asarray(spec.fn(grid.radius), dtype=float))
    else:
        if spec.kind == "constant":
            vals = np.full(int(grid.boundary_mask.sum()), spec.value)
        else:
            x, y, z = grid.meshgrid()
            full = np.asarray(spec.fn(x, y, z), dtype=float)
            vals = full[grid.boundary_mask]
    if spec.nonnegative and np.any(vals < -1e-14):
        raise ValidationError(
            "boundary data declared nonnegative has negative values"
        )
    return vals


def lift_boundary(spec: BoundarySpec, grid: Grid) -> Field:
    """A grid field carrying the boundary data (zero at interior nodes)."""
    f = Field.zeros(grid)
    if isinstance(grid, RadialGrid):
        f.values[-1] = boundary_values(spec, grid)[0]
    else:
        f.values[grid.boundary_mask] = boundary_values(spec, grid)
    return f
