"""Grid, quadrature, and gradient-energy oracles.

Every tolerance here is checked against a value computed by hand or by a
closed form, never against the code's own output.
"""

import math

import numpy as np
import pytest

from critlab import (
    DimensionMismatchError,
    Field,
    InvalidFieldError,
    RadialGrid,
    TensorGrid,
    ValidationError,
    h1_seminorm_weighted,
    integrate,
    unit_sphere_area,
)
from critlab.errors import GeometryError


def ball_volume(n, radius):
    return unit_sphere_area(n) * radius**n / n


def test_unit_sphere_area_closed_forms():
    # omega_2 = 4 pi, omega_3 = 2 pi^2, omega_4 = 8 pi^2 / 3
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert unit_sphere_area(4) == pytest.approx(2 * math.pi**2, rel=1e-14)
    assert unit_sphere_area(5) == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)
    with pytest.raises(ValidationError):
        unit_sphere_area(1)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize(
    "make",
    [
        lambda n: RadialGrid.uniform(n, 1.0, 64),
        lambda n: RadialGrid.uniform(n, 2.5, 97),
        lambda n: RadialGrid.geometric(n, 1.0, 256),
        lambda n: RadialGrid.power_law(n, 1.0, 64, strength=2.0),
    ],
)
def test_radial_weights_sum_to_ball_volume(n, make):
    # the control volumes partition the ball exactly, whatever the layout
    grid = make(n)
    total = float(grid.node_weights.sum())
    assert total == pytest.approx(ball_volume(n, grid.radius), rel=1e-13)


def test_tensor_weights_sum_to_box_volume():
    grid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 12)
    assert float(grid.node_weights.sum()) == pytest.approx(8.0, rel=1e-13)


def test_integrate_constant_is_volume():
    grid = RadialGrid.uniform(3, 1.0, 128)
    one = Field(grid, np.ones(grid.num_nodes))
    assert integrate(one) == pytest.approx(4 * math.pi / 3, rel=1e-13)


def test_integrate_r_squared_second_order():
    # int_B r^2 = omega * R^(n+2) / (n+2); midpoint quadrature is O(h^2)
    n, R = 3, 1.0
    exact = unit_sphere_area(n) * R ** (n + 2) / (n + 2)
    errs = []
    for m in (64, 128):
        grid = RadialGrid.uniform(n, R, m)
        f = Field.from_callable(grid, lambda r: r**2)
        errs.append(abs(integrate(f) - exact))
    assert errs[0] / errs[1] > 3.0  # halving h divides the error by ~4


def test_integrate_power_validation():
    grid = RadialGrid.uniform(3, 1.0, 32)
    f = Field(grid, np.ones(grid.num_nodes))
    with pytest.raises(ValidationError):
        integrate(f, power=0.5)


def test_h1_seminorm_radial_oracle():
    # u = r^2: int |grad u|^2 = int 4 r^2 = 4 omega R^(n+2)/(n+2).  The
    # face gradient (r_{i+1}^2 - r_i^2)/h equals the midpoint derivative
    # exactly, so the only error is the midpoint quadrature's O(h^2).
    n, R = 4, 1.0
    exact = 4 * unit_sphere_area(n) * R ** (n + 2) / (n + 2)
    errs = []
    for m in (100, 200):
        grid = RadialGrid.uniform(n, R, m)
        u = Field.from_callable(grid, lambda r: r**2)
        errs.append(abs(h1_seminorm_weighted(u) - exact))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] < 1e-3 * exact


def test_h1_seminorm_scales_linearly_in_weight():
    grid = RadialGrid.geometric(3, 1.0, 128)
    u = Field.from_callable(grid, lambda r: np.cos(r))
    base = h1_seminorm_weighted(u, 1.0)
    assert h1_seminorm_weighted(u, 7.5) == pytest.approx(7.5 * base, rel=1e-14)


def test_h1_seminorm_tensor_linear_field_exact():
    # grad(x + 2y - z) has squared norm 6 everywhere; exact at any h
    grid = TensorGrid.box((0, 0, 0), (1, 1, 1), 8)
    u = Field.from_callable(grid, lambda x, y, z: x + 2 * y - z)
    assert h1_seminorm_weighted(u) == pytest.approx(6.0, rel=1e-13)


def test_h1_seminorm_callable_weight_matches_array():
    grid = RadialGrid.uniform(3, 1.0, 64)
    u = Field.from_callable(grid, lambda r: r**3 - r)
    by_callable = h1_seminorm_weighted(u, lambda r: 1.0 + r**2)
    by_array = h1_seminorm_weighted(u, 1.0 + grid.face_radii**2)
    assert by_callable == pytest.approx(by_array, rel=1e-15)


def test_radial_grid_validation():
    with pytest.raises(ValidationError):
        RadialGrid(2, np.linspace(0, 1, 33))  # n too small
    with pytest.raises(ValidationError):
        RadialGrid(3, np.linspace(0.1, 1, 33))  # missing the origin
    with pytest.raises(ValidationError):
        RadialGrid(3, np.zeros(33))  # not increasing
    with pytest.raises(ValidationError):
        RadialGrid(3, np.linspace(0, 1, 5))  # too few nodes
    with pytest.raises(ValidationError):
        RadialGrid.geometric(3, 1.0, 64, rmin_frac=0.9)
    with pytest.raises(ValidationError):
        RadialGrid.power_law(3, 1.0, 64, strength=0.5)


def test_geometric_grid_resolves_small_radii():
    grid = RadialGrid.geometric(3, 1.0, 1024, rmin_frac=1e-5)
    assert grid.nodes[1] == pytest.approx(1e-5, rel=1e-12)
    assert grid.nodes_inside(1e-3) > 100


def test_tensor_grid_validation():
    with pytest.raises(GeometryError):
        TensorGrid.box((0, 0, 0), (1, 1, 2), 8)  # extents disagree
    with pytest.raises(GeometryError):
        TensorGrid.box((0, 0, 0), (0, 1, 1), 8)  # empty extent
    with pytest.raises(ValidationError):
        TensorGrid((0, 0, 0), 0.5, (2, 4, 4))  # too few nodes per axis


def test_tensor_boundary_mask_counts_faces():
    m = 5
    grid = TensorGrid.box((0, 0, 0), (1, 1, 1), m - 1)
    # total boundary nodes of an m^3 lattice: m^3 - (m-2)^3
    assert int(grid.boundary_mask.sum()) == m**3 - (m - 2) ** 3


def test_field_shape_checks():
    grid = RadialGrid.uniform(3, 1.0, 32)
    with pytest.raises(DimensionMismatchError):
        Field(grid, np.ones(5))
    tgrid = TensorGrid.box((0, 0, 0), (1, 1, 1), 4)
    with pytest.raises(DimensionMismatchError):
        Field(tgrid, np.ones((4, 4, 4)))


def test_field_nonfinite_rejected():
    grid = RadialGrid.uniform(3, 1.0, 32)
    vals = np.ones(grid.num_nodes)
    vals[3] = np.nan
    f = Field(grid, vals)
    with pytest.raises(InvalidFieldError):
        integrate(f)


def test_boundary_values_views():
    grid = RadialGrid.uniform(3, 1.0, 32)
    f = Field(grid, np.arange(grid.num_nodes, dtype=float))
    assert f.boundary_values().tolist() == [grid.num_nodes - 1]
    tgrid = TensorGrid.box((0, 0, 0), (1, 1, 1), 4)
    g = Field.from_callable(tgrid, lambda x, y, z: x)
    assert g.boundary_values().size == int(tgrid.boundary_mask.sum())
