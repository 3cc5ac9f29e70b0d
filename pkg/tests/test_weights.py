"""Weight specs, their declared bounds, and boundary data."""

import numpy as np
import pytest

from critlab import (
    BoundarySpec,
    Field,
    RadialGrid,
    TensorGrid,
    ValidationError,
    WeightSpec,
    boundary_values,
    eval_weight,
    face_weight_values,
    lift_boundary,
    node_weight_values,
    validate_weight,
)
from critlab.errors import GeometryError, OutOfDomainError


def test_constant_weight_eval():
    spec = WeightSpec.constant(2.5)
    r = np.linspace(0, 1, 7)
    assert np.all(eval_weight(spec, r) == 2.5)
    assert spec.lower_bound == spec.upper_bound == 2.5


def test_power_bump_profile_values():
    # p(r) = 1 + 4 min(r, 0.5)^2: hand values at r = 0, 0.25, 0.5, 0.9
    spec = WeightSpec.power_bump(1.0, 4.0, 2.0, r_bump=0.5)
    got = eval_weight(spec, np.array([0.0, 0.25, 0.5, 0.9]))
    assert got == pytest.approx([1.0, 1.25, 2.0, 2.0], rel=1e-14)
    assert spec.lower_bound == 1.0
    assert spec.upper_bound == pytest.approx(2.0)


def test_power_bump_flatness_flag():
    assert WeightSpec.power_bump(1.0, 1.0, 1.5).flat_enough_for_attainment
    assert not WeightSpec.power_bump(1.0, 1.0, 1.0).flat_enough_for_attainment
    assert not WeightSpec.constant(1.0).flat_enough_for_attainment


def test_weight_spec_validation():
    with pytest.raises(ValidationError):
        WeightSpec.constant(0.0)
    with pytest.raises(ValidationError):
        WeightSpec.power_bump(1.0, -1.0, 2.0)
    with pytest.raises(ValidationError):
        WeightSpec.power_bump(1.0, 1.0, 0.0)
    with pytest.raises(ValidationError):
        WeightSpec.power_bump(0.0, 1.0, 2.0)
    with pytest.raises(ValidationError):
        WeightSpec(kind="mystery")
    with pytest.raises(ValidationError):
        WeightSpec(kind="tabulated", table=())


def test_off_center_bump_is_tensor_only():
    spec = WeightSpec.power_bump(1.0, 1.0, 2.0, center=(0.25, 0.0, 0.0))
    grid = RadialGrid.uniform(3, 1.0, 32)
    with pytest.raises(GeometryError):
        node_weight_values(spec, grid)
    tgrid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 8)
    vals = node_weight_values(spec, tgrid)
    # the center lands on a node, so the discrete minimum is exactly p0
    assert float(vals.min()) == pytest.approx(1.0, abs=1e-12)


def test_radial_eval_rejects_outside_points():
    spec = WeightSpec.power_bump(1.0, 1.0, 2.0)
    grid = RadialGrid.uniform(3, 1.0, 32)
    with pytest.raises(OutOfDomainError):
        eval_weight(spec, np.array([0.5, 1.5]), grid)
    with pytest.raises(OutOfDomainError):
        eval_weight(spec, np.array([-0.1]), grid)


def test_tabulated_weight_round_trip():
    grid = RadialGrid.uniform(3, 1.0, 32)
    table = 1.0 + grid.nodes**2
    spec = WeightSpec.tabulated(table)
    assert np.allclose(node_weight_values(spec, grid), table)
    faces = face_weight_values(spec, grid)
    assert np.allclose(faces, 0.5 * (table[:-1] + table[1:]))
    with pytest.raises(ValidationError):
        node_weight_values(spec, RadialGrid.uniform(3, 1.0, 64))  # wrong size


def test_validate_weight_reports_range():
    grid = RadialGrid.uniform(3, 1.0, 64)
    spec = WeightSpec.power_bump(1.0, 4.0, 2.0, r_bump=0.5)
    rep = validate_weight(spec, grid)
    assert rep.minimum == pytest.approx(1.0)
    assert rep.maximum == pytest.approx(2.0)
    assert rep.argmin_radius == 0.0
    assert rep.within_declared_bounds


def test_validate_weight_rejects_nonpositive_table():
    grid = RadialGrid.uniform(3, 1.0, 32)
    table = np.ones(grid.num_nodes)
    table[5] = -1.0
    with pytest.raises(ValidationError, match="nonpositive"):
        validate_weight(WeightSpec.tabulated(table), grid)


def test_boundary_constant_and_sign_check():
    grid = RadialGrid.uniform(3, 1.0, 32)
    g = BoundarySpec.constant(0.7)
    assert boundary_values(g, grid).tolist() == [0.7]
    assert g.nonnegative
    bad = BoundarySpec(kind="constant", value=-0.5, nonnegative=True)
    with pytest.raises(ValidationError, match="negative"):
        boundary_values(bad, grid)
    # declaring the sign honestly passes
    ok = BoundarySpec.constant(-0.5)
    assert not ok.nonnegative
    assert boundary_values(ok, grid).tolist() == [-0.5]


def test_boundary_trace_on_tensor_grid():
    grid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 6)
    g = BoundarySpec.trace_of(lambda x, y, z: x * y * z)
    vals = boundary_values(g, grid)
    assert vals.size == int(grid.boundary_mask.sum())
    x, yv, z = grid.meshgrid()
    assert np.allclose(vals, (x * yv * z)[grid.boundary_mask])


def test_boundary_spec_validation():
    with pytest.raises(ValidationError):
        BoundarySpec(kind="weird")
    with pytest.raises(ValidationError):
        BoundarySpec(kind="trace")  # no callable


def test_lift_boundary_zero_inside():
    grid = RadialGrid.uniform(3, 1.0, 32)
    f = lift_boundary(BoundarySpec.constant(2.0), grid)
    assert isinstance(f, Field)
    assert f.values[-1] == 2.0
    assert np.all(f.values[:-1] == 0.0)
