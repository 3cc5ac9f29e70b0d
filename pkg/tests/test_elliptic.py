"""Stiffness assembly, Dirichlet solves, and the first eigenpair.

Oracles: the flux-form stencil is exact on quadratics (so the pointwise
operator reproduces -Delta r^2 = -2n to rounding), constant data solves to
a constant, trilinear data solves exactly on boxes, and the unit ball's
first Dirichlet eigenvalue is pi^2 for n = 3.
"""

import math

import numpy as np
import pytest

from critlab import (
    BoundarySpec,
    Field,
    PreconditionError,
    RadialGrid,
    SolverFailureError,
    TensorGrid,
    ValidationError,
    WeightSpec,
    assemble,
    critical_exponent,
    first_eigenpair,
    h1_seminorm_weighted,
    lq_norm,
    solve_auxiliary,
)


def test_critical_exponent_values():
    assert critical_exponent(3) == 6.0
    assert critical_exponent(4) == 4.0
    assert critical_exponent(6) == 3.0
    with pytest.raises(ValidationError):
        critical_exponent(2)


def test_form_matches_seminorm():
    grid = RadialGrid.geometric(4, 1.0, 256)
    spec = WeightSpec.power_bump(1.0, 2.0, 2.0, r_bump=0.5)
    sys_ = assemble(spec, grid)
    u = Field.from_callable(grid, lambda r: np.sin(3 * r))
    from critlab import face_weight_values

    direct = h1_seminorm_weighted(u, face_weight_values(spec, grid))
    assert sys_.energy(u) == pytest.approx(direct, rel=1e-13)


def test_form_row_sums_vanish():
    grid = RadialGrid.uniform(3, 1.0, 64)
    sys_ = assemble(1.0, grid)
    row_sums = np.asarray(sys_.form.sum(axis=1)).ravel()
    assert np.max(np.abs(row_sums)) < 1e-12
    tgrid = TensorGrid.box((0, 0, 0), (1, 1, 1), 6)
    tsys = assemble(1.0, tgrid)
    assert np.max(np.abs(np.asarray(tsys.form.sum(axis=1)).ravel())) < 1e-12


def test_pointwise_operator_exact_on_quadratic_radial():
    # -div(grad r^2) = -2n; the flux stencil with midpoint faces hits the
    # control-volume average exactly, including the center node
    for n in (3, 5):
        grid = RadialGrid.geometric(n, 1.0, 128)
        sys_ = assemble(1.0, grid)
        u = Field.from_callable(grid, lambda r: r**2)
        got = sys_.apply_pointwise(u)
        assert np.allclose(got, -2.0 * n, rtol=1e-10, atol=1e-10)


def test_pointwise_operator_exact_on_quadratic_tensor():
    grid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 8)
    sys_ = assemble(1.0, grid)
    u = Field.from_callable(grid, lambda x, y, z: x * x + y * y + z * z)
    got = sys_.apply_pointwise(u)
    assert np.allclose(got, -6.0, rtol=1e-10, atol=1e-10)


def test_cg_and_direct_paths_agree():
    grid = RadialGrid.geometric(3, 1.0, 512)
    sys_ = assemble(WeightSpec.power_bump(1.0, 1.0, 2.0), grid)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(sys_.interior.size)
    x_cg = sys_.solve_interior(rhs, method="cg")
    x_dir = sys_.solve_interior(rhs, method="direct")
    assert np.linalg.norm(x_cg - x_dir) <= 1e-8 * np.linalg.norm(x_dir)


def test_auxiliary_constant_data_is_constant():
    grid = RadialGrid.uniform(3, 1.0, 128)
    v = solve_auxiliary(1.0, BoundarySpec.constant(0.8), grid)
    assert np.allclose(v.values, 0.8, atol=1e-12)


def test_auxiliary_trilinear_exact_on_box():
    # x y z is harmonic and trilinear: the seven-point stencil reproduces
    # it exactly, so the only error is the linear-solve tolerance
    grid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 10)
    g = BoundarySpec.trace_of(lambda x, y, z: x * y * z)
    v = solve_auxiliary(1.0, g, grid)
    x, y, z = grid.meshgrid()
    assert np.max(np.abs(v.values - x * y * z)) < 1e-9


def test_auxiliary_maximum_principle_random():
    rng = np.random.default_rng(7)
    grid = TensorGrid.box((-1, -1, -1), (1, 1, 1), 8)
    for _ in range(5):
        spec = WeightSpec.power_bump(
            0.5 + rng.uniform(0, 1),
            rng.uniform(0.1, 3.0),
            rng.uniform(0.5, 3.0),
            center=tuple(rng.uniform(-0.5, 0.5, 3)),
            r_bump=rng.uniform(0.3, 1.0),
        )
        g_vals = rng.standard_normal(int(grid.boundary_mask.sum()))
        v = solve_auxiliary(spec, g_vals, grid)
        assert v.values.min() >= g_vals.min() - 1e-9
        assert v.values.max() <= g_vals.max() + 1e-9


def test_auxiliary_energy_minimality():
    # the harmonic extension minimizes the weighted energy over its trace
    # class: any zero-trace perturbation must not lower it
    grid = RadialGrid.uniform(3, 1.0, 64)
    spec = WeightSpec.power_bump(1.0, 2.0, 1.5)
    sys_ = assemble(spec, grid)
    v = solve_auxiliary(spec, BoundarySpec.constant(1.0), grid, system=sys_)
    rng = np.random.default_rng(3)
    for _ in range(3):
        pert = np.zeros(grid.num_nodes)
        pert[:-1] = rng.standard_normal(grid.num_nodes - 1)
        u = Field(grid, v.values + 0.1 * pert)
        assert sys_.energy(u) >= sys_.energy(v) - 1e-12


def test_auxiliary_boundary_size_checked():
    grid = RadialGrid.uniform(3, 1.0, 32)
    with pytest.raises(ValidationError):
        solve_auxiliary(1.0, np.array([1.0, 2.0]), grid)


def test_first_eigenvalue_unit_ball():
    # classical value: lambda_1 of -Delta on the unit ball in R^3 is pi^2
    grid = RadialGrid.uniform(3, 1.0, 512)
    eig = first_eigenpair(1.0, grid)
    assert eig.value == pytest.approx(math.pi**2, rel=1e-4)
    assert eig.mode.values[-1] == 0.0
    assert np.all(eig.mode.values[:-1] > 0)  # ground state has one sign


def test_first_eigenvalue_box():
    # [0,1]^3 with Dirichlet walls: lambda_1 = 3 pi^2
    grid = TensorGrid.box((0, 0, 0), (1, 1, 1), 12)
    eig = first_eigenpair(1.0, grid)
    assert eig.value == pytest.approx(3 * math.pi**2, rel=1e-2)


def test_eigenvalue_scales_with_weight():
    grid = RadialGrid.uniform(3, 1.0, 128)
    lam1 = first_eigenpair(1.0, grid).value
    lam2 = first_eigenpair(2.0, grid).value
    assert lam2 == pytest.approx(2.0 * lam1, rel=1e-8)


def test_eigenvalue_monotone_in_weight():
    grid = RadialGrid.uniform(3, 1.0, 128)
    small = WeightSpec.power_bump(1.0, 1.0, 2.0)
    large = WeightSpec.power_bump(1.2, 2.0, 2.0)  # pointwise above small
    assert first_eigenpair(small, grid).value <= first_eigenpair(
        large, grid
    ).value * (1 + 1e-10)


def test_eigen_result_rejects_nonpositive():
    grid = RadialGrid.uniform(3, 1.0, 32)
    mode = Field.zeros(grid)
    from critlab import EigenResult

    with pytest.raises(SolverFailureError):
        EigenResult(-1.0, mode, 0.0, 1)


def test_lq_norm_basics():
    grid = RadialGrid.uniform(3, 1.0, 64)
    f = Field(grid, np.full(grid.num_nodes, 2.0))
    vol = float(grid.node_weights.sum())
    assert lq_norm(f, 6.0) == pytest.approx(2.0 * vol ** (1 / 6), rel=1e-13)
    with pytest.raises(PreconditionError):
        lq_norm(f, 0.5)
