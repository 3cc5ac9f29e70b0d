"""Flux-form discretization of ``-div(p grad u)`` and its solvers.

The stiffness operator is assembled from face conductances: on radial grids
the flux through the sphere at a cell midpoint is
``p * omega_{n-1} r^{n-1} * du/dr``, on boxes the standard seven-point
stencil with face-averaged ``p`` (transverse trapezoid weights keep the
quadratic form consistent with the quadrature in :mod:`critlab.grid`).
Either way the full form matrix is symmetric, has row sums zero, and is an
M-matrix, which gives the discrete maximum principle for Dirichlet solves.

Linear systems are solved with Jacobi-preconditioned conjugate gradients
(relative tolerance 1e-10, iteration cap of 50 per unknown).  Radial
systems are tridiagonal, so inner loops (eigen iterations, descent steps)
can instead reuse a cached banded Cholesky factorization; both paths are
exercised against each other in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    PreconditionError,
    SolverFailureError,
    StagnationError,
    ValidationError,
)
from .grid import Field, Grid, RadialGrid, TensorGrid, integrate
from .weights import WeightSpec, face_weight_values, validate_weight

__all__ = [
    "critical_exponent",
    "StiffnessSystem",
    "EigenResult",
    "assemble",
    "solve_auxiliary",
    "first_eigenpair",
    "lq_norm",
]

CG_RTOL = 1e-10
CG_CAP_PER_UNKNOWN = 50


def critical_exponent(n: int) -> float:
    """The critical Sobolev exponent ``2n / (n - 2)``."""
    if n <= 2:
        raise ValidationError(f"critical exponent needs n >= 3, got {n}")
    return 2.0 * n / (n - 2.0)


def _as_weight(p: Union[WeightSpec, float]) -> WeightSpec:
    if isinstance(p, WeightSpec):
        return p
    return WeightSpec.constant(float(p))


@dataclass
class StiffnessSystem:
    """Assembled stiffness form for one (weight, grid) pair.

    ``form`` is the symmetric matrix of ``int p |grad u|^2`` over all nodes;
    restricting rows/columns to the interior gives the SPD Dirichlet
    operator, and the interior-boundary block carries the lifting of the
    boundary data into the right-hand side.
    """

    grid: Grid
    weight: WeightSpec
    form: sp.csr_matrix
    interior: np.ndarray  # flat indices of interior nodes
    boundary: np.ndarray  # flat indices of boundary nodes

    def __post_init__(self):
        self._interior_matrix = None
        self._coupling = None
        self._banded_factor = None
        self._lu = None

    # -- views ------------------------------------------------------------

    @property
    def interior_matrix(self) -> sp.csr_matrix:
        if self._interior_matrix is None:
            self._interior_matrix = self.form[self.interior][:, self.interior].tocsr()
        return self._interior_matrix

    @property
    def coupling(self) -> sp.csr_matrix:
        if self._coupling is None:
            self._coupling = self.form[self.interior][:, self.boundary].tocsr()
        return self._coupling

    @property
    def mass_diag(self) -> np.ndarray:
        """Lumped mass weights on interior nodes."""
        return self.grid.node_weights.ravel()[self.interior]

    # -- quadratic form and pointwise operator -----------------------------

    def energy(self, u: Field) -> float:
        """The form value ``int p |grad u|^2`` for a full nodal field."""
        x = u.values.ravel()
        return float(x @ (self.form @ x))

    def apply_pointwise(self, u: Field) -> np.ndarray:
        """Approximation of ``-div(p grad u)`` at interior nodes."""
        x = u.values.ravel()
        return (self.form @ x)[self.interior] / self.mass_diag

    # -- solvers ------------------------------------------------------------

    def solve_interior(
        self,
        rhs: np.ndarray,
        x0: Optional[np.ndarray] = None,
        rtol: float = CG_RTOL,
        method: str = "cg",
    ) -> np.ndarray:
        """Solve the interior Dirichlet system ``A x = rhs``.

        ``method`` selects Jacobi-PCG (the reference path) or the cached
        direct factorization (used by iteration-heavy callers).
        """
        if method == "direct":
            return self._solve_direct(rhs)
        return self._pcg(rhs, x0=x0, rtol=rtol)

    def _solve_direct(self, rhs: np.ndarray) -> np.ndarray:
        if isinstance(self.grid, RadialGrid):
            if self._banded_factor is None:
                a = self.interior_matrix
                m = a.shape[0]
                ab = np.zeros((2, m))
                ab[0] = a.diagonal()
                ab[1, :-1] = a.diagonal(-1)
                self._banded_factor = scipy.linalg.cholesky_banded(ab, lower=True)
            return scipy.linalg.cho_solve_banded(
                (self._banded_factor, True), rhs
            )
        if self._lu is None:
            import scipy.sparse.linalg as spla

            self._lu = spla.factorized(self.interior_matrix.tocsc())
        return self._lu(rhs)

    def _pcg(
        self,
        b: np.ndarray,
        x0: Optional[np.ndarray] = None,
        rtol: float = CG_RTOL,
    ) -> np.ndarray:
        a = self.interior_matrix
        d = a.diagonal()
        if np.any(d <= 0):
            raise SolverFailureError("stiffness diagonal is not positive")
        x = np.zeros_like(b) if x0 is None else x0.astype(float).copy()
        r = b - a @ x
        norm_b = float(np.linalg.norm(b))
        if norm_b == 0.0:
            return np.zeros_like(b)
        z = r / d
        p = z.copy()
        rz = float(r @ z)
        cap = CG_CAP_PER_UNKNOWN * b.size
        for _ in range(cap):
            res = float(np.linalg.norm(r))
            if res <= rtol * norm_b:
                return x
            ap = a @ p
            curv = float(p @ ap)
            if curv <= 0.0:
                raise SolverFailureError(
                    "conjugate gradients met nonpositive curvature", residual=res
                )
            alpha = rz / curv
            x = x + alpha * p
            r = r - alpha * ap
            z = r / d
            rz_next = float(r @ z)
            p = z + (rz_next / rz) * p
            rz = rz_next
        res = float(np.linalg.norm(r))
        if res <= rtol * norm_b:
            return x
        raise SolverFailureError(
            f"conjugate gradients hit the {cap}-iteration cap", residual=res / norm_b
        )

    def dirichlet_rhs(self, boundary_vals: np.ndarray) -> np.ndarray:
        """Right-hand side produced by lifting the boundary data."""
        return -(self.coupling @ np.asarray(boundary_vals, dtype=float))

    def assemble_field(
        self, interior_vals: np.ndarray, boundary_vals: np.ndarray
    ) -> Field:
        flat = np.zeros(self.grid.num_nodes)
        flat[self.interior] = interior_vals
        flat[self.boundary] = boundary_vals
        if isinstance(self.grid, RadialGrid):
            return Field(self.grid, flat)
        return Field(self.grid, flat.reshape(self.grid.shape))


def assemble(p: Union[WeightSpec, float], grid: Grid) -> StiffnessSystem:
    """Assemble the flux-form stiffness system for weight ``p`` on ``grid``."""
    spec = _as_weight(p)
    validate_weight(spec, grid)
    if isinstance(grid, RadialGrid):
        form = _assemble_radial(spec, grid)
        interior = np.arange(grid.num_nodes - 1)
        boundary = np.array([grid.num_nodes - 1])
    else:
        form = _assemble_tensor(spec, grid)
        flat_mask = grid.boundary_mask.ravel()
        interior = np.nonzero(~flat_mask)[0]
        boundary = np.nonzero(flat_mask)[0]
    return StiffnessSystem(grid, spec, form, interior, boundary)


def _assemble_radial(spec: WeightSpec, grid: RadialGrid) -> sp.csr_matrix:
    tau = (
        face_weight_values(spec, grid)
        * grid.face_areas
        / grid.spacings
    )
    m = grid.num_nodes
    main = np.zeros(m)
    main[:-1] += tau
    main[1:] += tau
    off = -tau
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _assemble_tensor(spec: WeightSpec, grid: TensorGrid) -> sp.csr_matrix:
    from .grid import _tensor_face_volumes

    h = grid.spacing
    nx, ny, nz = grid.shape
    size = grid.num_nodes
    idx = np.arange(size).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for axis in range(3):
        pf = face_weight_values(spec, grid, axis)
        tau = pf * _tensor_face_volumes(grid, axis) / (h * h)
        lo = np.take(idx, np.arange(grid.shape[axis] - 1), axis=axis).ravel()
        hi = np.take(idx, np.arange(1, grid.shape[axis]), axis=axis).ravel()
        t = tau.ravel()
        rows += [lo, hi, lo, hi]
        cols += [lo, hi, hi, lo]
        vals += [t, t, -t, -t]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def solve_auxiliary(
    p: Union[WeightSpec, float],
    g,
    grid: Grid,
    rtol: float = CG_RTOL,
    system: Optional[StiffnessSystem] = None,
) -> Field:
    """Solve ``-div(p grad v) = 0`` with Dirichlet data ``g``.

    ``g`` may be a :class:`~critlab.weights.BoundarySpec` or an array of
    boundary-node values.  The returned field carries the data on the
    boundary nodes and the discrete harmonic extension inside; it satisfies
    the discrete maximum principle and minimizes the weighted gradient
    energy among fields with the same trace.
    """
    from .weights import BoundarySpec, boundary_values

    sys_ = system if system is not None else assemble(p, grid)
    if isinstance(g, BoundarySpec):
        g_vals = boundary_values(g, grid)
    else:
        g_vals = np.asarray(g, dtype=float).ravel()
        if g_vals.size != sys_.boundary.size:
            raise ValidationError(
                f"boundary data has {g_vals.size} values, "
                f"grid has {sys_.boundary.size} boundary nodes"
            )
    rhs = sys_.dirichlet_rhs(g_vals)
    # Constant data solves exactly from a constant initial guess, so seed
    # the iteration with the mean of g.
    x0 = np.full(sys_.interior.size, float(np.mean(g_vals))) if g_vals.size else None
    x = sys_.solve_interior(rhs, x0=x0, rtol=rtol)
    resid = float(np.linalg.norm(sys_.interior_matrix @ x - rhs))
    scale = float(np.linalg.norm(rhs))
    if scale > 0 and resid > 10 * rtol * scale:
        raise SolverFailureError(
            "auxiliary solve missed its residual target", residual=resid / scale
        )
    return sys_.assemble_field(x, g_vals)


@dataclass
class EigenResult:
    """First Dirichlet eigenpair of ``-div(p grad u) = lambda u``."""

    value: float
    mode: Field
    residual: float
    iterations: int

    def __post_init__(self):
        if self.value <= 0:
            raise SolverFailureError(
                f"first eigenvalue must be positive, got {self.value}"
            )


def first_eigenpair(
    p: Union[WeightSpec, float],
    grid: Grid,
    tol: float = 1e-9,
    max_iter: int = 400,
    system: Optional[StiffnessSystem] = None,
) -> EigenResult:
    """Smallest Dirichlet eigenpair by inverse power iteration.

    Iterates ``x <- A^{-1} B x`` with B the lumped mass, normalizing in the
    B-inner product.  Stops once the B-normalized residual
    ``||A phi - lambda B phi||`` drops below ``tol``; stagnation without
    convergence raises, carrying the last Rayleigh quotient.
    """
    sys_ = system if system is not None else assemble(p, grid)
    w = sys_.mass_diag
    # Positive, boundary-compatible start: a parabola in the radius.
    if isinstance(grid, RadialGrid):
        r = grid.nodes[:-1]
        x = 1.0 - (r / grid.radius) ** 2
    else:
        prof = np.ones(grid.shape)
        for k, ax in enumerate(grid.axes):
            lo, hi = ax[0], ax[-1]
            shape = [1, 1, 1]
            shape[k] = -1
            prof = prof * ((ax - lo) * (hi - ax)).reshape(shape)
        x = prof.ravel()[sys_.interior]
    x = x / np.sqrt(float(x @ (w * x)))
    lam_prev = np.inf
    best_resid = np.inf
    since_improved = 0
    for it in range(1, max_iter + 1):
        bx = w * x
        y = sys_.solve_interior(bx, method="direct")
        norm = np.sqrt(float(y @ (w * y)))
        if norm == 0 or not np.isfinite(norm):
            raise StagnationError("inverse iteration collapsed", rayleigh=lam_prev)
        phi = y / norm
        # A phi = B x / norm up to the linear-solve tolerance.
        lam = float(phi @ (bx / norm))
        resid = float(np.linalg.norm(bx / norm - lam * (w * phi)))
        if resid <= tol * max(1.0, abs(lam)):
            if np.mean(phi) < 0:
                phi = -phi
            mode = sys_.assemble_field(phi, np.zeros(sys_.boundary.size))
            return EigenResult(lam, mode, resid, it)
        # the Rayleigh quotient saturates in double precision well before
        # the mode does, so stagnation is judged on the residual alone
        if resid < 0.99 * best_resid:
            best_resid = resid
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= 10:
                raise StagnationError(
                    "inverse iteration stagnated before reaching tolerance",
                    rayleigh=lam,
                )
        lam_prev = lam
        x = phi
    raise StagnationError(
        f"inverse iteration did not converge in {max_iter} steps", rayleigh=lam_prev
    )


def lq_norm(f: Field, q: float) -> float:
    """The L^q norm of a nodal field under the grid quadrature."""
    if q < 1:
        raise PreconditionError(f"lq_norm needs q >= 1, got {q}")
    return integrate(f, q) ** (1.0 / q)
