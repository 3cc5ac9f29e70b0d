"""Concentration profiles and their small-scale expansions.

The model profile at scale ``eps`` centered at the origin is

    U_eps(r) = (eps / (eps^2 + r^2))^((n-2)/2),

the extremal of the critical Sobolev quotient on R^n.  It solves
``-Delta U = n(n-2) U^(q-1)`` with ``q = 2n/(n-2)``.  On a bounded ball it
is truncated by a cubic smoothstep that is 1 inside radius ``r_cut`` and 0
outside ``2 r_cut``, which keeps the trace zero while perturbing the
leading integrals only at high order in ``eps``.

Every limiting constant here reduces to one-dimensional integrals

    J(s, m) = int_0^inf r^s (1 + r^2)^(-m) dr = (1/2) B((s+1)/2, m-(s+1)/2),

computed both by adaptive quadrature and by the Beta closed form; the two
routes must agree to 1e-10 or construction fails.  ``fit_expansion``
recovers remainder exponents from sweeps of the grid quadratures, either as
a pure power ``C eps^k`` or with an extra ``log(1/eps)`` factor for the
borderline cases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import betaln

from .errors import (
    GeometryError,
    NonpositiveRemainderError,
    PreconditionError,
    ResolutionWarning,
    SolverFailureError,
    ValidationError,
)
from .grid import Field, RadialGrid, h1_seminorm_weighted, integrate, unit_sphere_area
from .elliptic import critical_exponent, lq_norm
from .weights import WeightSpec, face_weight_values

__all__ = [
    "BubbleParams",
    "BubbleConstants",
    "ExpansionFit",
    "analytic_constants",
    "profile_integral",
    "sobolev_constant",
    "bubble_profile",
    "smooth_cutoff",
    "truncated_bubble",
    "bubble_energy",
    "bubble_lq_mass",
    "bubble_l2",
    "concentration_cross_term",
    "fit_expansion",
    "superposition_root",
]

MIN_NODES_INSIDE_SCALE = 8


def profile_integral(s: float, m: float, check_tol: float = 1e-10) -> float:
    """``J(s, m)`` by adaptive quadrature, verified against the Beta form."""
    if 2 * m - s <= 1:
        raise ValidationError(
            f"profile integral diverges for s={s}, m={m} (needs 2m - s > 1)"
        )
    closed = 0.5 * math.exp(betaln((s + 1) / 2.0, m - (s + 1) / 2.0))
    val, _err = quad(
        lambda r: r**s * (1.0 + r * r) ** (-m),
        0.0,
        np.inf,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    if abs(val - closed) > check_tol * closed:
        raise SolverFailureError(
            f"quadrature and Beta closed form disagree for J({s}, {m}): "
            f"{val!r} vs {closed!r}"
        )
    return closed


def sobolev_constant(n: int) -> float:
    """Best constant of the critical Sobolev embedding on R^n."""
    if n < 3:
        raise ValidationError(f"embedding constant needs n >= 3, got {n}")
    return (
        math.pi
        * n
        * (n - 2)
        * (math.gamma(n / 2.0) / math.gamma(float(n))) ** (2.0 / n)
    )


@dataclass(frozen=True)
class BubbleConstants:
    """Limits of the profile integrals entering the expansions.

    grad_energy   limit of the truncated profile's gradient energy
    crit_mass     limit of its critical-power mass
    l2_coeff      leading L2 coefficient (eps^2 regime, n >= 5 only)
    cross_coeff   coefficient of the leading interaction with a smooth field
    sobolev       best embedding constant; equals grad_energy/crit_mass^(2/q)
    pde_coeff     nonlinearity coefficient in -Delta U = pde_coeff U^(q-1)
    """

    n: int
    grad_energy: float
    crit_mass: float
    l2_coeff: Optional[float]
    cross_coeff: float
    sobolev: float
    pde_coeff: float


@lru_cache(maxsize=None)
def analytic_constants(n: int) -> BubbleConstants:
    if int(n) != n or n < 3:
        raise ValidationError(f"constants need integer n >= 3, got {n}")
    n = int(n)
    omega = unit_sphere_area(n)
    q = critical_exponent(n)
    grad_energy = (n - 2) ** 2 * omega * profile_integral(n + 1, n)
    crit_mass = omega * profile_integral(n - 1, n)
    l2_coeff = omega * profile_integral(n - 1, n - 2) if n >= 5 else None
    cross_coeff = omega * profile_integral(n - 1, (n + 2) / 2.0)
    s_gamma = sobolev_constant(n)
    s_ratio = grad_energy / crit_mass ** (2.0 / q)
    if abs(s_ratio - s_gamma) > 1e-6 * s_gamma:
        raise SolverFailureError(
            f"embedding constant mismatch at n={n}: {s_ratio} vs {s_gamma}"
        )
    return BubbleConstants(
        n=n,
        grad_energy=grad_energy,
        crit_mass=crit_mass,
        l2_coeff=l2_coeff,
        cross_coeff=cross_coeff,
        sobolev=s_ratio,
        pde_coeff=float(n * (n - 2)),
    )


@dataclass(frozen=True)
class BubbleParams:
    """Scale and truncation of one concentration profile."""

    eps: float
    r_cut: float

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValidationError(f"profile scale must be positive, got {self.eps}")
        if not (self.r_cut > 0 and math.isfinite(self.r_cut)):
            raise ValidationError(f"cutoff radius must be positive, got {self.r_cut}")

    @classmethod
    def for_grid(cls, grid: RadialGrid, eps: float) -> "BubbleParams":
        """Default truncation: a quarter of the distance to the boundary."""
        return cls(eps=eps, r_cut=grid.radius / 4.0)


def bubble_profile(r, eps: float, n: int):
    """The model profile ``(eps / (eps^2 + r^2))^((n-2)/2)``."""
    r = np.asarray(r, dtype=float)
    return (eps / (eps * eps + r * r)) ** ((n - 2) / 2.0)


def smooth_cutoff(r, r_cut: float):
    """Cubic smoothstep: 1 on [0, r_cut], 0 beyond 2 r_cut, C^1 in between."""
    t = np.clip((np.asarray(r, dtype=float) - r_cut) / r_cut, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def _require_radial(grid) -> RadialGrid:
    if not isinstance(grid, RadialGrid):
        raise ValidationError("concentration profiles are built on radial grids")
    return grid


def _check_geometry(bp: BubbleParams, grid: RadialGrid) -> None:
    if 2.0 * bp.r_cut >= grid.radius:
        raise GeometryError(
            f"cutoff support [0, {2 * bp.r_cut:g}] must stay strictly inside "
            f"the ball of radius {grid.radius:g}"
        )


def _check_resolution(bp: BubbleParams, grid: RadialGrid) -> bool:
    inside = grid.nodes_inside(bp.eps)
    if inside < MIN_NODES_INSIDE_SCALE:
        warnings.warn(
            f"only {inside} nodes inside radius eps={bp.eps:g}; "
            f"refine the grid (need {MIN_NODES_INSIDE_SCALE})",
            ResolutionWarning,
            stacklevel=3,
        )
        return False
    return True


def truncated_bubble(bp: BubbleParams, grid: RadialGrid) -> Field:
    """Nodal samples of the truncated profile; the trace is exactly zero."""
    grid = _require_radial(grid)
    _check_geometry(bp, grid)
    _check_resolution(bp, grid)
    vals = smooth_cutoff(grid.nodes, bp.r_cut) * bubble_profile(
        grid.nodes, bp.eps, grid.n
    )
    return Field(grid, vals)


def bubble_energy(
    bp: BubbleParams, p: Union[WeightSpec, float], grid: RadialGrid
) -> float:
    """Weighted gradient energy of the truncated profile."""
    u = truncated_bubble(bp, grid)
    spec = p if isinstance(p, WeightSpec) else WeightSpec.constant(float(p))
    return h1_seminorm_weighted(u, face_weight_values(spec, grid))


def bubble_lq_mass(bp: BubbleParams, grid: RadialGrid) -> float:
    """Critical-power mass ``int |u|^q`` of the truncated profile."""
    return integrate(truncated_bubble(bp, grid), critical_exponent(grid.n))


def bubble_l2(bp: BubbleParams, grid: RadialGrid) -> float:
    """Squared L2 norm of the truncated profile.

    Scales like eps^2 for n >= 5, eps^2 log(1/eps) for n = 4, and eps for
    n = 3.
    """
    return integrate(truncated_bubble(bp, grid), 2.0)


def concentration_cross_term(u: Field, bp: BubbleParams, grid: RadialGrid) -> float:
    """Interaction integral ``int u * u_b^(q-1)``.

    For smooth positive ``u`` this behaves like
    ``eps^((n-2)/2) * cross_coeff * u(0)`` as the profile concentrates.
    """
    ub = truncated_bubble(bp, grid)
    q = critical_exponent(grid.n)
    w = grid.node_weights
    return float(np.dot(w, u.values * ub.values ** (q - 1.0)))


@dataclass(frozen=True)
class ExpansionFit:
    """Least-squares fit of ``values - baseline ~ C eps^k [log(1/eps)]``."""

    exponent: float
    coefficient: float
    residual: float
    eps_lo: float
    eps_hi: float
    model: str = "power"
    inconclusive: bool = False


def fit_expansion(
    eps,
    values,
    baseline: float = 0.0,
    model: str = "power",
    residual_cap: float = 0.2,
) -> ExpansionFit:
    """Fit the remainder of a sweep against a power law in ``eps``.

    Samples must lie strictly above the baseline; the fit happens in log-log
    coordinates.  ``model="log_power"`` multiplies the power law by
    ``log(1/eps)``, which requires every ``eps`` below 1.  A root-mean-square
    log-residual above ``residual_cap`` marks the fit inconclusive.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.shape != values.shape or eps.ndim != 1:
        raise ValidationError("eps and values must be 1-d arrays of equal length")
    if eps.size < 5:
        raise PreconditionError(f"need at least 5 samples, got {eps.size}")
    if np.any(eps <= 0) or np.any(np.diff(np.sort(eps)) <= 0):
        raise ValidationError("eps samples must be positive and distinct")
    if model not in ("power", "log_power"):
        raise ValidationError(f"unknown fit model {model!r}")
    rem = values - baseline
    if np.any(rem <= 0):
        raise NonpositiveRemainderError(
            "remainder is nonpositive at some samples; check baseline orientation"
        )
    order = np.argsort(eps)
    eps, rem = eps[order], rem[order]
    x = np.log(eps)
    y = np.log(rem)
    if model == "log_power":
        if np.any(eps >= 1.0):
            raise ValidationError("log_power model needs all eps below 1")
        y = y - np.log(np.log(1.0 / eps))
    k, logc = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (k * x + logc)) ** 2)))
    return ExpansionFit(
        exponent=float(k),
        coefficient=float(np.exp(logc)),
        residual=resid,
        eps_lo=float(eps[0]),
        eps_hi=float(eps[-1]),
        model=model,
        inconclusive=resid > residual_cap,
    )


def superposition_root(
    u: Field, bp: BubbleParams, grid: RadialGrid, tol: float = 1e-12
) -> tuple:
    """Amplitude placing ``u + c * bubble`` on the unit critical sphere.

    Returns ``(c, delta)`` where ``delta = 1 - c / c0`` measures the drop
    below the decoupled amplitude ``c0 = ((1 - int |u|^q) / crit_mass)^(1/q)``;
    ``delta`` shrinks like ``eps^((n-2)/2)`` as the profile concentrates.
    """
    grid = _require_radial(grid)
    q = critical_exponent(grid.n)
    mass_u = integrate(u, q)
    if mass_u >= 1.0:
        raise PreconditionError(
            f"superposition needs int |u|^q < 1, got {mass_u:.6f}"
        )
    ub = truncated_bubble(bp, grid).values
    w = grid.node_weights
    uu = u.values

    def residual(c: float) -> float:
        return float(np.dot(w, np.abs(uu + c * ub) ** q)) - 1.0

    def slope(c: float) -> float:
        mix = uu + c * ub
        return q * float(np.dot(w, np.abs(mix) ** (q - 2.0) * mix * ub))

    c0 = ((1.0 - mass_u) / analytic_constants(grid.n).crit_mass) ** (1.0 / q)
    lo, f_lo = 0.0, mass_u - 1.0
    hi = max(c0, 1e-8)
    f_hi = residual(hi)
    grows = 0
    while f_hi < 0.0:
        hi *= 2.0
        f_hi = residual(hi)
        grows += 1
        if grows > 200:
            raise SolverFailureError("failed to bracket the superposition root")
    c = min(max(c0, lo), hi)
    for _ in range(200):
        f = residual(c)
        if abs(f) <= tol:
            return c, 1.0 - c / c0
        if f > 0:
            hi = c
        else:
            lo = c
        df = slope(c)
        step_ok = df > 0
        if step_ok:
            c_next = c - f / df
            step_ok = lo < c_next < hi
        c = c_next if step_ok else 0.5 * (lo + hi)
    raise SolverFailureError("superposition root did not converge", residual=abs(f))
