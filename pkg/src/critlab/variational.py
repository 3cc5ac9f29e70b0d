"""Constrained minimization of the weighted critical-exponent energy.

The functional is ``E(u) = int p |grad u|^2 - lam int u^2`` over fields with
fixed boundary trace ``g`` and unit critical norm ``||u||_q = 1``,
``q = 2n/(n-2)``.  Writing ``u = v + w`` with ``v`` the weighted harmonic
extension of ``g`` and ``w`` zero-trace, two regimes appear:

* ``||v||_q < 1`` (sphere mode): every ray ``t -> t w + v`` crosses the unit
  sphere exactly once, so the sphere is a graph over the zero-trace
  directions and descent steps are retracted back along the ray.
* ``||v||_q >= 1`` (convex mode): the energy is minimized over the convex
  set ``||u||_q <= 1``; feasibility is restored by returning along the ray
  toward ``v`` and the constraint is verified active at convergence.

Descent directions are preconditioned by the weighted stiffness operator
(an H^1 gradient), projected against the constraint normal, and accepted
under an Armijo test, so the recorded energy trace is nonincreasing up to
the retraction tolerance.  Minimizing sequences that lose compactness show
up as mass concentrating at the bottom of the weight well; a run is flagged
as concentrating once a set fraction of the critical mass sits inside a
small ball and the amplitude has grown by a set factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .bubbles import BubbleParams, analytic_constants, truncated_bubble
from .elliptic import (
    StiffnessSystem,
    assemble,
    critical_exponent,
    first_eigenpair,
    lq_norm,
    solve_auxiliary,
)
from .errors import (
    IndeterminateMultiplierError,
    ModeError,
    PreconditionError,
    SolverFailureError,
    ValidationError,
)
from .grid import Field, Grid, RadialGrid, integrate
from .weights import BoundarySpec, WeightSpec

__all__ = [
    "MinimizeConfig",
    "RunReport",
    "f_of_t",
    "lift_to_sphere",
    "minimize",
    "estimate_multiplier",
    "first_order_gap",
    "segment_lq_mass",
    "concentration_metrics",
]


@dataclass
class MinimizeConfig:
    """Knobs for one minimization run.

    ``conc_radius`` defaults to ten mean spacings; together with
    ``mass_fraction`` and ``amp_factor`` it defines the concentration
    predicate.  ``lam`` must stay below the first Dirichlet eigenvalue of
    the weighted operator, which is checked before the flow starts.
    """

    lam: float = 0.0
    mode: str = "auto"  # auto | sphere | convex
    max_iter: int = 2000
    step0: float = 1.0
    backtrack: float = 0.5
    max_backtracks: int = 40
    step_growth: float = 1.4
    grad_tol: float = 1e-7
    stall_tol: float = 1e-13
    stall_window: int = 10
    mass_fraction: float = 0.9
    conc_radius: Optional[float] = None
    amp_factor: float = 10.0
    seed_kind: str = "bubble"  # bubble | auxiliary | field
    seed_eps: float = 0.05
    seed_scale: float = 1.0
    retraction_tol: float = 1e-12
    log_every: int = 1

    def __post_init__(self):
        problems = []
        if self.mode not in ("auto", "sphere", "convex"):
            problems.append(f"mode={self.mode!r}")
        if self.max_iter < 1:
            problems.append(f"max_iter={self.max_iter}")
        if not 0.0 < self.mass_fraction < 1.0:
            problems.append(f"mass_fraction={self.mass_fraction}")
        if self.amp_factor <= 1.0:
            problems.append(f"amp_factor={self.amp_factor}")
        if not 0.0 < self.backtrack < 1.0:
            problems.append(f"backtrack={self.backtrack}")
        if self.step0 <= 0 or self.grad_tol <= 0 or self.retraction_tol <= 0:
            problems.append("step0/grad_tol/retraction_tol must be positive")
        if self.seed_kind not in ("bubble", "auxiliary", "field"):
            problems.append(f"seed_kind={self.seed_kind!r}")
        if problems:
            raise ValidationError(
                "invalid minimize settings: " + ", ".join(problems)
            )


@dataclass
class RunReport:
    """Everything observed during one run; serializable via to_dict()."""

    outcome: str
    mode: str
    final_energy: float
    final_gradient_energy: float
    final_lq_mass: float
    constraint_residual: float
    multiplier: Optional[float]
    multiplier_note: str
    flow_multiplier: float
    v_lq_norm: float
    lam: float
    iterations: int
    seed_label: str
    grid_descriptor: str
    mass_radius: float
    amplitude_ratio: float
    concentration_flag: bool
    constraint_active: bool
    positivity_ok: bool
    min_sobolev_ratio: Optional[float]
    segment_check_ok: Optional[bool]
    energy_trace: list = dc_field(default_factory=list)
    gap_trace: list = dc_field(default_factory=list)
    messages: list = dc_field(default_factory=list)
    final_field: Optional[Field] = dc_field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "final_field"}
        out["energy_trace"] = [float(e) for e in self.energy_trace]
        out["gap_trace"] = [[float(a), float(b)] for a, b in self.gap_trace]
        return out


# ---------------------------------------------------------------------------
# constraint geometry


def f_of_t(t: float, u: Field, v: Field) -> float:
    """Critical mass ``int |t u + v|^q`` along the ray anchored at ``v``.

    Convex in ``t`` because the integrand is a convex function composed with
    an affine map.
    """
    q = critical_exponent(u.grid.n)
    w = u.grid.node_weights.ravel()
    mix = t * u.values.ravel() + v.values.ravel()
    return float(np.dot(w, np.abs(mix) ** q))


def segment_lq_mass(t: float, u: Field, v: Field) -> float:
    """Critical mass along the segment ``t u + (1 - t) v``."""
    q = critical_exponent(u.grid.n)
    w = u.grid.node_weights.ravel()
    mix = t * u.values.ravel() + (1.0 - t) * v.values.ravel()
    return float(np.dot(w, np.abs(mix) ** q))


def _mass_and_slope(wvals, vvals, quad, q, t):
    mix = t * wvals + vvals
    amix = np.abs(mix)
    mass = float(np.dot(quad, amix**q))
    slope = q * float(np.dot(quad, amix ** (q - 2.0) * mix * wvals))
    return mass, slope


def _sphere_ray_root(wvals, vvals, quad, q, t_init, tol):
    """Unique t > 0 with ``int |t w + v|^q = 1`` when ``int |v|^q < 1``."""
    hi = max(float(t_init), 1e-12)
    mass, _ = _mass_and_slope(wvals, vvals, quad, q, hi)
    grows = 0
    while mass < 1.0:
        hi *= 2.0
        mass, _ = _mass_and_slope(wvals, vvals, quad, q, hi)
        grows += 1
        if grows > 300:
            raise SolverFailureError("sphere retraction failed to bracket")
    lo = 0.0
    t = min(max(t_init, 1e-12), hi)
    done = False
    for _ in range(200):
        mass, slope = _mass_and_slope(wvals, vvals, quad, q, t)
        f = mass - 1.0
        if abs(f) <= tol:
            done = True
            break
        if f > 0:
            hi = t
        else:
            lo = t
        if slope > 0:
            t_next = t - f / slope
            if not (lo < t_next < hi):
                t_next = 0.5 * (lo + hi)
        else:
            t_next = 0.5 * (lo + hi)
        t = t_next
    if not done:
        raise SolverFailureError(
            "sphere retraction did not converge", residual=abs(f)
        )
    # polish to machine precision; retraction noise in the energy scales
    # with the root resolution, not with the advertised tolerance
    for _ in range(2):
        mass, slope = _mass_and_slope(wvals, vvals, quad, q, t)
        if slope <= 0:
            break
        t = t - (mass - 1.0) / slope
    return t


def _convex_return_root(wvals, vvals, quad, q, tol):
    """Root of ``int |v + t w|^q = 1`` nearest to t = 1, or None.

    Called when a trial step leaves the unit ball.  The mass is convex
    along the ray, so from the infeasible trial at t = 1 the nearest
    feasible point sits on whichever side the mass is falling: usually
    deflation (t < 1), but near tangency the ray re-enters the ball on the
    inflation side (t > 1) and the root must be chased there instead.
    """
    m1, s1 = _mass_and_slope(wvals, vvals, quad, q, 1.0)
    if m1 <= 1.0 + tol:
        return 1.0

    if s1 < 0.0:
        # falling forward: bracket the first root beyond t = 1
        lo, hi = 1.0, 2.0
        m_hi, _ = _mass_and_slope(wvals, vvals, quad, q, hi)
        grows = 0
        while m_hi > 1.0:
            m_mid, s_mid = _mass_and_slope(wvals, vvals, quad, q, hi)
            if s_mid > 0.0:
                # passed the basin floor without dipping below 1
                return None
            lo = hi
            hi *= 2.0
            grows += 1
            if grows > 60:
                return None
            m_hi, _ = _mass_and_slope(wvals, vvals, quad, q, hi)
    else:
        # falling backward: the dip, if any, is in (0, 1)
        res = minimize_scalar(
            lambda t: _mass_and_slope(wvals, vvals, quad, q, t)[0],
            bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-13},
        )
        t_floor = float(res.x)
        if _mass_and_slope(wvals, vvals, quad, q, t_floor)[0] > 1.0:
            return None
        lo, hi = t_floor, 1.0

    # safeguarded Newton inside the bracket; polish to machine precision
    # because retraction noise in the energy tracks the root resolution
    t = 0.5 * (lo + hi)
    for _ in range(200):
        m, slope = _mass_and_slope(wvals, vvals, quad, q, t)
        if abs(m - 1.0) <= tol:
            break
        # keep [lo, hi] a sign bracket for m - 1
        if (m > 1.0) == (_mass_and_slope(wvals, vvals, quad, q, lo)[0] > 1.0):
            lo = t
        else:
            hi = t
        if slope != 0.0:
            t_next = t - (m - 1.0) / slope
            if not (min(lo, hi) < t_next < max(lo, hi)):
                t_next = 0.5 * (lo + hi)
        else:
            t_next = 0.5 * (lo + hi)
        t = t_next
    for _ in range(3):
        m, slope = _mass_and_slope(wvals, vvals, quad, q, t)
        if slope == 0.0:
            break
        t = t - (m - 1.0) / slope
    return t


def lift_to_sphere(u0: Field, v: Field, tol: float = 1e-12) -> Field:
    """Scale the zero-trace part of ``u0`` onto the unit critical sphere.

    Requires ``||v||_q < 1`` and a nonzero ``u0``; returns ``t u0 + v`` with
    the critical norm within ``tol`` of one.  Together with
    ``u -> (w - v) / ||w - v||_q`` this is a bijection between nonzero
    zero-trace directions (up to scale) and sphere points over ``v``.
    """
    grid = u0.grid
    q = critical_exponent(grid.n)
    if lq_norm(v, q) >= 1.0:
        raise PreconditionError("lifting needs the boundary extension inside "
                                "the unit critical ball")
    if float(np.max(np.abs(u0.values))) == 0.0:
        raise PreconditionError("cannot lift the zero field")
    quad = grid.node_weights.ravel()
    # Solve for the norm rather than the mass so the advertised tolerance
    # applies to ||.||_q - 1 itself.
    t = _sphere_ray_root(
        u0.values.ravel(), v.values.ravel(), quad, q, 1.0, tol * q * 0.5
    )
    lifted = Field(grid, t * u0.values + v.values)
    # One extra polish pass if the norm tolerance is not yet met.
    if abs(lq_norm(lifted, q) - 1.0) > tol:
        t = _sphere_ray_root(
            u0.values.ravel(), v.values.ravel(), quad, q, t, tol * 1e-3
        )
        lifted = Field(grid, t * u0.values + v.values)
    return lifted


# ---------------------------------------------------------------------------
# diagnostics


def concentration_metrics(u: Field, mass_fraction: float = 0.9):
    """Radius holding ``mass_fraction`` of the critical mass, plus sup data.

    The radius is measured from the origin on radial grids and from the
    node of largest magnitude on boxes.
    """
    grid = u.grid
    q = critical_exponent(grid.n)
    w = grid.node_weights.ravel()
    dens = w * np.abs(u.values.ravel()) ** q
    total = float(dens.sum())
    sup = float(np.max(np.abs(u.values)))
    if total <= 0.0:
        return math.inf, sup
    if isinstance(grid, RadialGrid):
        cum = np.cumsum(dens)
        idx = int(np.searchsorted(cum, mass_fraction * total))
        idx = min(idx, grid.num_nodes - 1)
        return float(grid.nodes[idx]), sup
    x, y, z = grid.meshgrid()
    k = int(np.argmax(np.abs(u.values)))
    cx, cy, cz = (a.ravel()[k] for a in (x, y, z))
    dist = np.sqrt(
        (x.ravel() - cx) ** 2 + (y.ravel() - cy) ** 2 + (z.ravel() - cz) ** 2
    )
    order = np.argsort(dist)
    cum = np.cumsum(dens[order])
    idx = int(np.searchsorted(cum, mass_fraction * total))
    idx = min(idx, dist.size - 1)
    return float(dist[order][idx]), sup


def estimate_multiplier(
    u: Field,
    v: Field,
    p: Union[WeightSpec, float],
    grid: Grid,
    lam: float = 0.0,
    active_tol: float = 1e-6,
    system: Optional[StiffnessSystem] = None,
) -> float:
    """Lagrange multiplier from the Green identity against ``u - v``.

    With the auxiliary extension orthogonal to zero-trace directions, the
    numerator reduces to the weighted gradient energy of ``u - v`` (minus
    the ``lam`` correction), and the denominator to
    ``||u||_q^q - int |u|^(q-2) u v``.  The identity cannot separate the
    multiplier when the denominator is below 1e-14, or when it is smaller
    than 1e-3 of its absolute-value scale: in the latter case the linear
    part has cancelled (u is within noise of the extension itself) and the
    quotient degenerates to a direction-dependent Rayleigh value.
    """
    q = critical_exponent(grid.n)
    mass = integrate(u, q)
    if abs(mass - 1.0) > active_tol * q:
        raise PreconditionError(
            f"multiplier estimate needs ||u||_q = 1; mass is {mass:.8f}"
        )
    sys_ = system if system is not None else assemble(p, grid)
    diff = u.values.ravel() - v.values.ravel()
    numer = float(u.values.ravel() @ (sys_.form @ diff))
    if lam != 0.0:
        w = grid.node_weights.ravel()
        numer -= lam * float(np.dot(w, u.values.ravel() * diff))
    w = grid.node_weights.ravel()
    uu = u.values.ravel()
    denom = float(np.dot(w, np.abs(uu) ** (q - 2.0) * uu * diff))
    denom_scale = float(np.dot(w, np.abs(uu) ** (q - 1.0) * np.abs(diff)))
    if abs(denom) < 1e-14:
        raise IndeterminateMultiplierError(
            f"multiplier denominator {denom:.3e} is below 1e-14"
        )
    if abs(denom) < 1e-3 * denom_scale:
        raise IndeterminateMultiplierError(
            f"multiplier denominator {denom:.3e} cancelled below 1e-3 of "
            f"its scale {denom_scale:.3e}"
        )
    return numer / denom


def first_order_gap(
    u: Field,
    p: Union[WeightSpec, float],
    grid: Grid,
    s0_estimate: float,
    system: Optional[StiffnessSystem] = None,
) -> tuple:
    """Both sides of the first-order energy gap bound.

    Returns ``(lhs, rhs)`` where ``lhs = s0_estimate - int p |grad u|^2``
    and ``rhs = p_min * S * (1 - int |u|^q)^(2/q)``; the bound asserts
    ``lhs <= rhs`` for admissible fields inside the unit critical ball.
    """
    q = critical_exponent(grid.n)
    mass = integrate(u, q)
    if mass > 1.0 + 1e-8:
        raise PreconditionError(f"gap bound needs int |u|^q <= 1, got {mass:.8f}")
    sys_ = system if system is not None else assemble(p, grid)
    lhs = s0_estimate - sys_.energy(u)
    spec = p if isinstance(p, WeightSpec) else WeightSpec.constant(float(p))
    s_best = analytic_constants(grid.n).sobolev
    rhs = spec.lower_bound * s_best * max(0.0, 1.0 - mass) ** (2.0 / q)
    return lhs, rhs


# ---------------------------------------------------------------------------
# the flow


def _interior_parabola(grid: Grid) -> np.ndarray:
    """Positive zero-trace profile used for seeding, on interior nodes."""
    if isinstance(grid, RadialGrid):
        r = grid.nodes[:-1]
        return 1.0 - (r / grid.radius) ** 2
    prof = np.ones(grid.shape)
    for k, ax in enumerate(grid.axes):
        lo, hi = ax[0], ax[-1]
        shape = [1, 1, 1]
        shape[k] = -1
        scale = (0.5 * (hi - lo)) ** 2
        prof = prof * ((ax - lo) * (hi - ax) / scale).reshape(shape)
    flat_mask = grid.boundary_mask.ravel()
    return prof.ravel()[~flat_mask]


def minimize(
    p: Union[WeightSpec, float],
    g: Union[BoundarySpec, float],
    grid: Grid,
    config: Optional[MinimizeConfig] = None,
    seed_field: Optional[Field] = None,
    system: Optional[StiffnessSystem] = None,
) -> RunReport:
    """Minimize the weighted energy on the unit critical sphere (or ball).

    Returns a :class:`RunReport`; never claims nonexistence.  Outcomes are
    ``attained`` (stationarity reached), ``concentration`` (the mass
    predicate fired; reported even if stationarity was also reached), or
    ``max_iter`` (budget exhausted, inconclusive).
    """
    cfg = config if config is not None else MinimizeConfig()
    spec = p if isinstance(p, WeightSpec) else WeightSpec.constant(float(p))
    gspec = g if isinstance(g, BoundarySpec) else BoundarySpec.constant(float(g))
    sys_ = system if system is not None else assemble(spec, grid)
    q = critical_exponent(grid.n)
    quad = grid.node_weights.ravel()
    interior = sys_.interior
    messages: list = []

    v = solve_auxiliary(spec, gspec, grid, system=sys_)
    v_norm = lq_norm(v, q)

    if cfg.lam != 0.0:
        eig = first_eigenpair(spec, grid, system=sys_)
        if cfg.lam >= eig.value:
            raise PreconditionError(
                f"lam={cfg.lam} is not below the first eigenvalue {eig.value:.6f}"
            )
        messages.append(f"first eigenvalue {eig.value:.8f}")

    mode = cfg.mode
    if mode == "auto":
        mode = "sphere" if v_norm < 1.0 - 1e-12 else "convex"
    if mode == "sphere" and v_norm >= 1.0 - 1e-14:
        raise ModeError(
            f"sphere mode needs ||v||_q < 1, got {v_norm:.6f}; use convex mode"
        )
    if mode == "convex" and v_norm < 1.0 - 1e-9:
        raise ModeError(
            f"convex mode expects ||v||_q >= 1, got {v_norm:.6f}; use sphere mode"
        )

    vvals = v.values.ravel()
    u, seed_label = _initial_point(
        cfg, grid, sys_, v, mode, seed_field, quad, q
    )
    initial_sup = float(np.max(np.abs(u.values)))

    conc_radius = cfg.conc_radius
    if conc_radius is None:
        mean_h = (
            grid.mean_spacing if isinstance(grid, RadialGrid) else grid.spacing
        )
        conc_radius = 10.0 * mean_h

    def lam_mass(x_full):
        return float(np.dot(quad, x_full * x_full))

    def energy_of(x_full):
        e = float(x_full @ (sys_.form @ x_full))
        if cfg.lam != 0.0:
            e -= cfg.lam * lam_mass(x_full)
        return e

    x = u.values.ravel().copy()
    energy = energy_of(x)
    energy_trace = [energy]
    flow_log = [(float(x @ (sys_.form @ x)), float(np.dot(quad, np.abs(x) ** q)))]
    min_sobolev_ratio = None
    s_best = analytic_constants(grid.n).sobolev

    step = cfg.step0
    outcome = None
    iterations = 0
    fail_count = 0
    tiny_count = 0
    conc_hit = False

    for iterations in range(1, cfg.max_iter + 1):
        # gradient of the energy in the zero-trace directions
        grad = 2.0 * (sys_.form @ x)[interior]
        if cfg.lam != 0.0:
            grad -= 2.0 * cfg.lam * (quad[interior] * x[interior])
        cons = q * quad[interior] * np.abs(x[interior]) ** (q - 2.0) * x[interior]
        zg = sys_.solve_interior(grad, method="direct")
        zc = sys_.solve_interior(cons, method="direct")
        czc = float(cons @ zc)
        mu = float(cons @ zg) / czc if czc > 1e-300 else 0.0
        # solve on the projected residual itself: forming the direction as
        # zg - mu*zc cancels catastrophically near boundary layers, where
        # both solves are large and the difference is small
        res_vec = grad - mu * cons
        d = -sys_.solve_interior(res_vec, method="direct")
        station2 = max(float(-res_vec @ d), 0.0)
        scale = max(abs(energy), 1.0)
        rel_grad = math.sqrt(station2 / scale)

        # track the Sobolev ratio of the zero-trace part
        wpart = x - vvals
        w_mass = float(np.dot(quad, np.abs(wpart) ** q))
        if w_mass > 1e-12:
            ratio = float(wpart @ (sys_.form @ wpart)) / (
                spec.lower_bound * s_best * w_mass ** (2.0 / q)
            )
            if min_sobolev_ratio is None or ratio < min_sobolev_ratio:
                min_sobolev_ratio = ratio

        mass_radius, sup = concentration_metrics(
            Field(grid, x.reshape(u.values.shape)), cfg.mass_fraction
        )
        amp_ratio = sup / max(initial_sup, 1e-300)
        conc_hit = mass_radius < conc_radius and amp_ratio >= cfg.amp_factor
        if conc_hit:
            outcome = "concentration"
            break
        if rel_grad <= cfg.grad_tol:
            outcome = "attained"
            break

        accepted = False
        s = step
        for _ in range(cfg.max_backtracks):
            trial_w = (x - vvals)[interior] + s * d
            x_trial = _make_feasible(
                trial_w, vvals, interior, quad, q, mode, cfg.retraction_tol,
                x, sys_
            )
            if x_trial is None:
                s *= cfg.backtrack
                continue
            e_trial = energy_of(x_trial)
            if e_trial <= energy - 1e-4 * s * station2:
                x = x_trial
                prev_energy = energy
                energy = e_trial
                accepted = True
                step = min(s * cfg.step_growth, 1e6)
                break
            s *= cfg.backtrack
        if not accepted:
            # no admissible decrease; treat as converged if the projected
            # gradient is already small, otherwise keep trying until the
            # stall window runs out
            fail_count += 1
            step = max(step * cfg.backtrack, 1e-12)
            if fail_count >= cfg.stall_window:
                outcome = "attained" if rel_grad <= 1e3 * cfg.grad_tol else "max_iter"
                if outcome == "max_iter":
                    messages.append(
                        f"stalled with projected gradient {rel_grad:.3e}"
                    )
                break
            continue
        fail_count = 0
        if iterations % cfg.log_every == 0:
            energy_trace.append(energy)
            flow_log.append(
                (float(x @ (sys_.form @ x)), float(np.dot(quad, np.abs(x) ** q)))
            )
        if abs(prev_energy - energy) <= cfg.stall_tol * max(1.0, abs(energy)):
            tiny_count += 1
            if tiny_count >= cfg.stall_window:
                outcome = "attained" if rel_grad <= 1e3 * cfg.grad_tol else "max_iter"
                break
        else:
            tiny_count = 0

    if outcome is None:
        outcome = "max_iter"
        messages.append("iteration budget exhausted")

    u_final = Field(grid, x.reshape(u.values.shape))
    final_mass = float(np.dot(quad, np.abs(x) ** q))
    energy_trace.append(energy)
    flow_log.append((float(x @ (sys_.form @ x)), final_mass))
    mass_radius, sup = concentration_metrics(u_final, cfg.mass_fraction)
    amp_ratio = sup / max(initial_sup, 1e-300)

    constraint_residual = abs(final_mass ** (1.0 / q) - 1.0)
    constraint_active = constraint_residual <= 1e-6

    multiplier = None
    note = ""
    try:
        multiplier = estimate_multiplier(
            u_final, v, spec, grid, lam=cfg.lam, active_tol=1e-4, system=sys_
        )
    except IndeterminateMultiplierError:
        # the minimizer sits within noise of the extension itself, so the
        # Green quotient is 0/0; fall back to the least-squares multiplier
        # from the last descent direction, which tends to zero with u - v
        multiplier = mu
        note = "least-squares fallback; Green denominator degenerate"
    except PreconditionError as exc:
        note = f"off constraint: {exc}"

    # first-order gap bound along the flow, for unperturbed runs
    gap_trace = []
    if cfg.lam == 0.0:
        s0_est = min(ge for ge, _ in flow_log)
        for grad_energy, mass in flow_log:
            lhs = s0_est - grad_energy
            rhs = (
                spec.lower_bound
                * s_best
                * max(0.0, 1.0 - mass) ** (2.0 / q)
            )
            gap_trace.append((lhs, rhs))

    segment_ok = None
    if v_norm > 1.0 + 1e-9 and constraint_active:
        segment_ok = all(
            segment_lq_mass(t, u_final, v) > 1.0
            for t in np.linspace(0.0, 0.9, 10)
        )

    return RunReport(
        outcome=outcome,
        mode=mode,
        final_energy=energy,
        final_gradient_energy=float(x @ (sys_.form @ x)),
        final_lq_mass=final_mass,
        constraint_residual=constraint_residual,
        multiplier=multiplier,
        multiplier_note=note,
        flow_multiplier=float(mu),
        v_lq_norm=v_norm,
        lam=cfg.lam,
        iterations=iterations,
        seed_label=seed_label,
        grid_descriptor=grid.descriptor(),
        mass_radius=mass_radius,
        amplitude_ratio=amp_ratio,
        concentration_flag=conc_hit,
        constraint_active=constraint_active,
        positivity_ok=bool(np.min(u_final.values) >= -1e-10),
        min_sobolev_ratio=min_sobolev_ratio,
        segment_check_ok=segment_ok,
        energy_trace=energy_trace,
        gap_trace=gap_trace,
        messages=messages,
        final_field=u_final,
    )


def _make_feasible(trial_w, vvals, interior, quad, q, mode, tol, x_prev, sys_):
    """Map a trial zero-trace part back into the feasible set.

    Returns the full nodal vector, or None when no feasible return exists
    along this ray (the caller then backtracks).
    """
    wfull = np.zeros_like(vvals)
    wfull[interior] = trial_w
    if mode == "sphere":
        if float(np.max(np.abs(trial_w))) == 0.0:
            return None
        t = _sphere_ray_root(wfull, vvals, quad, q, 1.0, tol)
        return vvals + t * wfull
    mass = float(np.dot(quad, np.abs(vvals + wfull) ** q))
    if mass <= 1.0 + tol:
        return vvals + wfull
    t = _convex_return_root(wfull, vvals, quad, q, tol)
    if t is None:
        return None
    return vvals + t * wfull


def _initial_point(cfg, grid, sys_, v, mode, seed_field, quad, q):
    """Build the feasible starting point and describe it."""
    vvals = v.values.ravel()
    if mode == "sphere":
        if seed_field is not None and cfg.seed_kind == "field":
            w0 = seed_field.values.ravel().copy()
            label = "user field"
        elif cfg.seed_kind == "bubble" and isinstance(grid, RadialGrid):
            bp = BubbleParams.for_grid(grid, cfg.seed_eps)
            w0 = cfg.seed_scale * truncated_bubble(bp, grid).values
            label = f"bubble(eps={cfg.seed_eps:g})"
        else:
            w0 = np.zeros(grid.num_nodes)
            w0[sys_.interior] = _interior_parabola(grid)
            label = "interior parabola"
        lifted = lift_to_sphere(
            Field(grid, w0.reshape(v.values.shape)), v, tol=cfg.retraction_tol
        )
        return lifted, label

    # convex mode: damp the extension toward the boundary.  The profile
    # (1 - parabola)^k keeps the trace of v, kills the interior as k grows,
    # and so always reaches the unit ball for bounded data.
    damp = np.ones_like(vvals)
    damp[sys_.interior] = 1.0 - _interior_parabola(grid)

    def mass(k):
        return float(np.dot(quad, np.abs(vvals * damp**k) ** q))

    k = 1.0
    while mass(k) >= 0.98 and k < 2**40:
        k *= 2.0
    if mass(k) >= 1.0:
        raise SolverFailureError(
            "could not find a feasible starting point in convex mode"
        )
    x0 = vvals * damp**k
    return Field(grid, x0.reshape(v.values.shape)), f"damped extension(k={k:g})"
