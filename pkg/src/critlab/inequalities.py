"""Scalar expansion inequalities for the critical power.

For q >= 3 the pointwise bound

    (a + b)^q >= a^q + q a^(q-1) b + q a b^(q-1) + b^q,   a, b >= 0,

holds with no constant.  For 2 < q < 3 it fails, and the defect is instead
bounded by C a^(q-1) b (a <= b) or C a b^(q-1) (a >= b); the constant is
measured empirically here, not derived.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError, WrongRegimeError

__all__ = ["RemainderProbe", "check_quartic_bound", "expansion_gap", "remainder_ratio"]


def check_quartic_bound(a, b, q: float, rel_slack: float = 1e-12) -> bool:
    """Whether the four-term lower bound holds at (a, b), q >= 3."""
    if q < 3.0:
        raise WrongRegimeError(
            f"the four-term bound needs q >= 3; for q={q} use remainder_ratio"
        )
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValidationError("arguments must be nonnegative")
    lhs = (a + b) ** q
    rhs = a**q + q * a ** (q - 1) * b + q * a * b ** (q - 1) + b**q
    return bool(np.all(lhs - rhs >= -rel_slack * np.maximum(lhs, 1.0)))


def expansion_gap(t, q: float):
    """|(1+t)^q - (t^q + q t^(q-1) + q t + 1)| on the normalized ray."""
    t = np.asarray(t, dtype=float)
    return np.abs((1.0 + t) ** q - (t**q + q * t ** (q - 1) + q * t + 1.0))


@dataclass(frozen=True)
class RemainderProbe:
    q: float
    num_samples: int
    max_ratio: float
    argmax_t: float
    seed: int


def remainder_ratio(q: float, num_samples: int = 100_000, seed: int = 0) -> RemainderProbe:
    """Empirical bound for the defect constant in the regime 2 < q < 3.

    Samples t log-uniformly over [1e-6, 1e6] and maximizes the defect
    normalized by t (t >= 1) or t^(q-1) (t <= 1).  Deterministic for a
    fixed seed.
    """
    if not 2.0 < q < 3.0:
        raise WrongRegimeError(f"remainder probe is for 2 < q < 3, got q={q}")
    if num_samples < 100:
        raise ValidationError(f"need at least 100 samples, got {num_samples}")
    rng = np.random.default_rng(seed)
    t = np.exp(rng.uniform(np.log(1e-6), np.log(1e6), size=num_samples))
    gap = expansion_gap(t, q)
    denom = np.where(t >= 1.0, t, t ** (q - 1.0))
    ratio = gap / denom
    if not np.all(np.isfinite(ratio)):
        raise ValidationError("defect ratio overflowed; narrow the sample range")
    k = int(np.argmax(ratio))
    return RemainderProbe(
        q=q,
        num_samples=num_samples,
        max_ratio=float(ratio[k]),
        argmax_t=float(t[k]),
        seed=seed,
    )
