"""Minimally invasive safety filter for slab constraints on the control.

Projecting the nominal input onto ``lower <= a . u <= upper`` has an exact
closed form: pass the nominal through when the input direction vanishes or
the nominal already satisfies the slab, otherwise shift along ``a`` onto the
violated bound.  The result records which branch fired, which the simulator
uses for event classification.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from .core import ConstraintSlab, NumericalDomainError


class InfeasibleSlabError(RuntimeError):
    """Slab with lower > upper while the input direction is usable.

    A valid constant-sum pair cannot produce this (the gap is alpha(h) +
    alpha_bar(b - h) >= 0 on the corridor), so it signals a modeling bug and
    is raised loudly instead of returning a least-violation control.
    """


class ActiveBranch(enum.IntEnum):
    NOMINAL = 0
    UPPER_CLAMPED = 1
    LOWER_CLAMPED = 2
    ZERO_LG = 3


# CSV / report names for the branches (index = enum value).
BRANCH_NAMES = ("Nominal", "UpperClamped", "LowerClamped", "ZeroLg")


@dataclasses.dataclass(frozen=True, eq=False)
class FilterResult:
    u_star: np.ndarray
    active: ActiveBranch
    correction_norm: float


def default_eps(a: np.ndarray) -> float:
    """Threshold below which the input direction counts as vanished.

    Scaled to the row magnitude: below this, the 1/|a|^2 correction term
    amplifies rounding noise faster than it buys constraint satisfaction.
    """
    scale = 0.0
    for v in a:  # rows are tiny; a plain loop beats ufunc dispatch
        av = abs(v)
        if av > scale:
            scale = av
    return 1e-10 * (1.0 + scale)


def solve_closed_form(slab: ConstraintSlab, u0: np.ndarray,
                      eps: float | None = None) -> FilterResult:
    """Closest control to u0 satisfying the slab, in closed form.

    Branches: vanished input direction (|a| < eps) passes u0 through; a
    nominal inside the slab is untouched; otherwise u0 is shifted along a^T
    onto the violated bound.  ``upper`` may be +inf (one-sided constraint).

    Raises InfeasibleSlabError when lower > upper with a usable direction,
    and NumericalDomainError on non-finite inputs.
    """
    a = slab.a
    lower = slab.lower
    upper = slab.upper
    if eps is None:
        eps = default_eps(a)
    elif not (eps > 0):
        raise ValueError(f"eps must be > 0, got {eps}")
    u0 = np.asarray(u0, dtype=float)

    # Finiteness is checked through the contracted scalars: any non-finite
    # entry of a or u0 surfaces in a2 or s (squares cannot cancel, and
    # 0 * inf is nan), so no array-wide reduction is needed here.
    a2 = float(a @ a)
    s = float(a @ u0)
    if not (math.isfinite(lower) and not math.isnan(upper)
            and math.isfinite(a2) and math.isfinite(s)):
        raise NumericalDomainError(
            f"non-finite filter inputs: a={a}, lower={lower}, upper={upper}, u0={u0}")

    if math.sqrt(a2) < eps:
        return FilterResult(u_star=u0.copy(), active=ActiveBranch.ZERO_LG,
                            correction_norm=0.0)
    if lower > upper:
        raise InfeasibleSlabError(
            f"empty slab: lower={lower} > upper={upper} with |a|={math.sqrt(a2)}; "
            "the barrier pair or rate functions are invalid at this state")

    if s > upper:
        shift = (upper - s) / a2
        branch = ActiveBranch.UPPER_CLAMPED
    elif s < lower:
        shift = (lower - s) / a2
        branch = ActiveBranch.LOWER_CLAMPED
    else:
        return FilterResult(u_star=u0.copy(), active=ActiveBranch.NOMINAL,
                            correction_norm=0.0)
    u_star = u0 + a * shift
    return FilterResult(u_star=u_star, active=branch,
                        correction_norm=abs(shift) * math.sqrt(a2))


def feasibility_gap(slab: ConstraintSlab) -> float:
    """upper - lower; nonnegative certifies a shared control exists here.

    With linear rates of coefficient c on a constant-sum pair this equals
    c*b at every state, so the joint constraint can never empty out.
    """
    return slab.upper - slab.lower


def zero_lg_consistency(slab: ConstraintSlab, eps: float | None = None) -> bool:
    """Runtime barrier-validity monitor.

    When the input direction vanishes the constraint degenerates to
    ``lower <= 0 <= upper``; a violated degenerate slab means the barrier
    fails as a control barrier at this state.
    """
    if eps is None:
        eps = default_eps(slab.a)
    elif not (eps > 0):
        raise ValueError(f"eps must be > 0, got {eps}")
    a = slab.a
    if math.sqrt(float(a @ a)) >= eps:
        return True
    return slab.lower <= 0.0 <= slab.upper
