"""Core types for control-affine systems and constant-sum barrier pairs.

A barrier field h defines the safe half ``h(x) >= 0``; a pair (h, hbar) whose
sum is a positive constant b models two parallel boundaries with the safe
corridor in between.  Because hbar is stored implicitly as ``b - h``, the
constant-sum identity and the gradient anti-symmetry ``grad hbar = -grad h``
hold by construction and cannot drift apart.

The central operation is :func:`eval_slab`, which combines the barrier
conditions on h and hbar into a single two-sided linear constraint
``lower <= a . u <= upper`` on the control.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Dimensions or problem setup are inconsistent."""


class NumericalDomainError(ArithmeticError):
    """An evaluation produced non-finite values."""


# States and control inputs are plain 1-D float arrays; structured wrappers
# exist only where a system has named components (see systems.UnicycleState).
State = np.ndarray
ControlInput = np.ndarray


def as_vector(values, length: Optional[int] = None, what: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ConfigurationError(f"{what} must be 1-D, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise ConfigurationError(f"{what} must have length {length}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise NumericalDomainError(f"{what} has non-finite entries: {v}")
    return v


@dataclasses.dataclass(frozen=True)
class ControlAffineSystem:
    """Dynamics ``xdot = f(x) + g(x) u`` with state dim n and input dim m.

    ``drift`` maps a state to the length-n drift vector f(x); ``input_matrix``
    maps a state to the n-by-m input matrix g(x).  Both must return finite,
    correctly sized outputs for finite states.  Set ``constant_input_matrix``
    when g does not depend on the state; integrators then evaluate it once
    per step instead of once per stage.
    """

    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    constant_input_matrix: bool = False

    def f(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.drift(x), dtype=float)
        if out.shape != (self.n,):
            raise ConfigurationError(
                f"drift of '{self.label}' returned shape {out.shape}, expected ({self.n},)")
        if not np.isfinite(out).all():
            raise NumericalDomainError(f"drift of '{self.label}' non-finite at x={x}")
        return out

    def g(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.input_matrix(x), dtype=float)
        if out.shape != (self.n, self.m):
            raise ConfigurationError(
                f"input matrix of '{self.label}' returned shape {out.shape}, "
                f"expected ({self.n}, {self.m})")
        if not np.isfinite(out).all():
            raise NumericalDomainError(f"input matrix of '{self.label}' non-finite at x={x}")
        return out

    def xdot(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.f(x) + self.g(x) @ u


@dataclasses.dataclass(frozen=True)
class ClassKInfty:
    """Extended class-K-infinity rate function: strictly increasing, zero at zero.

    ``coefficient`` is set for the linear family ``s -> c*s`` (the default
    everywhere in this library) and None for user-supplied nonlinear rates.
    """

    apply: Callable[[float], float]
    coefficient: Optional[float] = None

    def __call__(self, s: float) -> float:
        return float(self.apply(s))


def class_k_linear(c: float) -> ClassKInfty:
    """Linear rate ``s -> c*s`` with c > 0 (odd-extended to all of R)."""
    if not (c > 0):
        raise ValueError(f"class-K coefficient must be > 0, got {c}")
    c = float(c)
    return ClassKInfty(apply=lambda s: c * s, coefficient=c)


@dataclasses.dataclass(frozen=True)
class BarrierField:
    """Scalar field h with analytic gradient (and Hessian where chains need it).

    ``value`` maps a state to h(x); ``gradient`` to the length-n gradient.
    ``hessian`` is only required when the field seeds a backstepping chain of
    depth >= 2 or when positional curvature terms are evaluated by hand.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __call__(self, x: np.ndarray) -> float:
        return float(self.value(x))


@dataclasses.dataclass(frozen=True)
class ParallelPair:
    """Barrier field h plus a constant b > 0; the partner is ``hbar = b - h``.

    Storing only (h, b) makes ``h + hbar = b`` exact by construction and
    forces ``grad hbar = -grad h`` at every state.
    """

    h: BarrierField
    b: float

    def __post_init__(self):
        if not (self.b > 0):
            raise ValueError(f"constant sum b must be > 0, got {self.b}")

    def hbar_value(self, x: np.ndarray) -> float:
        return self.b - float(self.h.value(x))

    def hbar_gradient(self, x: np.ndarray) -> np.ndarray:
        return -self.h.gradient(x)

    def hbar_field(self) -> BarrierField:
        """The partner barrier as a standalone field (derived, never stored)."""
        return BarrierField(
            value=self.hbar_value,
            gradient=self.hbar_gradient,
            hessian=None if self.h.hessian is None
            else (lambda x: -self.h.hessian(x)),
            label=f"{self.h.label}~complement" if self.h.label else "complement",
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ConstraintSlab:
    """Two-sided linear constraint ``lower <= a . u <= upper`` on the control.

    ``a`` is the length-m row of input-direction derivatives of the barrier.
    ``upper`` may be +inf for one-sided constraints (the single-barrier
    baseline); slabs produced by :func:`eval_slab` always have finite bounds.
    """

    a: np.ndarray
    lower: float
    upper: float


def eval_slab(pair: ParallelPair, system: ControlAffineSystem,
              alpha: ClassKInfty, alpha_bar: ClassKInfty,
              x: np.ndarray) -> ConstraintSlab:
    """Joint slab constraint of a constant-sum pair at state x.

    With drift derivative ``lfh = grad h . f`` the two barrier conditions
    combine into ``lower <= a . u <= upper`` with

        a     = grad h(x)^T g(x)
        lower = -lfh - alpha(h(x))
        upper = -lfh + alpha_bar(b - h(x))
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (system.n,):
        raise ConfigurationError(
            f"state has shape {x.shape}, expected ({system.n},)")
    # Raw drift/input-matrix/field calls keep this hot-path cheap; shape
    # mismatches surface in the products below and non-finite states turn
    # into non-finite outputs (math.* evaluators raise ValueError instead,
    # which is translated).
    try:
        grad = pair.h.gradient(x)
        f = system.drift(x)
        g = system.input_matrix(x)
        hval = float(pair.h.value(x))
    except (ValueError, OverflowError) as exc:
        raise NumericalDomainError(f"barrier/system evaluation failed at x={x}: {exc}") from exc
    try:
        lfh = float(grad @ f)
        a = grad @ g
    except ValueError as exc:
        raise ConfigurationError(
            f"barrier gradient/system dimensions disagree for '{pair.h.label}' "
            f"on '{system.label}': {exc}") from exc
    lower = -lfh - alpha(hval)
    upper = -lfh + alpha_bar(pair.b - hval)
    if not (math.isfinite(lower) and math.isfinite(upper) and math.isfinite(hval)
            and math.isfinite(float(a @ a))):
        raise NumericalDomainError(
            f"slab evaluation non-finite at x={x}: a={a}, lower={lower}, upper={upper}")
    return ConstraintSlab(a=a, lower=lower, upper=upper)


def verify_parallel(h: BarrierField, hbar: BarrierField,
                    samples: Sequence[np.ndarray], tol: float = 1e-9):
    """Check that h + hbar is a positive constant over the samples.

    Returns ``(is_parallel, b_estimate)`` where the estimate is the mean of
    the sampled sums.  Pairs built via :class:`ParallelPair` pass at machine
    precision; the default tol keeps user-supplied pairs honest.
    """
    if len(samples) == 0:
        raise ValueError("verify_parallel needs at least one sample state")
    sums = np.array([float(h.value(x)) + float(hbar.value(x)) for x in samples])
    b_est = float(np.mean(sums))
    ok = bool(np.max(np.abs(sums - b_est)) <= tol and b_est > 0)
    return ok, b_est
