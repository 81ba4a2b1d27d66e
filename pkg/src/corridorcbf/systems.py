"""Benchmark systems and barriers: double integrator, extended unicycle,
the sinusoidal corridor pair, and the single-barrier baseline that loses
control authority on the corridor midline.

The unicycle gets an extra integrator on forward speed (``vdot = u_v``) so
both position constraints have uniform relative degree 2; state order is
(x, y, v, theta).  Heading is never wrapped: every barrier quantity depends
on theta only through sin/cos, so wrapping would add discontinuities without
changing any value.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence, Tuple

import numpy as np

from .backstepping import SmoothJet
from .core import BarrierField, ConstraintSlab, ControlAffineSystem, ParallelPair


def double_integrator() -> Tuple[ControlAffineSystem, ParallelPair, SmoothJet]:
    """Double integrator x1dot = x2, x2dot = u with corridor x1 in [-1, 1].

    The pair is h = 1 + x1 with constant sum b = 2 (so hbar = 1 - x1); its
    drift derivative is L_f h = x2.
    """
    g_const = np.array([[0.0], [1.0]])
    system = ControlAffineSystem(
        n=2, m=1,
        drift=lambda x: np.array([x[1], 0.0]),
        input_matrix=lambda x: g_const,
        label="double_integrator",
        constant_input_matrix=True,
    )
    grad_h = np.array([1.0, 0.0])
    pair = ParallelPair(
        h=BarrierField(
            value=lambda x: 1.0 + x[0],
            gradient=lambda x: grad_h,
            hessian=lambda x: np.zeros((2, 2)),
            label="x1_corridor",
        ),
        b=2.0,
    )
    grad_lfh = np.array([0.0, 1.0])
    jet = SmoothJet(
        lf_values=(lambda x: float(x[1]),),
        lf_gradients=(lambda x: grad_lfh,),
    )
    return system, pair, jet


@dataclasses.dataclass(frozen=True)
class UnicycleState:
    """Named view of the extended unicycle state (x, y, v, theta)."""

    x: float
    y: float
    v: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.theta])

    @classmethod
    def from_array(cls, arr) -> "UnicycleState":
        x, y, v, theta = np.asarray(arr, dtype=float)
        return cls(x=float(x), y=float(y), v=float(v), theta=float(theta))


UNICYCLE_DIMS = {"x": 0, "y": 1, "v": 2, "theta": 3}


def unicycle_extended() -> Tuple[ControlAffineSystem, dict]:
    """Integrator-extended unicycle: inputs are (u_v, u_theta).

    f = (v cos th, v sin th, 0, 0); the input matrix is constant with the
    acceleration and turn-rate channels feeding v and theta.
    """
    g_const = np.array([
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
    ])

    def drift(s):
        v, th = s[2], s[3]
        return np.array([v * math.cos(th), v * math.sin(th), 0.0, 0.0])

    system = ControlAffineSystem(n=4, m=2, drift=drift,
                                 input_matrix=lambda s: g_const,
                                 label="unicycle_extended",
                                 constant_input_matrix=True)
    return system, dict(UNICYCLE_DIMS)


def sine_corridor() -> Tuple[ParallelPair, SmoothJet]:
    """Sinusoidal corridor pair h1 = sin x + y + 1 over the unicycle state.

    Constant sum b = 2; the positional gradient never vanishes (its y
    component is identically 1).  The jet carries
    L_f h1 = v (cos x cos th + sin th) and its full-state gradient.
    """

    def value(s):
        return math.sin(s[0]) + s[1] + 1.0

    def gradient(s):
        return np.array([math.cos(s[0]), 1.0, 0.0, 0.0])

    def hessian(s):
        out = np.zeros((4, 4))
        out[0, 0] = -math.sin(s[0])
        return out

    def lf_value(s):
        return s[2] * (math.cos(s[0]) * math.cos(s[3]) + math.sin(s[3]))

    def lf_gradient(s):
        x, v, th = s[0], s[2], s[3]
        return np.array([
            -v * math.sin(x) * math.cos(th),
            0.0,
            math.cos(x) * math.cos(th) + math.sin(th),
            v * (-math.cos(x) * math.sin(th) + math.cos(th)),
        ])

    pair = ParallelPair(
        h=BarrierField(value=value, gradient=gradient, hessian=hessian,
                       label="sine_corridor"),
        b=2.0,
    )
    jet = SmoothJet(lf_values=(lf_value,), lf_gradients=(lf_gradient,))
    return pair, jet


def unicycle_lie_terms(c1: float, s) -> Tuple[float, float, float]:
    """Hand-derived input/drift terms of the level-2 sine-corridor barrier.

    For h2 = c1 h1 + L_f h1 on the extended unicycle:

        lgv     = grad_xy h1 . (cos th, sin th)          (acceleration channel)
        lgtheta = v * grad_xy h1 . (-sin th, cos th)     (turn-rate channel)
        drift   = c1 v (grad_xy h1 . dir) + v^2 dir^T hess_xy h1 dir

    with dir = (cos th, sin th).  These must match the generic chain's
    L_g h2 and L_f h2; the redundancy is exploited by the test suite.
    """
    if not (c1 > 0):
        raise ValueError(f"c1 must be > 0, got {c1}")
    if isinstance(s, UnicycleState):
        x, y, v, th = s.x, s.y, s.v, s.theta
    else:
        x, y, v, th = np.asarray(s, dtype=float)
    gx, gy = math.cos(x), 1.0
    ct, st = math.cos(th), math.sin(th)
    lgv = gx * ct + gy * st
    lgtheta = v * (-gx * st + gy * ct)
    # sine corridor positional Hessian is [[-sin x, 0], [0, 0]]
    drift = c1 * v * (gx * ct + gy * st) + v * v * (-math.sin(x)) * ct * ct
    return float(lgv), float(lgtheta), float(drift)


def check_gradient_nonzero(pair, region_samples: Sequence[np.ndarray],
                           position_dims: Tuple[int, int] = (0, 1)) -> bool:
    """True iff the positional gradient is nonzero at every sample.

    A nonvanishing positional gradient on the corridor is the checkable
    sufficient condition for the level-2 unicycle pair to retain control
    authority everywhere.  Accepts a pair or a bare barrier field.
    Sampling-based: exact for the shipped barriers (whose y gradient is
    identically 1), advisory for user barriers.
    """
    if len(region_samples) == 0:
        raise ValueError("check_gradient_nonzero needs at least one sample")
    field = pair.h if isinstance(pair, ParallelPair) else pair
    i, j = position_dims
    for x in region_samples:
        grad = np.asarray(field.gradient(np.asarray(x, dtype=float)), dtype=float)
        if math.hypot(grad[i], grad[j]) <= 0.0:
            return False
    return True


@dataclasses.dataclass(frozen=True, eq=False)
class SingleCbfBaseline:
    """Single-barrier comparison construction for a corridor.

    ``h_s`` covers both boundaries at once (and so has a vanishing gradient
    on the midline); ``h2_s`` is its level-2 backstepped barrier with gain
    c1, and ``c2`` the liveness gain of the one-sided condition
    ``L_f h2_s + L_g h2_s u >= -c2 h2_s``.

    ``constraint_at`` returns that condition as a one-sided slab (upper =
    +inf), so the standard closed-form projection doubles as this filter:
    u* = u0 + L_g^T max(0, -c2 h2 - L_f h2 - L_g h2 u0)/|L_g h2|^2 when the
    input direction is usable, u* = u0 otherwise.
    """

    h_s: BarrierField
    c1: float
    c2: float
    h2_s: BarrierField
    constraint_at: Callable[[np.ndarray], ConstraintSlab]


def _double_integrator_baseline(c1: float, c2: float) -> SingleCbfBaseline:
    # h_s = 1 - x1^2, h2_s = c1 (1 - x1^2) - 2 x1 x2
    h_s = BarrierField(
        value=lambda x: 1.0 - x[0] ** 2,
        gradient=lambda x: np.array([-2.0 * x[0], 0.0]),
        hessian=lambda x: np.array([[-2.0, 0.0], [0.0, 0.0]]),
        label="x1_single",
    )

    def h2_value(x):
        return c1 * (1.0 - x[0] ** 2) - 2.0 * x[0] * x[1]

    def h2_gradient(x):
        return np.array([-2.0 * c1 * x[0] - 2.0 * x[1], -2.0 * x[0]])

    h2_s = BarrierField(value=h2_value, gradient=h2_gradient, label="x1_single_level2")

    def constraint_at(x):
        x1, x2 = x[0], x[1]
        lf = (-2.0 * c1 * x1 - 2.0 * x2) * x2
        a = np.array([-2.0 * x1])
        lower = -lf - c2 * h2_value(x)
        return ConstraintSlab(a=a, lower=lower, upper=math.inf)

    return SingleCbfBaseline(h_s=h_s, c1=c1, c2=c2, h2_s=h2_s,
                             constraint_at=constraint_at)


def _unicycle_baseline(c1: float, c2: float) -> SingleCbfBaseline:
    # h_s = 1 - (sin x + y)^2 over the 4-state; write sigma = sin x + y and
    # A = cos x cos th + sin th, so h2_s = c1 (1 - sigma^2) - 2 sigma v A.
    h_s = BarrierField(
        value=lambda s: 1.0 - (math.sin(s[0]) + s[1]) ** 2,
        gradient=lambda s: np.array([
            -2.0 * (math.sin(s[0]) + s[1]) * math.cos(s[0]),
            -2.0 * (math.sin(s[0]) + s[1]),
            0.0, 0.0,
        ]),
        hessian=None,
        label="sine_single",
    )

    def parts(s):
        x, y, v, th = s[0], s[1], s[2], s[3]
        sigma = math.sin(x) + y
        ct, st = math.cos(th), math.sin(th)
        cx = math.cos(x)
        big_a = cx * ct + st
        return x, y, v, th, sigma, ct, st, cx, big_a

    def h2_value(s):
        _, _, v, _, sigma, _, _, _, big_a = parts(s)
        return c1 * (1.0 - sigma * sigma) - 2.0 * sigma * v * big_a

    def h2_gradient(s):
        x, _, v, _, sigma, ct, st, cx, big_a = parts(s)
        return np.array([
            -2.0 * c1 * sigma * cx - 2.0 * v * (big_a * cx - sigma * math.sin(x) * ct),
            -2.0 * c1 * sigma - 2.0 * v * big_a,
            -2.0 * sigma * big_a,
            -2.0 * sigma * v * (-cx * st + ct),
        ])

    h2_s = BarrierField(value=h2_value, gradient=h2_gradient, label="sine_single_level2")

    def constraint_at(s):
        v, th = s[2], s[3]
        grad = h2_gradient(s)
        lf = grad[0] * v * math.cos(th) + grad[1] * v * math.sin(th)
        a = np.array([grad[2], grad[3]])
        lower = -lf - c2 * h2_value(s)
        return ConstraintSlab(a=a, lower=lower, upper=math.inf)

    return SingleCbfBaseline(h_s=h_s, c1=c1, c2=c2, h2_s=h2_s,
                             constraint_at=constraint_at)


def single_cbf_baseline(kind: str, c1: float, c2: float) -> SingleCbfBaseline:
    """Single-barrier baseline for the named system kind.

    ``kind`` is "double_integrator" or "unicycle".  Both gains must be
    positive.  The returned construction is used by the baseline simulation
    scenarios; its filter is minimally invasive for the one-sided condition
    but passes the nominal through wherever the input direction vanishes.
    """
    if not (c1 > 0 and c2 > 0):
        raise ValueError(f"gains must be > 0, got c1={c1}, c2={c2}")
    if kind == "double_integrator":
        return _double_integrator_baseline(float(c1), float(c2))
    if kind == "unicycle":
        return _unicycle_baseline(float(c1), float(c2))
    raise ValueError(f"unknown baseline kind: {kind!r}")
