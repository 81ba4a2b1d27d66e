"""Backstepping construction of target barrier pairs for high relative degree.

A constant-sum pair whose input-direction derivative vanishes identically
(relative degree n > 1) cannot constrain the control directly.  The recursion

    h_i = c_{i-1} h_{i-1} + L_f h_{i-1},      b_i = c_{i-1} b_{i-1}

preserves the constant-sum structure at every level and, after n - 1 steps,
produces a pair (h_n, b_n - h_n) of relative degree one that the slab filter
can enforce.  Gains are chosen from the initial condition so that x0 lands
strictly inside every level's corridor, which is what makes the induced safe
set adapt to the start instead of requiring retuning.

Since h_i is a fixed linear combination of h, L_f h, ..., L_f^{i-1} h (apply
(c_{i-1} + L_f) repeatedly), a chain only needs drift derivatives of the base
barrier up to order n - 1; a :class:`SmoothJet` supplies them analytically.
"""

from __future__ import annotations

import dataclasses
import functools
import warnings
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .core import (BarrierField, ClassKInfty, ConfigurationError, ConstraintSlab,
                   ControlAffineSystem, ParallelPair, as_vector, eval_slab)


class InitialConditionError(ValueError):
    """x0 is not strictly inside the corridor required by the gain rule."""


@dataclasses.dataclass(frozen=True)
class SmoothJet:
    """Analytic drift derivatives of a barrier: L_f^k h and its gradient.

    ``lf_values[k-1]`` evaluates L_f^k h and ``lf_gradients[k-1]`` its state
    gradient, for k = 1..depth.  Chains of length n need depth >= n - 1.
    """

    lf_values: Tuple[Callable[[np.ndarray], float], ...]
    lf_gradients: Tuple[Callable[[np.ndarray], np.ndarray], ...]

    def __post_init__(self):
        if len(self.lf_values) != len(self.lf_gradients):
            raise ConfigurationError("jet value/gradient level counts differ")

    @property
    def depth(self) -> int:
        return len(self.lf_values)


@dataclasses.dataclass(frozen=True)
class ChainLevel:
    """Value and gradient evaluators for one level h_i."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]


@dataclasses.dataclass(frozen=True, eq=False)
class BacksteppingChain:
    """Gains c_1..c_{n-1}, constants b_1..b_n, and evaluators for h_1..h_n.

    The target pair is (h_n, b_n); every intermediate level is kept so that
    membership checks can monitor the whole cascade.  ``coeff_rows[i]`` holds
    the expansion of h_{i+1} in the drift-derivative basis
    (h, L_f h, ..., L_f^i h); the level evaluators and the simulator's fused
    step both read these same coefficients.
    """

    gains: Tuple[float, ...]
    constants: Tuple[float, ...]
    levels: Tuple[ChainLevel, ...]
    coeff_rows: Tuple[np.ndarray, ...]
    n: int
    x0: np.ndarray
    pair: ParallelPair
    jet: SmoothJet

    @property
    def b_n(self) -> float:
        return self.constants[-1]

    @functools.cached_property
    def target_field(self) -> BarrierField:
        top = self.levels[-1]
        return BarrierField(value=top.value, gradient=top.gradient,
                            label=f"{self.pair.h.label}~level{self.n}")

    @functools.cached_property
    def target_pair(self) -> ParallelPair:
        return ParallelPair(h=self.target_field, b=self.b_n)


def gain_lower_bound(h_val: float, lfh_val: float, b_i: float) -> float:
    """Smallest admissible gain at a level, given values at x0.

    Any gain strictly above ``max(-lfh/h, lfh/(b - h), 0)`` keeps both
    ``c*h + lfh`` and ``c*(b - h) - lfh`` positive at x0.  Requires x0
    strictly interior: 0 < h_val < b_i.
    """
    if not (0.0 < h_val < b_i):
        raise InitialConditionError(
            f"initial condition not strictly interior: h(x0)={h_val}, b={b_i}")
    return max(-lfh_val / h_val, lfh_val / (b_i - h_val), 0.0)


def _level_from_coeffs(coeffs: np.ndarray, pair: ParallelPair,
                       jet: SmoothJet) -> ChainLevel:
    # h_level = coeffs[0]*h + sum_k coeffs[k] * L_f^k h
    coeffs = coeffs.copy()
    base_v = pair.h.value
    base_g = pair.h.gradient
    if coeffs.size == 1 and coeffs[0] == 1.0:
        return ChainLevel(value=lambda x: float(base_v(x)), gradient=base_g)

    def value(x, _c=coeffs):
        out = _c[0] * float(base_v(x))
        for k in range(1, _c.size):
            out += _c[k] * float(jet.lf_values[k - 1](x))
        return out

    def gradient(x, _c=coeffs):
        out = _c[0] * base_g(x)
        for k in range(1, _c.size):
            out += _c[k] * jet.lf_gradients[k - 1](x)
        return out

    return ChainLevel(value=value, gradient=gradient)


def build_chain(pair: ParallelPair, jet: SmoothJet, system: ControlAffineSystem,
                x0: np.ndarray, n: int, margin: float = 0.1,
                gains: Optional[Sequence[Optional[float]]] = None) -> BacksteppingChain:
    """Build the level-n target pair with initial-condition-adaptive gains.

    Each automatic gain is ``gain_lower_bound(...) + margin``; entries of
    ``gains`` override individual levels (None keeps the automatic rule) and
    must still strictly exceed the bound.  Guarantees h_i(x0) > 0 and
    b_i - h_i(x0) > 0 at every level.
    """
    if n < 2:
        raise ConfigurationError(f"chain needs n >= 2, got {n}")
    if jet.depth < n - 1:
        raise ConfigurationError(f"jet depth {jet.depth} < n-1 = {n - 1}")
    if not (margin > 0):
        raise ValueError(f"margin must be > 0, got {margin}")
    if gains is not None and len(gains) != n - 1:
        raise ConfigurationError(f"expected {n - 1} gain overrides, got {len(gains)}")
    x0 = as_vector(x0, system.n, "x0")

    coeffs = np.array([1.0])
    levels = [_level_from_coeffs(coeffs, pair, jet)]
    coeff_rows = [coeffs]
    constants = [pair.b]
    chosen = []
    for i in range(2, n + 1):
        h_prev = levels[-1].value(x0)
        # L_f h_{i-1} = shifted coefficient combination of the jet levels
        lfh_prev = 0.0
        for k in range(coeffs.size):
            lfh_prev += coeffs[k] * float(jet.lf_values[k](x0))
        bound = gain_lower_bound(h_prev, lfh_prev, constants[-1])
        override = gains[i - 2] if gains is not None else None
        if override is None:
            c = bound + margin
        else:
            c = float(override)
            if not (c > bound):
                raise ValueError(
                    f"gain override c_{i - 1}={c} does not exceed the required "
                    f"bound {bound} at x0")
        new_coeffs = np.zeros(coeffs.size + 1)
        new_coeffs[:-1] = c * coeffs
        new_coeffs[1:] += coeffs
        coeffs = new_coeffs
        chosen.append(c)
        constants.append(c * constants[-1])
        coeff_rows.append(coeffs)
        levels.append(_level_from_coeffs(coeffs, pair, jet))
        h_new = levels[-1].value(x0)
        if not (h_new > 0.0 and constants[-1] - h_new > 0.0):
            raise InitialConditionError(
                f"level {i} lost interiority at x0: h={h_new}, b={constants[-1]}")

    return BacksteppingChain(gains=tuple(chosen), constants=tuple(constants),
                             levels=tuple(levels), coeff_rows=tuple(coeff_rows),
                             n=n, x0=x0, pair=pair, jet=jet)


def target_slab(chain: BacksteppingChain, system: ControlAffineSystem,
                alpha_n: ClassKInfty, alpha_bar_n: ClassKInfty,
                x: np.ndarray) -> ConstraintSlab:
    """Slab constraint of the chain's top-level pair (h_n, b_n) at x."""
    return eval_slab(chain.target_pair, system, alpha_n, alpha_bar_n, x)


def membership(chain: BacksteppingChain, x: np.ndarray) -> bool:
    """True iff every level satisfies 0 <= h_i(x) <= b_i.

    All intermediate levels are checked, not just the top one, so that
    integration-error leakage anywhere in the cascade is caught.
    """
    for level, b_i in zip(chain.levels, chain.constants):
        h_i = level.value(x)
        if h_i < 0.0 or b_i - h_i < 0.0:
            return False
    return True


def relative_degree_diagnostic(chain: BacksteppingChain, system: ControlAffineSystem,
                               samples: Sequence[np.ndarray],
                               threshold: float = 1e-8) -> float:
    """Sampled check that the input direction is absent below the top level.

    The construction assumes uniform relative degree n; this measures
    max |grad h_i . g| over i < n and warns when it exceeds the threshold.
    Returns the measured maximum.
    """
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        g = system.g(x)
        for level in chain.levels[:-1]:
            worst = max(worst, float(np.max(np.abs(level.gradient(x) @ g))))
    if worst > threshold:
        warnings.warn(
            f"input direction appears below the top level (max |L_g h_i| = {worst:.3e}); "
            "the pair may not have uniform relative degree", stacklevel=2)
    return worst
