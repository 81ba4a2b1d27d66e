"""Independent checking utilities used by the test suite.

The slab projection here deliberately avoids the closed-form filter formula:
candidate minimizers come from exhaustive active-set enumeration (the
projection onto a slab is either the nominal point or lies on one of the two
bounding hyperplanes, each solved as a minimum-norm least-squares system),
and local optimality is certified by random feasible perturbations.
"""

from __future__ import annotations

import dataclasses
from typing import List, Optional, Sequence

import math

import numpy as np

from .core import BarrierField


@dataclasses.dataclass
class OracleReport:
    """Outcome of the enumeration-based slab projection.

    ``certificate`` is the largest objective improvement any feasible random
    perturbation achieved over the chosen minimizer; values <= 0 (up to
    rounding) certify local optimality.
    """

    candidates: List[np.ndarray]
    minimizer: np.ndarray
    objective: float
    certificate: float
    n_feasible_samples: int


def _hyperplane_candidate(a: np.ndarray, target: float, u0: np.ndarray) -> np.ndarray:
    # Minimum-norm shift solving a . (u0 + d) = target, via LAPACK lstsq
    # rather than the analytic projection formula.
    rhs = np.array([target - float(a @ u0)])
    d, *_ = np.linalg.lstsq(a.reshape(1, -1), rhs, rcond=None)
    return u0 + d


def project_onto_slab_oracle(a, lower: float, upper: float, u0,
                             n_samples: int = 1000, radius: float = 0.5,
                             rng: Optional[np.random.Generator] = None) -> OracleReport:
    """Project u0 onto ``{u : lower <= a . u <= upper}`` by enumeration.

    Enumerates the KKT active-set candidates {u0, a.u = upper, a.u = lower},
    keeps the feasible ones, picks the distance minimizer, then samples
    ``n_samples`` random points in a ball of the given radius around it and
    records the best feasible improvement found.
    """
    a = np.asarray(a, dtype=float).ravel()
    u0 = np.asarray(u0, dtype=float).ravel()
    if rng is None:
        rng = np.random.default_rng(0)
    anorm = float(np.linalg.norm(a))

    if anorm == 0.0:
        candidates = [u0.copy()]
    else:
        if lower > upper:
            raise ValueError(f"infeasible slab: lower={lower} > upper={upper}")
        candidates = []
        s = float(a @ u0)
        if lower <= s <= upper:
            candidates.append(u0.copy())
        for bound in (upper, lower):
            if math.isfinite(bound):
                candidates.append(_hyperplane_candidate(a, bound, u0))
        # Keep feasible candidates only (hyperplane points can violate the
        # opposite bound only if lower > upper, which was excluded above).
        candidates = [c for c in candidates
                      if lower - 1e-12 <= float(a @ c) <= upper + 1e-12]

    objectives = [float(np.linalg.norm(c - u0)) for c in candidates]
    best = int(np.argmin(objectives))
    minimizer = candidates[best]
    objective = objectives[best]

    # Local-optimality certificate: random feasible points near the minimizer
    # must not get closer to u0.
    m = u0.shape[0]
    z = rng.standard_normal((n_samples, m))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.random(n_samples) ** (1.0 / m)
    pts = minimizer + z / norms * radii[:, None]
    if anorm == 0.0:
        feasible = np.ones(n_samples, dtype=bool)
    else:
        proj = pts @ a
        feasible = (proj >= lower) & (proj <= upper)
    n_feas = int(feasible.sum())
    if n_feas:
        sample_obj = np.linalg.norm(pts[feasible] - u0, axis=1)
        certificate = objective - float(sample_obj.min())
    else:
        certificate = 0.0

    return OracleReport(candidates=candidates, minimizer=minimizer,
                        objective=objective, certificate=certificate,
                        n_feasible_samples=n_feas)


def fd_step(x: np.ndarray) -> float:
    """Central-difference step scaled to the state magnitude."""
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    return 1e-5 * (1.0 + scale)


def fd_gradient(value, x: np.ndarray, h: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = fd_step(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        grad[i] = (float(value(xp)) - float(value(xm))) / (2.0 * h)
    return grad


def fd_jacobian(vector_fn, x: np.ndarray, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of a vector function (rows = outputs)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = fd_step(x)
    cols = []
    for i in range(x.size):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        cols.append((np.asarray(vector_fn(xp), dtype=float)
                     - np.asarray(vector_fn(xm), dtype=float)) / (2.0 * h))
    return np.stack(cols, axis=1)


def _rel_err(analytic: np.ndarray, approx: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=float)
    approx = np.asarray(approx, dtype=float)
    return float(np.max(np.abs(analytic - approx) / (1.0 + np.abs(analytic))))


def finite_difference_check(field: BarrierField, samples: Sequence[np.ndarray]) -> float:
    """Worst relative error of the field's derivatives vs central differences.

    Compares the analytic gradient against differences of the value, and the
    Hessian (when present) against differences of the analytic gradient.
    """
    if len(samples) == 0:
        raise ValueError("finite_difference_check needs at least one sample state")
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        worst = max(worst, _rel_err(field.gradient(x), fd_gradient(field.value, x)))
        if field.hessian is not None:
            worst = max(worst, _rel_err(field.hessian(x), fd_jacobian(field.gradient, x)))
    return worst
