import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corridorcbf.core import ConstraintSlab, NumericalDomainError
from corridorcbf.oracle import project_onto_slab_oracle
from corridorcbf.safety_filter import (ActiveBranch, InfeasibleSlabError,
                                       default_eps, feasibility_gap,
                                       solve_closed_form, zero_lg_consistency)
from corridorcbf.systems import single_cbf_baseline


def slab(a, lower, upper):
    return ConstraintSlab(a=np.asarray(a, dtype=float), lower=lower, upper=upper)


def test_zero_direction_passes_nominal_through():
    res = solve_closed_form(slab([0.0, 0.0], -1.0, 1.0), np.array([5.0, -3.0]))
    np.testing.assert_array_equal(res.u_star, [5.0, -3.0])
    assert res.active is ActiveBranch.ZERO_LG
    assert res.correction_norm == 0.0


def test_upper_clamp_matches_oracle():
    # frozen from the enumeration oracle: project (3,0) onto a.u <= 1
    res = solve_closed_form(slab([1.0, 0.0], -1.0, 1.0), np.array([3.0, 0.0]))
    np.testing.assert_allclose(res.u_star, [1.0, 0.0], atol=1e-15)
    assert res.active is ActiveBranch.UPPER_CLAMPED
    report = project_onto_slab_oracle([1.0, 0.0], -1.0, 1.0, [3.0, 0.0])
    np.testing.assert_allclose(res.u_star, report.minimizer, atol=1e-12)
    assert report.certificate <= 1e-12


def test_lower_clamp_matches_oracle():
    res = solve_closed_form(slab([1.0, 1.0], 2.0, 5.0), np.array([0.0, 0.0]))
    np.testing.assert_allclose(res.u_star, [1.0, 1.0], atol=1e-15)
    assert res.active is ActiveBranch.LOWER_CLAMPED
    # no feasible point in a radius-0.1 ball around u* comes closer to u0
    report = project_onto_slab_oracle([1.0, 1.0], 2.0, 5.0, [0.0, 0.0], radius=0.1)
    assert report.certificate <= 1e-12


def test_interior_nominal_untouched():
    res = solve_closed_form(slab([2.0, 0.0], -1.0, 1.0), np.array([0.0, 0.0]))
    np.testing.assert_array_equal(res.u_star, [0.0, 0.0])
    assert res.active is ActiveBranch.NOMINAL


def test_one_sided_slab_clamps_lower_only():
    res = solve_closed_form(slab([1.0], 2.0, math.inf), np.array([0.0]))
    np.testing.assert_allclose(res.u_star, [2.0])
    assert res.active is ActiveBranch.LOWER_CLAMPED
    res = solve_closed_form(slab([1.0], 2.0, math.inf), np.array([9.0]))
    assert res.active is ActiveBranch.NOMINAL


def test_infeasible_slab_raises():
    with pytest.raises(InfeasibleSlabError):
        solve_closed_form(slab([1.0], 3.0, 1.0), np.array([0.0]))


def test_feasibility_gap():
    assert feasibility_gap(slab([1.0], -1.0, 1.0)) == 2.0
    assert feasibility_gap(slab([1.0], 3.0, 1.0)) == -2.0


def test_nonfinite_inputs_raise():
    with pytest.raises(NumericalDomainError):
        solve_closed_form(slab([np.nan], -1.0, 1.0), np.array([0.0]))
    with pytest.raises(NumericalDomainError):
        solve_closed_form(slab([1.0], -1.0, 1.0), np.array([np.inf]))
    with pytest.raises(NumericalDomainError):
        solve_closed_form(slab([1.0], np.nan, 1.0), np.array([0.0]))


def test_bad_eps_rejected():
    with pytest.raises(ValueError):
        solve_closed_form(slab([1.0], -1.0, 1.0), np.array([0.0]), eps=0.0)
    with pytest.raises(ValueError):
        zero_lg_consistency(slab([1.0], -1.0, 1.0), eps=-1.0)


def test_zero_lg_consistency_basic():
    assert zero_lg_consistency(slab([0.0], -0.5, 0.5))
    assert not zero_lg_consistency(slab([0.0], 0.2, 0.8))
    assert zero_lg_consistency(slab([1.0], 0.2, 0.8))  # usable direction


def test_zero_lg_consistency_single_cbf_midline():
    # x1 = 0 leaves the one-sided baseline with no control authority; the
    # degenerate condition holds only for |x2| <= sqrt(c1 c2 / 2)
    baseline = single_cbf_baseline("double_integrator", 1.0, 1.0)
    assert not zero_lg_consistency(baseline.constraint_at(np.array([0.0, 2.0])))
    assert zero_lg_consistency(baseline.constraint_at(np.array([0.0, 0.5])))


def test_correction_norm_consistency():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = rng.integers(1, 4)
        s = slab(rng.uniform(-5, 5, m), *sorted(rng.uniform(-5, 5, 2)))
        u0 = rng.uniform(-5, 5, m)
        res = solve_closed_form(s, u0)
        assert abs(res.correction_norm - np.linalg.norm(res.u_star - u0)) <= 1e-12


def test_kkt_multiplier_sign_on_clamped_branches():
    rng = np.random.default_rng(6)
    seen_upper = seen_lower = 0
    for _ in range(500):
        m = int(rng.integers(1, 4))
        s = slab(rng.uniform(-5, 5, m), *sorted(rng.uniform(-5, 5, 2)))
        u0 = rng.uniform(-8, 8, m)
        res = solve_closed_form(s, u0)
        a2 = float(s.a @ s.a)
        proj = float(s.a @ u0)
        if res.active is ActiveBranch.UPPER_CLAMPED:
            assert (proj - s.upper) / a2 > 0  # implied multiplier
            seen_upper += 1
        elif res.active is ActiveBranch.LOWER_CLAMPED:
            assert (s.lower - proj) / a2 > 0
            seen_lower += 1
    assert seen_upper > 10 and seen_lower > 10


def test_randomized_oracle_equivalence():
    rng = np.random.default_rng(7)
    for i in range(2000):
        m = 1 + i % 3
        a = rng.uniform(-10, 10, m)
        u0 = rng.uniform(-10, 10, m)
        lo, hi = sorted(rng.uniform(-10, 10, 2))
        s = slab(a, lo, hi)
        res = solve_closed_form(s, u0)
        rep = project_onto_slab_oracle(a, lo, hi, u0, n_samples=100, rng=rng)
        tol = 1e-9 * (1.0 + np.linalg.norm(u0))
        assert np.linalg.norm(res.u_star - rep.minimizer) <= tol
        # projection satisfies the slab whenever the direction is usable
        proj = float(a @ res.u_star)
        pad = 1e-12 * (1.0 + abs(hi))
        assert lo - pad <= proj <= hi + pad
        # idempotence
        res2 = solve_closed_form(s, res.u_star)
        assert np.linalg.norm(res2.u_star - res.u_star) <= 1e-12 * (1 + np.linalg.norm(res.u_star))


@given(
    m=st.integers(min_value=1, max_value=3),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
@settings(max_examples=300, deadline=None)
def test_projection_properties_randomized(m, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-10, 10, m)
    u0 = rng.uniform(-10, 10, m)
    lo, hi = sorted(rng.uniform(-10, 10, 2))
    s = slab(a, lo, hi)
    res = solve_closed_form(s, u0)
    anorm = np.linalg.norm(a)
    if anorm >= default_eps(a):
        proj = float(a @ res.u_star)
        pad = 1e-12 * (1.0 + abs(hi))
        assert lo - pad <= proj <= hi + pad
        # minimal correction is along a: the shift is parallel to a
        shift = res.u_star - u0
        cross = shift - (float(shift @ a) / (anorm ** 2)) * a
        assert np.linalg.norm(cross) <= 1e-9
    else:
        np.testing.assert_array_equal(res.u_star, u0)
