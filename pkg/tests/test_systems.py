import math

import numpy as np
import pytest

from corridorcbf.backstepping import build_chain
from corridorcbf.core import BarrierField, ParallelPair, class_k_linear
from corridorcbf.oracle import finite_difference_check
from corridorcbf.safety_filter import solve_closed_form
from corridorcbf.systems import (UnicycleState, check_gradient_nonzero,
                                 double_integrator, sine_corridor,
                                 single_cbf_baseline, unicycle_extended,
                                 unicycle_lie_terms)


def test_double_integrator_dynamics():
    system, pair, jet = double_integrator()
    np.testing.assert_array_equal(system.f(np.array([3.0, -2.0])), [-2.0, 0.0])
    np.testing.assert_array_equal(system.g(np.array([3.0, -2.0])), [[0.0], [1.0]])
    x = np.array([0.3, 7.0])
    assert pair.h.value(x) + pair.hbar_value(x) == 2.0
    assert jet.lf_values[0](x) == 7.0


def test_double_integrator_level2_input_row_is_one():
    system, pair, jet = double_integrator()
    rng = np.random.default_rng(0)
    for c1 in (0.6, 1.0, 2.0):
        chain = build_chain(pair, jet, system, np.array([0.0, 0.0]), n=2,
                            gains=[c1])
        for _ in range(20):
            x = rng.uniform(-2, 2, size=2)
            a = chain.levels[1].gradient(x) @ system.g(x)
            assert a[0] == 1.0


def test_unicycle_dynamics():
    system, dims = unicycle_extended()
    assert dims == {"x": 0, "y": 1, "v": 2, "theta": 3}
    np.testing.assert_allclose(system.f(np.array([0.0, 0.0, 1.0, 0.0])),
                               [1.0, 0.0, 0.0, 0.0])
    for theta in (0.0, 1.0, -2.5):
        np.testing.assert_array_equal(
            system.f(np.array([0.4, -0.2, 0.0, theta])), np.zeros(4))
    g = system.g(np.zeros(4))
    assert np.count_nonzero(g) == 2
    assert g[2, 0] == 1.0 and g[3, 1] == 1.0


def test_sine_corridor_fields():
    pair, jet = sine_corridor()
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.uniform(-6, 6, size=4)
        assert pair.h.gradient(x)[1] == 1.0  # y component never vanishes
    origin = np.zeros(4)
    assert pair.h.value(origin) == 1.0
    assert pair.hbar_value(origin) == 1.0
    assert jet.lf_values[0](np.array([0.0, 0.0, 1.0, 0.0])) == 1.0


def test_sine_corridor_constant_sum_randomized():
    pair, _ = sine_corridor()
    rng = np.random.default_rng(2)
    for _ in range(1000):
        x = rng.uniform(-8, 8, size=4)
        assert abs(pair.h.value(x) + pair.hbar_value(x) - 2.0) <= 2 ** -48


def test_unicycle_lie_terms_reference():
    s = UnicycleState(x=0.0, y=0.0, v=1.0, theta=0.0)
    lgv, lgtheta, drift = unicycle_lie_terms(1.0, s)
    assert lgv == 1.0
    assert lgtheta == 1.0
    assert drift == 1.0


def test_unicycle_lie_terms_perpendicular_heading_with_zero_speed():
    # grad_xy h1 = (1, 1) at x = 0; theta = -pi/4 makes the heading
    # perpendicular, so with v = 0 every term vanishes
    s = UnicycleState(x=0.0, y=0.5, v=0.0, theta=-math.pi / 4)
    lgv, lgtheta, drift = unicycle_lie_terms(1.0, s)
    assert abs(lgv) <= 1e-15
    assert lgtheta == 0.0
    assert drift == 0.0


def test_unicycle_lie_terms_aligned_heading():
    # heading along the gradient: turn-rate channel loses agency, the
    # acceleration channel sees the full gradient magnitude
    s = UnicycleState(x=0.0, y=0.0, v=2.0, theta=math.pi / 4)
    lgv, lgtheta, drift = unicycle_lie_terms(1.0, s)
    assert abs(lgv - math.sqrt(2.0)) <= 1e-15
    assert abs(lgtheta) <= 1e-15


def test_unicycle_lie_terms_accepts_arrays_and_rejects_bad_gain():
    arr = np.array([0.0, 0.0, 1.0, 0.0])
    assert unicycle_lie_terms(1.0, arr) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        unicycle_lie_terms(0.0, arr)


def test_hand_terms_match_generic_chain():
    system, _ = unicycle_extended()
    pair, jet = sine_corridor()
    c1 = 1.0
    chain = build_chain(pair, jet, system, np.zeros(4), n=2, gains=[c1])
    rng = np.random.default_rng(3)
    for _ in range(1000):
        x = rng.uniform(-4, 4, size=4)
        grad = chain.levels[1].gradient(x)
        a = grad @ system.g(x)
        lf = float(grad @ system.f(x))
        lgv, lgtheta, drift = unicycle_lie_terms(c1, x)
        assert abs(a[0] - lgv) <= 1e-12
        assert abs(a[1] - lgtheta) <= 1e-12
        assert abs(lf - drift) <= 1e-12


def test_zero_input_row_implies_zero_drift_row():
    # wherever the level-2 input row vanishes, its drift term vanishes too
    system, _ = unicycle_extended()
    pair, jet = sine_corridor()
    chain = build_chain(pair, jet, system, np.zeros(4), n=2, gains=[1.0])
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(1000):
        x, y = rng.uniform(-4, 4, size=2)
        # v = 0 and heading perpendicular to the positional gradient
        # (cos x, 1): tan(theta) = -cos x zeroes the directional derivative
        theta = math.atan2(-math.cos(x), 1.0)
        state = np.array([x, y, 0.0, theta])
        grad = chain.levels[1].gradient(state)
        a = grad @ system.g(state)
        if np.linalg.norm(a) < 1e-10:
            lf = float(grad @ system.f(state))
            assert abs(lf) < 1e-8
            checked += 1
    assert checked > 900


def test_check_gradient_nonzero():
    pair, _ = sine_corridor()
    rng = np.random.default_rng(5)
    samples = [rng.uniform(-5, 5, size=4) for _ in range(100)]
    assert check_gradient_nonzero(pair, samples)

    baseline = single_cbf_baseline("unicycle", 1.0, 1.0)
    midline = [np.array([x, -math.sin(x), 1.0, 0.0])
               for x in np.linspace(-3, 3, 11)]
    assert not check_gradient_nonzero(baseline.h_s, midline)

    tiny = BarrierField(value=lambda s: s[1] * 1e-30,
                        gradient=lambda s: np.array([0.0, 1e-30, 0.0, 0.0]))
    assert check_gradient_nonzero(tiny, [np.zeros(4)])

    with pytest.raises(ValueError):
        check_gradient_nonzero(pair, [])


def test_single_cbf_baseline_double_integrator():
    baseline = single_cbf_baseline("double_integrator", 1.0, 1.0)
    assert baseline.h_s.value(np.array([0.0, 9.9])) == 1.0
    assert baseline.h2_s.value(np.array([0.0, 0.5])) == 1.0  # c1*(1-0) - 0
    slab = baseline.constraint_at(np.array([0.0, 0.5]))
    assert slab.a[0] == 0.0  # control authority lost on the midline
    assert slab.upper == math.inf
    # validity condition |x2| <= sqrt(c1*c2/2) holds at x2 = 0.5
    assert slab.lower <= 0.0


def test_single_cbf_baseline_filter_formula():
    # shared projection with upper = +inf reproduces the one-sided filter
    baseline = single_cbf_baseline("double_integrator", 1.0, 1.0)
    x = np.array([0.5, 1.0])
    slab = baseline.constraint_at(x)
    u0 = np.array([4.0])
    res = solve_closed_form(slab, u0)
    lg = slab.a[0]
    needed = max(0.0, slab.lower - lg * u0[0])
    expected = u0[0] + lg * needed / lg ** 2
    assert abs(res.u_star[0] - expected) <= 1e-12


def test_single_cbf_baseline_fields_differentiate():
    rng = np.random.default_rng(6)
    di = single_cbf_baseline("double_integrator", 1.3, 0.8)
    samples2 = [rng.uniform(-2, 2, size=2) for _ in range(60)]
    assert finite_difference_check(di.h_s, samples2) <= 1e-6
    assert finite_difference_check(di.h2_s, samples2) <= 1e-6
    uni = single_cbf_baseline("unicycle", 1.0, 1.0)
    samples4 = [rng.uniform(-3, 3, size=4) for _ in range(60)]
    assert finite_difference_check(uni.h_s, samples4) <= 1e-6
    assert finite_difference_check(uni.h2_s, samples4) <= 1e-6


def test_unicycle_baseline_correction_blows_up_near_midline():
    # approaching sin x + y = 0 with speed: the required correction stays
    # bounded away from zero while the input row vanishes
    baseline = single_cbf_baseline("unicycle", 1.0, 1.0)
    norms = []
    for delta in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        x = math.pi - delta
        state = np.array([x, 0.0, 2.0, 0.0])
        u0 = np.array([0.0, 0.0])
        res = solve_closed_form(baseline.constraint_at(state), u0)
        norms.append(res.correction_norm)
    assert all(n2 > n1 for n1, n2 in zip(norms, norms[1:]))
    assert norms[-1] > 1e4


def test_single_cbf_baseline_validation():
    with pytest.raises(ValueError):
        single_cbf_baseline("pendulum", 1.0, 1.0)
    with pytest.raises(ValueError):
        single_cbf_baseline("unicycle", 0.0, 1.0)
    with pytest.raises(ValueError):
        single_cbf_baseline("unicycle", 1.0, -2.0)


def test_unicycle_state_round_trip():
    s = UnicycleState(x=1.0, y=-2.0, v=0.5, theta=0.3)
    np.testing.assert_array_equal(s.as_array(), [1.0, -2.0, 0.5, 0.3])
    assert UnicycleState.from_array(s.as_array()) == s
