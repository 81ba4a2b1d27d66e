import math

import numpy as np
import pytest

from corridorcbf.core import (BarrierField, ConfigurationError,
                              ControlAffineSystem, NumericalDomainError,
                              ParallelPair, as_vector, class_k_linear,
                              eval_slab, verify_parallel)
from corridorcbf.systems import double_integrator, sine_corridor, unicycle_extended


def _fd_directional(value, x, direction, h=1e-6):
    return (value(x + h * direction) - value(x - h * direction)) / (2.0 * h)


def test_eval_slab_double_integrator_origin():
    system, pair, _ = double_integrator()
    alpha = class_k_linear(1.0)
    slab = eval_slab(pair, system, alpha, alpha, np.array([0.0, 0.0]))
    assert slab.a.shape == (1,)
    assert slab.a[0] == 0.0
    assert slab.lower == -1.0
    assert slab.upper == 1.0


def test_eval_slab_bounds_match_finite_differences():
    # reconstruct L_f h by differencing h along the drift and re-derive the bounds
    system, pair, _ = double_integrator()
    alpha = class_k_linear(1.0)
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=2)
        slab = eval_slab(pair, system, alpha, alpha, x)
        lfh_fd = _fd_directional(pair.h.value, x, system.f(x))
        h = pair.h.value(x)
        assert abs(slab.lower - (-lfh_fd - h)) < 1e-9
        assert abs(slab.upper - (-lfh_fd + (pair.b - h))) < 1e-9


@pytest.mark.parametrize("c", [0.5, 1.0, 2.5])
def test_slab_gap_identity(c):
    # linear rates of coefficient c make the gap exactly c*b everywhere
    system, pair, _ = double_integrator()
    alpha = class_k_linear(c)
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.uniform(-3, 3, size=2)
        slab = eval_slab(pair, system, alpha, alpha, x)
        assert abs((slab.upper - slab.lower) - c * pair.b) <= 1e-12


def test_slab_gap_identity_unicycle():
    system, _ = unicycle_extended()
    pair, _ = sine_corridor()
    alpha = class_k_linear(1.0)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rng.uniform(-3, 3, size=4)
        slab = eval_slab(pair, system, alpha, alpha, x)
        assert abs((slab.upper - slab.lower) - pair.b) <= 1e-12


def test_slab_midpoint_symmetry():
    # h = b/2 with L_f h = 0 and a = 0 gives a symmetric slab
    b = 2.0
    system = ControlAffineSystem(
        n=1, m=1, drift=lambda x: np.zeros(1),
        input_matrix=lambda x: np.zeros((1, 1)), label="static")
    pair = ParallelPair(
        h=BarrierField(value=lambda x: b / 2, gradient=lambda x: np.zeros(1)),
        b=b)
    alpha = class_k_linear(1.0)
    slab = eval_slab(pair, system, alpha, alpha, np.zeros(1))
    assert slab.lower == -b / 2
    assert slab.upper == b / 2
    assert slab.a[0] == 0.0


def test_eval_slab_dimension_mismatch():
    system, pair, _ = double_integrator()
    alpha = class_k_linear(1.0)
    with pytest.raises(ConfigurationError):
        eval_slab(pair, system, alpha, alpha, np.zeros(3))


def test_eval_slab_nonfinite_state():
    system, pair, _ = double_integrator()
    alpha = class_k_linear(1.0)
    with pytest.raises(NumericalDomainError):
        eval_slab(pair, system, alpha, alpha, np.array([np.inf, 0.0]))


def test_eval_slab_nonfinite_state_unicycle():
    system, _ = unicycle_extended()
    pair, _ = sine_corridor()
    alpha = class_k_linear(1.0)
    with pytest.raises(NumericalDomainError):
        eval_slab(pair, system, alpha, alpha, np.array([np.inf, 0.0, 0.0, 0.0]))


def test_verify_parallel_sine_corridor():
    pair, _ = sine_corridor()
    rng = np.random.default_rng(2)
    samples = [rng.uniform(-5, 5, size=4) for _ in range(50)]
    ok, b = verify_parallel(pair.h, pair.hbar_field(), samples)
    assert ok
    assert abs(b - 2.0) < 1e-12


def test_verify_parallel_double_integrator():
    _, pair, _ = double_integrator()
    samples = [np.array([0.3, 7.0]), np.array([-0.9, 1.0]), np.array([0.0, 0.0])]
    ok, b = verify_parallel(pair.h, pair.hbar_field(), samples)
    assert ok
    assert b == 2.0


def test_verify_parallel_rejects_nonconstant_sum():
    h = BarrierField(value=lambda x: x[0] ** 2, gradient=lambda x: np.array([2 * x[0]]))
    hbar = BarrierField(value=lambda x: x[0], gradient=lambda x: np.array([1.0]))
    samples = [np.array([0.0]), np.array([1.0])]
    ok, _ = verify_parallel(h, hbar, samples)
    assert not ok


def test_verify_parallel_rejects_nonpositive_constant():
    h = BarrierField(value=lambda x: -1.0, gradient=lambda x: np.zeros(1))
    hbar = BarrierField(value=lambda x: 0.5, gradient=lambda x: np.zeros(1))
    ok, b = verify_parallel(h, hbar, [np.zeros(1)])
    assert not ok and b == -0.5


def test_verify_parallel_empty_samples():
    _, pair, _ = double_integrator()
    with pytest.raises(ValueError):
        verify_parallel(pair.h, pair.hbar_field(), [])


def test_class_k_linear_values():
    assert class_k_linear(1.0)(0.0) == 0.0
    assert class_k_linear(2.0)(3.0) == 6.0
    assert class_k_linear(1.0)(-1.0) == -1.0  # odd extension


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_class_k_linear_rejects_nonpositive(c):
    with pytest.raises(ValueError):
        class_k_linear(c)


def test_class_k_nonlinear_basic_properties():
    # user-supplied nonlinear rates are supported; check the defining traits
    from corridorcbf.core import ClassKInfty
    alpha = ClassKInfty(apply=lambda s: s ** 3 + s)
    assert alpha(0.0) == 0.0
    grid = np.linspace(-3, 3, 101)
    vals = np.array([alpha(s) for s in grid])
    assert np.all(np.diff(vals) > 0)
    assert alpha.coefficient is None


def test_hbar_gradient_antisymmetry():
    pair, _ = sine_corridor()
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.uniform(-4, 4, size=4)
        np.testing.assert_array_equal(pair.hbar_gradient(x), -pair.h.gradient(x))
        # negation is exact; the sum h + fl(b - h) re-rounds by at most 1 ulp
        assert abs(pair.h.value(x) + pair.hbar_value(x) - pair.b) <= 2 ** -50


def test_parallel_pair_requires_positive_b():
    h = BarrierField(value=lambda x: 0.0, gradient=lambda x: np.zeros(1))
    with pytest.raises(ValueError):
        ParallelPair(h=h, b=0.0)


def test_as_vector_validation():
    with pytest.raises(ConfigurationError):
        as_vector(np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        as_vector([1.0, 2.0], length=3)
    with pytest.raises(NumericalDomainError):
        as_vector([1.0, np.nan])


def test_system_output_validation():
    bad = ControlAffineSystem(
        n=2, m=1, drift=lambda x: np.zeros(3),
        input_matrix=lambda x: np.zeros((2, 1)), label="bad")
    with pytest.raises(ConfigurationError):
        bad.f(np.zeros(2))
    nanny = ControlAffineSystem(
        n=1, m=1, drift=lambda x: np.array([np.nan]),
        input_matrix=lambda x: np.zeros((1, 1)), label="nan")
    with pytest.raises(NumericalDomainError):
        nanny.f(np.zeros(1))


def test_xdot_combines_drift_and_input():
    system, _, _ = double_integrator()
    x = np.array([0.5, -1.0])
    u = np.array([2.0])
    np.testing.assert_allclose(system.xdot(x, u), np.array([-1.0, 2.0]))
