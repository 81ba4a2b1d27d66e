"""Fixed-step closed-loop simulation with event detection.

Control is zero-order-hold: the filter runs once per step on the sampled
state and the resulting input is held through one classical RK4 step.  Each
sample is screened for events in a fixed order (infeasible slab, control
blow-up, safety violation, barrier invalidity) so a step that trips several
conditions is always classified the same way.

The run loop evaluates each scenario through a fused step kernel built once
per run: it reads the same chain coefficients and applies the same slab and
projection formulas as :func:`corridorcbf.core.eval_slab` and
:func:`corridorcbf.safety_filter.solve_closed_form` but with scalar
arithmetic, which keeps million-step sweeps affordable.  The test suite pins
the kernel to the public operations sample by sample.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Optional, Tuple

import numpy as np

from . import backstepping, systems
from .core import (ClassKInfty, ConfigurationError, ConstraintSlab,
                   ControlAffineSystem, NumericalDomainError, ParallelPair,
                   as_vector, class_k_linear, eval_slab)
from .safety_filter import (ActiveBranch, InfeasibleSlabError,
                            solve_closed_form)


class EventKind(str, enum.Enum):
    COMPLETED = "Completed"
    SAFETY_VIOLATION = "SafetyViolation"
    CONTROL_BLOW_UP = "ControlBlowUp"
    INFEASIBLE_SLAB = "InfeasibleSlab"
    CBF_INVALIDITY = "CbfInvalidity"


@dataclasses.dataclass(frozen=True)
class SimEvent:
    kind: EventKind
    t_event: float
    detail: str = ""


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled closed-loop record, truncated at the first event."""

    t: np.ndarray
    states: np.ndarray
    u_nominal: np.ndarray
    u_filtered: np.ndarray
    h_levels: np.ndarray
    hbar_levels: np.ndarray
    slab_lower: np.ndarray
    slab_upper: np.ndarray
    active: np.ndarray          # ActiveBranch codes; -1 where no filter ran
    state_names: Tuple[str, ...]
    input_names: Tuple[str, ...]

    @property
    def n_levels(self) -> int:
        return self.h_levels.shape[1]

    def __len__(self) -> int:
        return self.t.shape[0]


_SYSTEM_BARRIERS = {
    "double_integrator": ("x1_corridor",),
    "unicycle": ("sine_corridor",),
}
_FILTER_KINDS = ("parallel", "single", "none")


@dataclasses.dataclass
class ScenarioConfig:
    """Complete description of one closed-loop run.

    ``gains["c1"]`` may be None to use the automatic initial-condition rule
    with ``gain_margin``; ``gains["c2"]`` is the liveness gain of the
    single-barrier baseline and is ignored by the other filters.
    """

    system: str
    barrier: str
    filter_kind: str
    x0: np.ndarray
    nominal: dict
    gains: dict = dataclasses.field(default_factory=lambda: {"c1": None, "c2": 1.0})
    class_k_coeff: float = 1.0
    dt: float = 1e-3
    horizon: float = 10.0
    blowup_threshold: float = 1e4
    safety_tol: float = 1e-6
    seed: int = 0
    gain_margin: float = 0.1
    label: str = ""

    def validate(self) -> None:
        if self.system not in _SYSTEM_BARRIERS:
            raise ConfigurationError(f"unknown system {self.system!r}")
        if self.barrier not in _SYSTEM_BARRIERS[self.system]:
            raise ConfigurationError(
                f"barrier {self.barrier!r} does not belong to system {self.system!r}")
        if self.filter_kind not in _FILTER_KINDS:
            raise ConfigurationError(f"unknown filter kind {self.filter_kind!r}")
        if not (self.dt > 0):
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if not (self.horizon > 0) or self.dt > self.horizon:
            raise ConfigurationError(
                f"need 0 < dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        if not (self.blowup_threshold > 0):
            raise ConfigurationError("blowup_threshold must be > 0")
        if self.safety_tol < 0:
            raise ConfigurationError("safety_tol must be >= 0")
        if not (self.class_k_coeff > 0):
            raise ConfigurationError("class_k_coeff must be > 0")
        if not (self.gain_margin > 0):
            raise ConfigurationError("gain_margin must be > 0")
        c1 = self.gains.get("c1")
        if c1 is not None and not (c1 > 0):
            raise ConfigurationError(f"gain c1 must be > 0, got {c1}")
        c2 = self.gains.get("c2", 1.0)
        if not (c2 > 0):
            raise ConfigurationError(f"gain c2 must be > 0, got {c2}")
        if not isinstance(self.nominal, dict) or "kind" not in self.nominal:
            raise ConfigurationError("nominal must be a dict with a 'kind' entry")
        if self.nominal["kind"] not in NOMINAL_KINDS:
            raise ConfigurationError(f"unknown nominal kind {self.nominal['kind']!r}")


def _nominal_constant(spec, m, horizon, rng):
    value = as_vector(spec.get("value", np.zeros(m)), m, "nominal value")

    def control(t, x):
        return value

    return control


def _nominal_speed_tracking(spec, m, horizon, rng):
    if m != 2:
        raise ConfigurationError("speed_tracking expects a 2-input system")
    v_ref = float(spec.get("v_ref", 2.0))
    gain = float(spec.get("gain", 1.0))

    def control(t, x):
        return np.array([gain * (v_ref - x[2]), 0.0])

    return control


def _nominal_sinusoidal(spec, m, horizon, rng):
    amp = as_vector(spec.get("amplitude", np.ones(m)), m, "amplitude")
    omega = as_vector(spec.get("omega", np.ones(m)), m, "omega")
    phase = as_vector(spec.get("phase", np.zeros(m)), m, "phase")

    def control(t, x):
        return amp * np.sin(omega * t + phase)

    return control


def _nominal_piecewise_random(spec, m, horizon, rng):
    bound = float(spec.get("bound", 1.0))
    dwell = float(spec.get("dwell", 0.5))
    if not (bound > 0 and dwell > 0):
        raise ConfigurationError("piecewise_random needs bound > 0 and dwell > 0")
    n_seg = int(math.floor(horizon / dwell)) + 2
    values = rng.uniform(-bound, bound, size=(n_seg, m))
    last = n_seg - 1

    def control(t, x):
        idx = int(t / dwell)
        return values[idx if idx < last else last]

    return control


NOMINAL_KINDS = {
    "constant": _nominal_constant,
    "speed_tracking": _nominal_speed_tracking,
    "sinusoidal": _nominal_sinusoidal,
    "piecewise_random": _nominal_piecewise_random,
}


def make_nominal(spec: dict, m: int, horizon: float,
                 rng: np.random.Generator) -> Callable[[float, np.ndarray], np.ndarray]:
    """Instantiate a nominal controller ``u0(t, x)`` from its config dict."""
    return NOMINAL_KINDS[spec["kind"]](spec, m, horizon, rng)


# A step kernel maps (x, u0) to
#   (u, branch, a, lower, upper, levels, infeasible_detail)
# where branch is an ActiveBranch code (-1 when no filter ran), a/lower/upper
# describe the slab (a None, bounds nan without one), levels are the h_i
# values, and infeasible_detail is a message when the slab was empty.
StepKernel = Callable[[np.ndarray, np.ndarray], tuple]


def _parallel_kernel(chain: backstepping.BacksteppingChain,
                     system: ControlAffineSystem,
                     c_lo: float, c_hi: float) -> StepKernel:
    n = chain.n
    basis_v = (chain.pair.h.value,) + chain.jet.lf_values[: n - 1]
    basis_g = (chain.pair.h.gradient,) + chain.jet.lf_gradients[: n - 1]
    rows = [[float(c) for c in row] for row in chain.coeff_rows]
    top = rows[-1]
    b_n = float(chain.constants[-1])
    drift = system.drift
    gmat = system.input_matrix
    m = system.m
    zero_lg = int(ActiveBranch.ZERO_LG)

    def kernel(x, u0):
        vals = [float(bv(x)) for bv in basis_v]
        levels = []
        for row in rows:
            acc = 0.0
            for c, v in zip(row, vals):
                acc += c * v
            levels.append(acc)
        h_n = levels[-1]
        grad = top[0] * basis_g[0](x)
        for k in range(1, n):
            grad += top[k] * basis_g[k](x)
        f = drift(x)
        lfh = float(grad @ f)
        a = grad @ gmat(x)
        lower = -lfh - c_lo * h_n
        upper = -lfh + c_hi * (b_n - h_n)

        # Same branch structure as solve_closed_form, scalarized.
        a2 = 0.0
        s = 0.0
        amax = 0.0
        for i in range(m):
            ai = a[i]
            a2 += ai * ai
            s += ai * u0[i]
            av = abs(ai)
            if av > amax:
                amax = av
        if math.sqrt(a2) < 1e-10 * (1.0 + amax):
            return u0, zero_lg, a, lower, upper, levels, None
        if lower > upper:
            return u0, -1, a, lower, upper, levels, (
                f"empty slab: lower={lower} > upper={upper}")
        if s > upper:
            return u0 + a * ((upper - s) / a2), 1, a, lower, upper, levels, None
        if s < lower:
            return u0 + a * ((lower - s) / a2), 2, a, lower, upper, levels, None
        return u0, 0, a, lower, upper, levels, None

    return kernel


def _single_kernel(baseline: systems.SingleCbfBaseline,
                   region_value: Callable[[np.ndarray], float]) -> StepKernel:
    constraint_at = baseline.constraint_at

    def kernel(x, u0):
        slab = constraint_at(x)
        levels = (float(region_value(x)),)
        try:
            res = solve_closed_form(slab, u0)
        except InfeasibleSlabError as exc:
            return u0, -1, slab.a, slab.lower, slab.upper, levels, str(exc)
        return (res.u_star, int(res.active), slab.a, slab.lower, slab.upper,
                levels, None)

    return kernel


def _unfiltered_kernel(region_value: Callable[[np.ndarray], float]) -> StepKernel:
    def kernel(x, u0):
        return u0, -1, None, math.nan, math.nan, (float(region_value(x)),), None

    return kernel


@dataclasses.dataclass(eq=False)
class ScenarioArtifacts:
    """Everything a run needs, prebuilt once from a config."""

    system: ControlAffineSystem
    region_pair: ParallelPair
    chain: Optional[backstepping.BacksteppingChain]
    baseline: Optional[systems.SingleCbfBaseline]
    nominal: Callable[[float, np.ndarray], np.ndarray]
    alpha: ClassKInfty
    alpha_bar: ClassKInfty
    slab_at: Optional[Callable[[np.ndarray], ConstraintSlab]]
    step_kernel: StepKernel
    level_constants: Tuple[float, ...]
    state_names: Tuple[str, ...]
    input_names: Tuple[str, ...]


def build_scenario_artifacts(cfg: ScenarioConfig) -> ScenarioArtifacts:
    """Resolve config ids into systems, barriers, chains, and controllers."""
    cfg.validate()
    if cfg.system == "double_integrator":
        system, pair, jet = systems.double_integrator()
        state_names = ("x1", "x2")
        input_names = ("u",)
    else:
        system, _ = systems.unicycle_extended()
        pair, jet = systems.sine_corridor()
        state_names = ("x", "y", "v", "theta")
        input_names = ("u_v", "u_theta")
    x0 = as_vector(cfg.x0, system.n, "x0")
    rng = np.random.default_rng(cfg.seed)
    nominal = make_nominal(cfg.nominal, system.m, cfg.horizon, rng)
    alpha = class_k_linear(cfg.class_k_coeff)

    chain = None
    baseline = None
    slab_at = None
    if cfg.filter_kind == "parallel":
        c1 = cfg.gains.get("c1")
        chain = backstepping.build_chain(
            pair, jet, system, x0, n=2, margin=cfg.gain_margin,
            gains=None if c1 is None else [float(c1)])
        target_pair = chain.target_pair

        def slab_at(x, _p=target_pair, _s=system, _a=alpha):
            return eval_slab(_p, _s, _a, _a, x)

        kernel = _parallel_kernel(chain, system, alpha.coefficient,
                                  alpha.coefficient)
        level_constants = chain.constants
    elif cfg.filter_kind == "single":
        baseline = systems.single_cbf_baseline(
            cfg.system, float(cfg.gains.get("c1") or 1.0),
            float(cfg.gains.get("c2", 1.0)))
        slab_at = baseline.constraint_at
        kernel = _single_kernel(baseline, pair.h.value)
        level_constants = (pair.b,)
    else:
        kernel = _unfiltered_kernel(pair.h.value)
        level_constants = (pair.b,)

    return ScenarioArtifacts(
        system=system, region_pair=pair, chain=chain, baseline=baseline,
        nominal=nominal, alpha=alpha, alpha_bar=alpha, slab_at=slab_at,
        step_kernel=kernel, level_constants=tuple(level_constants),
        state_names=state_names, input_names=input_names)


def rk4_step(system: ControlAffineSystem, u: np.ndarray, x: np.ndarray,
             dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of xdot = f(x) + g(x) u with u held.

    Calls the raw drift/input-matrix closures (shape problems surface in the
    arithmetic; non-finite intermediates propagate into the result, which is
    checked once via its sum).
    """
    if not (dt > 0):
        raise ValueError(f"dt must be > 0, got {dt}")
    f = system.drift
    if system.constant_input_matrix:
        gu = system.input_matrix(x) @ u
        k1 = f(x) + gu
        k2 = f(x + (0.5 * dt) * k1) + gu
        k3 = f(x + (0.5 * dt) * k2) + gu
        k4 = f(x + dt * k3) + gu
    else:
        g = system.input_matrix
        k1 = f(x) + g(x) @ u
        x2 = x + (0.5 * dt) * k1
        k2 = f(x2) + g(x2) @ u
        x3 = x + (0.5 * dt) * k2
        k3 = f(x3) + g(x3) @ u
        x4 = x + dt * k3
        k4 = f(x4) + g(x4) @ u
    out = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    for v in out:  # states are short; a loop beats an isfinite reduction
        if not math.isfinite(v):
            raise NumericalDomainError(
                f"non-finite state after RK4 step from x={x}, u={u}")
    return out


def closed_loop_control(x: np.ndarray, cfg: ScenarioConfig,
                        artifacts: ScenarioArtifacts, t: float = 0.0):
    """Nominal control, slab, and filtered control at one state.

    Generic path through eval_slab/solve_closed_form; returns
    ``(u_filtered, FilterResult or None, ConstraintSlab or None)`` with the
    latter two None for unfiltered runs.  An empty slab raises
    InfeasibleSlabError.
    """
    u0 = artifacts.nominal(t, x)
    if artifacts.slab_at is None:
        return u0, None, None
    slab = artifacts.slab_at(x)
    res = solve_closed_form(slab, u0)
    return res.u_star, res, slab


def run_scenario(cfg: ScenarioConfig) -> Tuple[Trajectory, SimEvent]:
    """Integrate the closed loop until the horizon or the first event.

    Event precedence per sample: InfeasibleSlab, then ControlBlowUp
    (sup-norm of the filtered input above the threshold), then
    SafetyViolation (level-1 barrier below -safety_tol), then CbfInvalidity
    (degenerate slab with zero excluded, the runtime barrier-validity
    monitor).
    """
    art = build_scenario_artifacts(cfg)
    system = art.system
    dt = float(cfg.dt)
    n_steps = int(math.floor(cfg.horizon / dt + 1e-9))
    n_samples = n_steps + 1
    n, m = system.n, system.m
    consts = [float(b) for b in art.level_constants]
    n_lev = len(consts)

    t_arr = np.empty(n_samples)
    states = np.empty((n_samples, n))
    u_nom = np.empty((n_samples, m))
    u_fil = np.empty((n_samples, m))
    h_lev = np.empty((n_samples, n_lev))
    hbar_lev = np.empty((n_samples, n_lev))
    s_lo = np.empty(n_samples)
    s_hi = np.empty(n_samples)
    active = np.empty(n_samples, dtype=np.int8)

    nominal = art.nominal
    kernel = art.step_kernel
    blowup = float(cfg.blowup_threshold)
    tol = float(cfg.safety_tol)
    zero_lg = int(ActiveBranch.ZERO_LG)

    x = as_vector(cfg.x0, n, "x0").copy()
    event = None
    k = 0
    while True:
        t = k * dt
        u0 = nominal(t, x)
        u, branch, a, lower, upper, levels, infeasible = kernel(x, u0)

        t_arr[k] = t
        states[k] = x
        u_nom[k] = u0
        u_fil[k] = u
        h1 = levels[0]
        for i in range(n_lev):
            hv = levels[i]
            h_lev[k, i] = hv
            hbar_lev[k, i] = consts[i] - hv
        s_lo[k] = lower
        s_hi[k] = upper
        active[k] = branch

        u_max = 0.0
        for i in range(m):
            av = abs(u[i])
            if av > u_max:
                u_max = av

        # Event screen, fixed precedence.
        if infeasible is not None:
            event = SimEvent(EventKind.INFEASIBLE_SLAB, t, f"{infeasible} at x={x}")
        elif u_max > blowup:
            event = SimEvent(EventKind.CONTROL_BLOW_UP, t,
                             f"|u|_inf = {u_max:.6g} at x={x}")
        elif h1 < -tol or consts[0] - h1 < -tol:
            event = SimEvent(EventKind.SAFETY_VIOLATION, t,
                             f"h1={h1:.6g}, hbar1={consts[0] - h1:.6g} at x={x}")
        elif branch == zero_lg and not (lower <= 0.0 <= upper):
            event = SimEvent(EventKind.CBF_INVALIDITY, t,
                             f"degenerate slab excludes zero: lower={lower:.6g}, "
                             f"upper={upper:.6g} at x={x}")
        if event is not None or k == n_steps:
            break
        x = rk4_step(system, u, x, dt)
        k += 1

    last = k + 1
    traj = Trajectory(
        t=t_arr[:last], states=states[:last], u_nominal=u_nom[:last],
        u_filtered=u_fil[:last], h_levels=h_lev[:last], hbar_levels=hbar_lev[:last],
        slab_lower=s_lo[:last], slab_upper=s_hi[:last], active=active[:last],
        state_names=art.state_names, input_names=art.input_names)
    if event is None:
        event = SimEvent(
            EventKind.COMPLETED, min(t_arr[k], cfg.horizon),
            f"min h1={float(np.min(traj.h_levels[:, 0])):.6g}, "
            f"min hbar1={float(np.min(traj.hbar_levels[:, 0])):.6g}")
    return traj, event
