#!/usr/bin/env python3
"""Why a single barrier fails between parallel walls: the double integrator.

To keep x1 in [-1, 1] a common choice is h_s = 1 - x1^2 with the level-2
barrier h2 = c1 h_s - 2 x1 x2.  But L_g h2 = -2 x1 vanishes at x1 = 0, and
there the barrier condition degenerates to the state-only requirement
|x2| <= sqrt(c1 c2 / 2): cross the midline faster than that and no control
can help.  The constant-sum pair h = 1 + x1, hbar = 1 - x1 never loses the
input (L_g h2 = 1 identically), so the same crossings are harmless.
"""

import math

import numpy as np

from corridorcbf.safety_filter import zero_lg_consistency
from corridorcbf.sim import ScenarioConfig, run_scenario
from corridorcbf.systems import single_cbf_baseline


def main():
    c1 = c2 = 1.0
    baseline = single_cbf_baseline("double_integrator", c1, c2)
    critical = math.sqrt(c1 * c2 / 2.0)
    print(f"critical midline speed: sqrt(c1*c2/2) = {critical:.6f}\n")

    print("single-barrier validity monitor on the midline x1 = 0:")
    for x2 in (0.0, 0.5, 0.70, 0.71, 1.0, 2.0):
        ok = zero_lg_consistency(baseline.constraint_at(np.array([0.0, x2])))
        print(f"  x2 = {x2:4.2f}: {'valid' if ok else 'INVALID (no control can satisfy the condition)'}")

    print("\nclosed-loop from (0, 1.2), i.e. crossing too fast:")
    # the pair's gain adapts to the start (a crossing at speed 1.2 needs
    # c1 > 1.2); the single barrier keeps the textbook c1 = 1
    for filter_kind, gain in (("single", c1), ("parallel", None)):
        cfg = ScenarioConfig(
            system="double_integrator", barrier="x1_corridor",
            filter_kind=filter_kind, x0=np.array([0.0, 1.2]),
            nominal={"kind": "constant", "value": [0.0]},
            gains={"c1": gain, "c2": c2}, horizon=5.0)
        traj, event = run_scenario(cfg)
        print(f"  {filter_kind:8s}: {event.kind.value} at t = {event.t_event:.3f} s, "
              f"min wall margin = {min(traj.h_levels[:, 0].min(), traj.hbar_levels[:, 0].min()):+.2e}")

    print("\nThe pair's level-2 input row is identically 1, so the slab filter")
    print("stays in charge through the crossing and the corridor is invariant.")


if __name__ == "__main__":
    main()
