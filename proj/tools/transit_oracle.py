#!/usr/bin/env python3
"""Closed-form oracle for the 1D shuttle world.

Independent of the C++ implementation: integrates the proportional
controller pos' = pos + gain*(goal-pos)*factor*dt both in closed form
(exponential decay, piecewise across the mud interval) and by direct
discrete iteration.  Prints the frozen expectations used by the tests.
"""

import math

G1, G2 = 0.0, 10.0
EPS = 0.05
DT = 0.01
T_MAX = 1.2
MUD = (4.0, 6.0)
MU = 0.2
GAIN = 5.0


def continuous_time(gain, mu, mud):
    """Piecewise exponential-decay transit time G1 -> G2 within EPS.

    Distance from goal decays at rate gain outside mud, gain*mu inside;
    mud spans distances [G2-hi, G2-lo] from the goal.
    """
    d0 = G2 - G1
    if mud:
        lo, hi = mud
        d_enter = G2 - lo
        d_exit = G2 - hi
        return (math.log(d0 / d_enter) / gain
                + math.log(d_enter / d_exit) / (gain * mu)
                + math.log(d_exit / EPS) / gain)
    return math.log(d0 / EPS) / gain


def discrete_sim(gain_out, gain_in_mud, mud, max_steps=100000):
    """Step the plant exactly as the world does; judge after each step.

    Returns (steps, final position, outcome) where outcome is 'success'
    if |pos-goal| <= EPS with time <= T_MAX, 'timeout' if time > T_MAX.
    """
    pos = G1
    t = 0.0
    for k in range(1, max_steps + 1):
        terrain = mud is not None and mud[0] <= pos <= mud[1]
        gain = gain_in_mud if terrain else gain_out
        factor = MU if terrain else 1.0
        vel = gain * (G2 - pos)
        pos += vel * factor * DT
        t += DT
        if abs(pos - G2) <= EPS and t <= T_MAX + 1e-12:
            return k, pos, "success"
        if t > T_MAX + 1e-12:
            return k, pos, "timeout"
    return max_steps, pos, "divergence"


def main():
    t_free = math.log((G2 - G1) / EPS) / GAIN
    print(f"continuous no-mud transit: {t_free:.4f} s")
    print(f"continuous mud transit:    {continuous_time(GAIN, MU, MUD):.4f} s (t_max {T_MAX})")

    steps, pos, out = discrete_sim(GAIN, GAIN, None)
    print(f"discrete no-mud:   {steps} steps, pos {pos:.4f}, {out}")
    steps, pos, out = discrete_sim(GAIN, GAIN, MUD)
    print(f"discrete mud:      {steps} steps, pos {pos:.4f}, {out}")

    # guarded repair: constant 5 -> 5*f inside the mud region only
    for f in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        steps, pos, out = discrete_sim(GAIN, GAIN * f, MUD)
        print(f"repair factor {f:<5}: {steps} steps, pos {pos:.4f}, {out}")

    # single-step arithmetic check
    p = 4.5 + 1.0 * MU * DT
    print(f"one mud step from 4.5 at v=1: {p}")


if __name__ == "__main__":
    main()
