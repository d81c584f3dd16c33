"""Stationary large deviations of the two-state empirical measure."""

import math

import numpy as np

from ergodic_mfg import (
    ModelParams,
    RateFunction,
    StationaryProfile,
    finite_time_rate,
    ld_consistency_check,
    log_sum_check,
    solve_stationary_closed_form,
)


def main():
    params = ModelParams(delta=1.0)
    sol = solve_stationary_closed_form(params.b, params.delta)
    profile = StationaryProfile(sol.u, params)
    rf = RateFunction(profile)
    print(f"rate ratio {rf.ratio:.6f}, minimiser {rf.argmin:.6f} (stationary mass {sol.mu[0]:.6f})")
    for e in (0.1, 0.3, 0.5, 0.7, 0.9):
        print(f"  s({e:.1f}) = {rf(e):.6f}")

    for n in (100, 400, 1600):
        chk = ld_consistency_check(profile, n, 0.8)
        print(f"n = {n:5d}: -(1/n) log P(eta_0 >= 0.8) = {chk.empirical:.5f}, inf s = {chk.rate_inf:.5f}")

    print("finite-n sums:", np.round(log_sum_check(profile, [10, 100, 1000]), 8),
          "vs log(n+1)/n:", np.round([math.log(11) / 10, math.log(101) / 100, math.log(1001) / 1000], 8))

    value, _, _ = finite_time_rate(sol.mu, [0.7, 0.3], profile, T=1.0, knots=2, steps=20)
    print(f"cost of reaching (0.7, 0.3) in time 1: {value:.5f} (stationary rate {rf(0.7):.5f})")


if __name__ == "__main__":
    main()
