"""Exact realised costs of the stationary and master-equation feedbacks.

A small network is trained quickly so the script runs in seconds; the
differences are then driven by its approximation error.
"""

import numpy as np

from ergodic_mfg import (
    DgmConfig,
    MasterEquationProfile,
    ModelParams,
    StationaryProfile,
    exact_cost,
    solve_stationary_closed_form,
    train,
)


def main():
    params = ModelParams()
    sol = solve_stationary_closed_form(params.b, params.delta)
    net = train(DgmConfig(rho=sol.rho, iterations=3000), params).network
    bar = StationaryProfile(sol.u, params)
    master = MasterEquationProfile(net, params)
    print("    n   stationary      master    difference")
    for n in (8, 16, 32, 64, 128):
        a = exact_cost(n, bar)
        b = exact_cost(n, master)
        print(f"{n:5d}  {a:.8f}  {b:.8f}  {a - b:+.2e}")
    print("self-included mean field, stationary feedback:")
    for n in (8, 32, 128):
        print(f"  n = {n:4d}: {exact_cost(n, bar, mean_field='self_included'):.6f}  (1/2 + 1/(2n) = {0.5 + 0.5 / n:.6f})")


if __name__ == "__main__":
    main()
