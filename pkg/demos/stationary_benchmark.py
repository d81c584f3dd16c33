"""Two-state benchmark: closed form, fixed point and relaxation.

Run with ``python demos/stationary_benchmark.py``.
"""

import numpy as np

from ergodic_mfg import (
    ModelParams,
    kolmogorov_forward,
    solve_stationary_closed_form,
    solve_stationary_fixed_point,
)
from ergodic_mfg.systems import fit_decay_rate


def main():
    for delta in (0.0, 1.0):
        params = ModelParams(b=4.0, delta=delta)
        exact = solve_stationary_closed_form(params.b, params.delta)
        iterated = solve_stationary_fixed_point(params)
        print(f"delta = {delta}")
        print(f"  rho      closed {exact.rho:.12f}   fixed point {iterated.rho:.12f}")
        print(f"  u1 - u0  closed {exact.gap:+.12f}   fixed point {iterated.gap:+.12f}")
        print(f"  mu       closed {np.round(exact.mu, 12)}   fixed point {np.round(iterated.mu, 12)}")

    # the biased state 0 is penalised, so players leave it faster and it holds less mass
    params = ModelParams(delta=1.0)
    sol = solve_stationary_closed_form(params.b, params.delta)
    path = kolmogorov_forward([0.9, 0.1], sol.u, params, T=5.0)
    rate, r2 = fit_decay_rate(path, sol.mu, 0.5, 4.0)
    print(f"relaxation from (0.9, 0.1): rate {rate:.6f} (R^2 = {r2:.8f}), analytic 4")

    three = ModelParams(d=3, delta=1.0)
    sol3 = solve_stationary_fixed_point(three)
    print(f"three states: rho = {sol3.rho:.8f}, mu = {np.round(sol3.mu, 6)}")


if __name__ == "__main__":
    main()
