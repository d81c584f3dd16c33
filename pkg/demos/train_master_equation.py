"""Fit the master-equation potential with the deep Galerkin solver.

The default run (20000 iterations) takes a couple of minutes; pass a smaller
iteration count on the command line for a quick look, e.g.
``python demos/train_master_equation.py 2000``.
"""

import sys

import numpy as np

from ergodic_mfg import DgmConfig, ModelParams, residual_mse, sample_simplex, solve_stationary_closed_form, train


def main(iterations=20_000):
    params = ModelParams(delta=1.0)
    sol = solve_stationary_closed_form(params.b, params.delta)
    cfg = DgmConfig(rho=sol.rho, iterations=iterations, record_every=max(iterations // 20, 1))

    def report(it, value):
        print(f"  iteration {it:6d}  validation loss {value:.3e}")

    result = train(cfg, params, callback=report)
    net = result.network
    U = net.potential(sol.mu)
    print(f"residual MSE on fresh samples: {residual_mse(net, sol.rho, params, cfg.h):.3e}")
    print(f"U(0, mu) - U(1, mu) = {U[0] - U[1]:.5f}   stationary value {sol.u[0] - sol.u[1]:.5f}")
    eta = sample_simplex(2, 5, seed=1)
    for e, u in zip(eta, net.potential(eta)):
        print(f"  eta = ({e[0]:.3f}, {e[1]:.3f})   U = ({u[0]:+.4f}, {u[1]:+.4f})")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
