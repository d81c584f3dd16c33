"""Acceptance checks at the published tolerances.

Each test records one pass/fail line through the ``acceptance`` fixture;
the lines are printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import binom

from ergodic_mfg import (
    MasterEquationProfile,
    ModelParams,
    PotentialNetwork,
    RateFunction,
    StationaryProfile,
    action_integrand,
    bd_rates,
    bd_stationary,
    deviation_benefit,
    estimate_cost,
    exact_cost,
    full_chain_cost,
    kolmogorov_forward,
    ld_consistency_check,
    count_chain_log_sum,
    loss_and_grad,
    matched_rates,
    propagation_error,
    residual_mse,
    sample_simplex,
    simulate,
    solve_stationary_closed_form,
    solve_stationary_fixed_point,
    tau,
    tau_star,
    variational_norm,
)
from ergodic_mfg.simulator import occupation_tv
from ergodic_mfg.systems import fit_decay_rate


def eq_profile(b=4.0, delta=0.0):
    p = ModelParams(b=b, delta=delta)
    return StationaryProfile(solve_stationary_closed_form(b, delta).u, p)


def test_01_closed_form_benchmark(acceptance):
    a = solve_stationary_closed_form(4.0, 0.0)
    b = solve_stationary_closed_form(4.0, 1.0)
    checks = {
        "rho(4,0)": abs(a.rho - 0.5),
        "gap(4,0)": abs(a.gap - 0.0),
        "mu(4,0)": np.abs(a.mu - 0.5).max(),
        "rho(4,1)": abs(b.rho - 8483 / 8450),
        "gap(4,1)": abs(b.gap - 16 / 65),
        "mu(4,1)": np.abs(b.mu - [32 / 65, 33 / 65]).max(),
    }
    failed = [k for k, v in checks.items() if not v <= 1e-12]
    detail = f"rho(4,1)={b.rho:.10f} gap(4,1)={b.gap:+.10f}; off by >1e-12: {failed or 'none'}"
    acceptance(1, "closed-form benchmark", not failed, detail)
    assert not failed, detail


def test_02_solver_equivalence(acceptance):
    rng = np.random.default_rng(2)
    cases = [(4.0, 0.0), (4.0, 1.0)] + [(float(rng.uniform(0.5, 8)), float(rng.uniform(0, 2))) for _ in range(10)]
    start = time.perf_counter()
    worst = 0.0
    for b, delta in cases:
        exact = solve_stationary_closed_form(b, delta)
        fp = solve_stationary_fixed_point(ModelParams(b=b, delta=delta))
        worst = max(worst, abs(fp.rho - exact.rho), np.abs(fp.mu - exact.mu).max(), np.abs(fp.u - exact.u).max())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 1.0
    acceptance(2, "fixed point vs closed form", ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_03_stability(acceptance):
    p = ModelParams()
    sol = solve_stationary_closed_form(4.0, 0.0)
    start = time.perf_counter()
    path = kolmogorov_forward([0.9, 0.1], sol.u, p, T=20.0, dt=1e-3, record_every=10)
    elapsed = time.perf_counter() - start
    err = np.linalg.norm(path.points[-1] - sol.mu)
    rate, r2 = fit_decay_rate(path, sol.mu, 0.5, 5.0)
    ok = err < 1e-6 and abs(rate - 4.0) <= 0.01 and elapsed < 1.0
    acceptance(3, "Kolmogorov stability", ok, f"|mu(20)-mu|={err:.1e}, rate={rate:.6f} (R2={r2:.8f}), {elapsed:.2f} s")
    assert ok


def test_04_dgm_residual(acceptance, trained_unbiased, trained_biased):
    res0, sol0, p0 = trained_unbiased
    net = res0.network
    mse = residual_mse(net, sol0.rho, p0, res0.config.h, count=1000, seed=424242)
    U = net.potential(sol0.mu)
    gap0 = abs(U[1] - U[0])
    fresh = sample_simplex(2, 1000, seed=777)
    central = np.abs(net.potential(fresh).sum(axis=1)).max()
    res1, sol1, _ = trained_biased
    U1 = res1.network.potential(sol1.mu)
    gap1 = U1[0] - U1[1]
    ok = mse < 1e-3 and gap0 < 0.05 and central < 0.05 and abs(gap1 - 16 / 65) < 0.1
    detail = (f"mse={mse:.2e}, |dU(mu)|={gap0:.2e}, centralization={central:.2e}, "
              f"delta=1 U(0)-U(1)={gap1:.4f} vs {16 / 65:.4f}")
    acceptance(4, "DGM residual", ok, detail)
    assert ok


def test_05_gradient_correctness(acceptance):
    p = ModelParams(delta=1.0)
    net = PotentialNetwork.default(2, seed=5)
    rho = solve_stationary_closed_form(4.0, 1.0).rho
    eta = sample_simplex(2, 64, seed=6, margin=2e-3)
    _, grad = loss_and_grad(net, eta, rho, p, 1e-3)
    coords = np.random.default_rng(7).choice(net.theta.size, 20, replace=False)
    eps = 1e-6
    fd = np.empty(20)
    for j, k in enumerate(coords):
        plus, minus = net.copy(), net.copy()
        plus.theta[k] += eps
        minus.theta[k] -= eps
        fd[j] = (loss_and_grad(plus, eta, rho, p, 1e-3)[0] - loss_and_grad(minus, eta, rho, p, 1e-3)[0]) / (2 * eps)
    rel = np.abs(fd - grad[coords]) / np.maximum(np.abs(grad[coords]), 1e-300)
    ok = rel.max() < 1e-4
    acceptance(5, "loss gradient", ok, f"max coordinate relative error {rel.max():.2e}")
    assert ok


def test_06_propagation_of_chaos(acceptance):
    sol = solve_stationary_closed_form(4.0, 0.0)
    rep = propagation_error([16, 64, 256, 1024], eq_profile(), sol.mu, T=2.0, reps=200, seed=0)
    ok = -0.65 <= rep.slope <= -0.35
    acceptance(6, "propagation of chaos", ok, f"slope {rep.slope:.4f}")
    assert ok


def test_07_birth_death_exactness(acceptance):
    prof = eq_profile()
    pi = bd_stationary(bd_rates(50, prof)).probs
    err = np.abs(pi - binom.pmf(np.arange(51), 50, 0.5)).max()
    res = simulate(50, prof, 1e4, seed=7, record_jumps=False, grid_points=2)
    tv = occupation_tv(res, pi)
    ok = err < 1e-12 and tv < 0.02
    acceptance(7, "birth-death exactness", ok, f"binomial error {err:.1e}, occupation TV {tv:.4f}")
    assert ok


def test_08_exact_cost_oracle(acceptance):
    diffs = []
    for delta in (0.0, 1.0):
        prof = eq_profile(delta=delta)
        diffs += [abs(exact_cost(n, prof) - full_chain_cost(n, prof)) for n in (2, 3)]
    prof = eq_profile()
    rho = [exact_cost(n, prof) for n in (8, 32, 128)]
    monotone = all(b <= a + 1e-12 for a, b in zip(rho, rho[1:]))
    ok = max(diffs) < 1e-12 and monotone and abs(rho[-1] - 0.5) < 0.1
    acceptance(8, "exact cost oracle", ok,
               f"max oracle gap {max(diffs):.1e}, rho(8,32,128)={[round(r, 12) for r in rho]}")
    assert ok


def test_09_cost_ordering(acceptance, trained_unbiased):
    res, sol, p = trained_unbiased
    bar, zero = eq_profile(), MasterEquationProfile(res.network, p)
    ns = np.arange(8, 129)
    diff = np.array([exact_cost(int(n), bar) - exact_cost(int(n), zero) for n in ns])
    ok = diff.min() >= -0.005
    acceptance(9, "cost ordering", ok, f"min difference {diff.min():+.2e} at n={ns[np.argmin(diff)]}")
    assert ok


def test_10_rate_function(acceptance):
    prof = eq_profile()
    grid = np.linspace(0.0, 1.0, 101)[1:-1]
    closed = RateFunction(prof, method="closed")
    quad = RateFunction(prof, method="quadrature")
    formula = np.log(1 - grid) + grid * np.log(grid / (1 - grid)) + math.log(2)
    err_closed = np.abs(closed(grid) - formula).max()
    err_quad = np.abs(quad(grid) - closed(grid)).max()
    at_half = abs(closed(0.5))
    nonneg = min(closed(grid).min(), quad(grid).min())
    ok = err_closed < 1e-10 and err_quad < 1e-6 and at_half < 1e-15 and nonneg >= 0
    acceptance(10, "rate function", ok,
               f"closed {err_closed:.1e}, quadrature {err_quad:.1e}, s(1/2)={at_half:.1e}, min s={nonneg:.1e}")
    assert ok


def test_11_lemma81_limit(acceptance):
    prof = eq_profile()
    errs = [abs(count_chain_log_sum(n, prof) - math.log(n + 1) / n) for n in (10, 100, 1000)]
    ok = max(errs) < 1e-12
    acceptance(11, "finite-n sum limit", ok, f"max error {max(errs):.1e}")
    assert ok


def test_12_ldp_consistency(acceptance):
    chk = ld_consistency_check(eq_profile(), 400, 0.8, "ge")
    ok = chk.relative_gap < 0.2
    acceptance(12, "LDP consistency", ok,
               f"empirical {chk.empirical:.4f} vs inf s {chk.rate_inf:.4f}, gap {chk.relative_gap:.1%}")
    assert ok


def test_13_duality(acceptance):
    prof = eq_profile(delta=1.0)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(20):
        mu = rng.dirichlet([1, 1])
        L = matched_rates(mu, rng.normal(size=2), prof)
        R = mu @ L - mu @ prof.mean_field_rates(mu)
        worst = max(worst, abs(action_integrand(mu, L, prof) - variational_norm(R, mu, prof)))
    from scipy import optimize

    legendre = 0.0
    for a in np.linspace(-0.95, 5, 25):
        res = optimize.minimize_scalar(lambda s: float(tau(s)) - a * s, bounds=(-40, 10), method="bounded",
                                       options={"xatol": 1e-12})
        legendre = max(legendre, abs(-res.fun - tau_star(a)))
    ok = worst < 1e-4 and legendre < 1e-8
    acceptance(13, "duality", ok, f"integrand vs variational {worst:.1e}, Legendre {legendre:.1e}")
    assert ok


def test_14_ergodicity_of_cost(acceptance):
    prof = eq_profile(delta=1.0)
    n = 32
    zeros = np.zeros(n, dtype=np.int64)
    ones = np.ones(n, dtype=np.int64)
    a = estimate_cost(n, prof, 200.0, burn_in=10.0, reps=20, seed=14, init=zeros)
    b = estimate_cost(n, prof, 200.0, burn_in=10.0, reps=20, seed=15, init=ones)
    (a_lo, a_hi), (b_lo, b_hi) = a.interval(), b.interval()
    ok = a_lo <= b_hi and b_lo <= a_hi
    acceptance(14, "ergodicity of the cost", ok,
               f"all in 0: [{a_lo:.5f}, {a_hi:.5f}], all in 1: [{b_lo:.5f}, {b_hi:.5f}]")
    assert ok


def test_15_no_profitable_deviation(acceptance):
    rep = deviation_benefit(64, eq_profile(), 100.0, burn_in=5.0, reps=20, seed=64)
    margins = rep.benefits - 3 * rep.stderrs
    ok = bool(np.all(margins <= 0))
    detail = ", ".join(f"a={a:g}: {b:+.4f}±{s:.4f}" for a, b, s in zip(rep.rates, rep.benefits, rep.stderrs))
    acceptance(15, "deviation benefit at n=64", ok, detail)
    assert ok
