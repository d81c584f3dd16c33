import numpy as np
import pytest
from scipy.stats import binom

from ergodic_mfg import (
    BirthDeathChain,
    DomainError,
    InvalidInputError,
    MasterEquationProfile,
    ModelParams,
    PotentialNetwork,
    StationaryProfile,
    bd_rates,
    bd_stationary,
    constant_network_profile,
    exact_cost,
    full_chain_cost,
    per_player_rates,
    solve_stationary_closed_form,
)
from ergodic_mfg.birth_death import cost_curve_csv


def eq_profile(params):
    return StationaryProfile(solve_stationary_closed_form(params.b, params.delta).u, params)


def test_unbiased_chain_is_binomial(params):
    chain = bd_rates(10, eq_profile(params))
    k = np.arange(11)
    assert np.allclose(chain.birth, 2.0 * (10 - k))
    assert np.allclose(chain.death, 2.0 * k)
    pi = bd_stationary(chain)
    assert np.allclose(pi.probs, binom.pmf(k, 10, 0.5), atol=1e-15)
    assert pi.mean_fraction() == pytest.approx(0.5)


def test_biased_rates_and_law(biased):
    chain = bd_rates(10, eq_profile(biased))
    assert chain.birth[5] == pytest.approx((2 - 2 / 65) * 5, abs=1e-14)
    assert chain.death[5] == pytest.approx((2 + 2 / 65) * 5, abs=1e-14)
    pi = bd_stationary(chain)
    # independent players, each in state 0 with probability 32/65
    assert np.allclose(pi.probs, binom.pmf(np.arange(11), 10, 32 / 65), atol=1e-14)


def test_cost_under_equilibrium_potential_is_constant_in_n(params, biased):
    for p in (params, biased):
        prof = eq_profile(p)
        rho = solve_stationary_closed_form(p.b, p.delta).rho
        costs = [exact_cost(n, prof) for n in range(2, 60, 7)]
        assert np.allclose(costs, rho, atol=1e-13)


def test_self_included_mean_field_cost(params):
    prof = eq_profile(params)
    for n in (2, 5, 40):
        assert exact_cost(n, prof, mean_field="self_included") == pytest.approx(0.5 + 0.5 / n, abs=1e-13)
    with pytest.raises(InvalidInputError):
        exact_cost(4, prof, mean_field="everyone")


@pytest.mark.parametrize("delta", [0.0, 1.0])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_exact_cost_matches_full_chain(n, delta):
    p = ModelParams(delta=delta)
    prof = eq_profile(p)
    assert exact_cost(n, prof) == pytest.approx(full_chain_cost(n, prof), abs=1e-12)


def test_self_excluded_convention_matches_full_chain_for_a_network(biased):
    net = PotentialNetwork.default(2, hidden=(6,), seed=3)
    net.theta *= 4.0
    prof = MasterEquationProfile(net, biased)
    for n in (3, 5):
        assert exact_cost(n, prof, convention="self_excluded") == pytest.approx(
            full_chain_cost(n, prof), abs=1e-11
        )
    # the shared convention differs for a measure-dependent potential
    assert abs(exact_cost(5, prof) - full_chain_cost(5, prof)) > 1e-6


def test_conventions_agree_for_constant_potential(biased):
    u = solve_stationary_closed_form(4.0, 1.0).u
    prof = constant_network_profile(u, biased)
    a = bd_rates(9, prof, "shared")
    b = bd_rates(9, prof, "self_excluded")
    assert np.allclose(a.birth, b.birth) and np.allclose(a.death, b.death)


def test_symmetry_and_concentration(params):
    prof = eq_profile(params)
    prev = 1.0
    for n in (10, 40, 160):
        pi = bd_stationary(bd_rates(n, prof)).probs
        assert np.allclose(pi, pi[::-1], atol=1e-15)
        out = bd_stationary(bd_rates(n, prof)).mass_outside(0.1)
        assert out < prev
        prev = out
    assert prev < 1e-2


def test_per_player_rates(biased):
    a01, a10 = per_player_rates(6, eq_profile(biased), [1, 3])
    assert np.allclose(a01, 2 + 2 / 65) and np.allclose(a10, 2 - 2 / 65)


def test_tails_and_csv(params):
    dist = bd_stationary(bd_rates(4, eq_profile(params)))
    assert dist.log_tail(1.0) == pytest.approx(np.log(1 / 16))
    assert dist.log_tail(0.0, "le") == pytest.approx(np.log(1 / 16))
    assert dist.log_mass(np.zeros(5, bool)) == -np.inf
    assert dist.to_csv().splitlines()[0] == "k,prob"
    with pytest.raises(InvalidInputError):
        dist.log_tail(0.5, "gt")
    assert cost_curve_csv([2], [0.5], [0.4]).splitlines()[1].startswith("2,0.5,0.4,")


def test_validation(params):
    with pytest.raises(InvalidInputError):
        BirthDeathChain(2, [1.0, 1.0, 1.0], [0.0, 1.0, 1.0])
    with pytest.raises(InvalidInputError):
        BirthDeathChain(2, [1.0, 0.0, 0.0], [0.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        bd_rates(1, eq_profile(params))
    with pytest.raises(DomainError):
        bd_rates(4, StationaryProfile(np.zeros(3), ModelParams(d=3)))
    with pytest.raises(InvalidInputError):
        bd_rates(4, eq_profile(params), convention="other")
