import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodic_mfg import (
    DomainError,
    InvalidInputError,
    ModelParams,
    finite_difference,
    hamiltonian,
    mean_field_cost,
    optimal_selector,
    running_cost,
)
from ergodic_mfg.model import as_simplex_point, hamiltonian_rows, potential_differences, selector_slope

finite = st.floats(-20, 20, allow_nan=False)


def test_finite_difference_examples():
    assert np.array_equal(finite_difference([0, 0], 0), [0, 0])
    assert np.allclose(finite_difference([0, 16 / 65], 0), [0, 16 / 65])
    assert np.array_equal(finite_difference([3, 1, 2], 1), [2, 0, 1])


@given(st.lists(finite, min_size=2, max_size=5), st.floats(-100, 100), st.data())
def test_finite_difference_ignores_constants(u, k, data):
    x = data.draw(st.integers(0, len(u) - 1))
    assert np.allclose(finite_difference(np.array(u) + k, x), finite_difference(u, x), atol=1e-9)


def test_running_cost_examples(params, biased):
    assert running_cost(1, [2.0, -2.0], params) == 0.0
    assert running_cost(0, [-2.0, 2.0], biased) == 1.0
    assert running_cost(1, [1.0, -1.0], params) == 4.0


def test_running_cost_ignores_diagonal(params):
    assert running_cost(0, [123.0, 2.5], params) == running_cost(0, [-2.5, 2.5], params)


def test_mean_field_cost_examples():
    assert mean_field_cost(0, [0.5, 0.5]) == 0.5
    assert mean_field_cost(1, [1.0, 0.0]) == 0.0
    assert mean_field_cost(2, [0.2, 0.3, 0.5]) == 0.5


def test_hamiltonian_examples(params, biased):
    assert hamiltonian(1, [0.0, 0.0], params) == 0.0
    assert hamiltonian(0, [0.0, 0.0], biased) == 1.0
    assert hamiltonian(1, [8.0, 0.0], params) == pytest.approx(12.0, abs=1e-12)


def test_hamiltonian_interior_formula(biased):
    p = np.array([0.0, 3.0, -5.0])
    prm = ModelParams(d=3, b=4.0, delta=1.0)
    expected = 1.0 + sum(2 * q - q**2 / 16 for q in p[1:])
    assert hamiltonian(0, p, prm) == pytest.approx(expected, abs=1e-12)


def test_hamiltonian_rejects_non_finite(params):
    with pytest.raises(InvalidInputError):
        hamiltonian(0, [0.0, np.nan], params)
    with pytest.raises(InvalidInputError):
        optimal_selector(0, [0.0, np.inf], params)


def test_selector_examples(params):
    assert np.allclose(optimal_selector(0, [0.0, 0.0], params), [-2.0, 2.0])
    assert optimal_selector(1, [8.0, 0.0], params)[0] == 1.0
    assert optimal_selector(1, [-20.0, 0.0], params)[0] == 3.0


@settings(max_examples=200)
@given(st.integers(2, 4), st.data())
def test_selector_realises_hamiltonian(d, data):
    prm = ModelParams(d=d, b=data.draw(st.floats(0.1, 10)), delta=data.draw(st.floats(0, 3)))
    p = np.array(data.draw(st.lists(finite, min_size=d, max_size=d)))
    x = data.draw(st.integers(0, d - 1))
    a = optimal_selector(x, p, prm)
    assert a.sum() == pytest.approx(0.0, abs=1e-12)
    off = np.arange(d) != x
    assert np.all((a[off] >= prm.a_lo) & (a[off] <= prm.a_hi))
    value = running_cost(x, a, prm) + float(a[off] @ p[off])
    assert hamiltonian(x, p, prm) == pytest.approx(value, abs=1e-12)


def test_hamiltonian_matches_brute_force(rng):
    grid = np.round(np.arange(1.0, 3.0 + 1e-9, 0.01), 10)
    for _ in range(100):
        d = int(rng.integers(2, 4))
        prm = ModelParams(d=d, delta=float(rng.uniform(0, 2)))
        p = rng.uniform(-20, 20, size=d)
        x = int(rng.integers(d))
        best = prm.delta * (x == 0)
        for y in range(d):
            if y != x:
                best += np.min(prm.b * (grid - 2) ** 2 + grid * p[y])
        assert abs(best - hamiltonian(x, p, prm)) < 1e-3


def test_envelope_identity(rng):
    prm = ModelParams(d=3)
    eps = 1e-5
    for _ in range(50):
        p = rng.uniform(-2 * prm.b * 0.95, 2 * prm.b * 0.95, size=3)
        x = int(rng.integers(3))
        a = optimal_selector(x, p, prm)
        for y in range(3):
            if y == x:
                continue
            e = np.zeros(3)
            e[y] = eps
            fd = (hamiltonian(x, p + e, prm) - hamiltonian(x, p - e, prm)) / (2 * eps)
            assert abs(fd - a[y]) < 1e-6


def test_selector_is_lipschitz(rng):
    prm = ModelParams(d=3, b=2.0)
    for _ in range(200):
        p, q = rng.uniform(-20, 20, size=(2, 3))
        a, b = optimal_selector(0, p, prm), optimal_selector(0, q, prm)
        assert np.all(np.abs(a[1:] - b[1:]) <= np.abs(p[1:] - q[1:]) / (2 * prm.b) + 1e-12)


def test_selector_slope_matches_difference(params):
    p = np.array([-20.0, -3.0, 0.5, 7.9, 8.5])
    eps = 1e-7
    from ergodic_mfg.model import selector_rates

    fd = (selector_rates(p + eps, params) - selector_rates(p - eps, params)) / (2 * eps)
    assert np.allclose(selector_slope(p, params), fd, atol=1e-6)


def test_hamiltonian_rows_agree_with_scalar_version(rng):
    prm = ModelParams(d=3, delta=0.7)
    u = rng.normal(size=(5, 3)) * 10
    H, A = hamiltonian_rows(potential_differences(u), prm)
    for n in range(5):
        for x in range(3):
            p = finite_difference(u[n], x)
            assert H[n, x] == pytest.approx(hamiltonian(x, p, prm), abs=1e-12)
            sel = optimal_selector(x, p, prm)
            sel[x] = 0.0
            assert np.allclose(A[n, x], sel)


def test_params_validation_and_json():
    with pytest.raises(InvalidInputError):
        ModelParams(d=1)
    with pytest.raises(InvalidInputError):
        ModelParams(a_lo=3.0, a_hi=1.0)
    with pytest.raises(InvalidInputError):
        ModelParams(b=0.0)
    with pytest.raises(InvalidInputError):
        ModelParams(delta=-1.0)
    prm = ModelParams(d=3, b=2.5, delta=0.25)
    assert ModelParams.from_json(prm.to_json()) == prm
    assert set(prm.to_dict()) == {"d", "a_lo", "a_hi", "b", "delta"}
    with pytest.raises(InvalidInputError):
        ModelParams.from_dict({"d": 2, "gamma": 1})


def test_simplex_point_validation():
    assert np.allclose(as_simplex_point([0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(DomainError):
        as_simplex_point([0.5, 0.6])
    with pytest.raises(DomainError):
        as_simplex_point([-0.1, 1.1])
    with pytest.raises(DomainError):
        as_simplex_point([0.5, 0.5], d=3)
