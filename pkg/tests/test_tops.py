import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_config, random_density, random_pure
from nmrtops.params import ModelParams, eta_of, theta_schedule
from nmrtops.quantum import SX, SZ, I2, all_pauli_strings, basis_state, expectation_quantum, make_pseudopure, maximally_mixed, pauli_matrix
from nmrtops.sampler import SeedSpec, uniform_sphere
from nmrtops.tops import (
    FOUR_PI,
    Grid,
    MonteCarlo,
    check_config,
    classical_expectation_identity,
    integrate,
    mixing_reconstruction,
    p1_operator,
    p_theta,
    q1_min_eigenvalue,
    q1_operator,
    q_theta,
    reconstruct_rho,
    w_k_from_w,
    w_k_rho,
    w_rho,
    w_rho_function,
    z_histogram,
    z_marginal_density,
)

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


def unit_vectors(n):
    vec = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3)
    return st.lists(vec, min_size=n, max_size=n).map(
        lambda vs: np.array([np.array(v) / np.linalg.norm(v) for v in vs])
    )


def test_p1_examples():
    assert np.allclose(p1_operator([Z]), np.diag([1, 0]), atol=0)
    assert np.allclose(p1_operator([Z, -Z]), basis_state("01"), atol=0)
    px = p1_operator([X])
    assert np.allclose(px, (I2 + SX) / 2)
    assert np.allclose(np.linalg.eigvalsh(px), [0, 1], atol=1e-15)


@given(unit_vectors(2))
@settings(max_examples=50, deadline=None)
def test_p1_is_pure_state(cfg):
    p = p1_operator(cfg)
    assert abs(np.trace(p @ p).real - 1) < 1e-12
    assert abs(np.trace(p).real - 1) < 1e-12


def test_q1_examples():
    assert np.allclose(q1_operator([Z]), np.diag([4, -2]) / FOUR_PI)
    assert q1_min_eigenvalue(1) == pytest.approx(-2 / FOUR_PI)
    assert q1_min_eigenvalue(2) == pytest.approx(-8 / FOUR_PI**2)


def test_q1_min_eigenvalue_attained(rng):
    for n in (1, 2, 3):
        for cfg in random_config(rng, n, 20):
            assert abs(np.linalg.eigvalsh(q1_operator(cfg)).min() - q1_min_eigenvalue(n)) < 1e-12


def test_q1_integrates_to_identity():
    for n in (1, 2):
        val, se = integrate(lambda c: np.stack([q1_operator(x) for x in c]), n, MonteCarlo(20_000, seed=3))
        assert np.all(np.abs(val - np.eye(2**n)) <= 4 * se + 1e-12)
        grid_val, _ = integrate(lambda c: np.stack([q1_operator(x) for x in c]), n, Grid(4, 4))
        assert np.abs(grid_val - np.eye(2**n)).max() < 1e-12


def test_theta_operators(rng):
    cfg = random_config(rng, 2)
    assert np.array_equal(p_theta(cfg, 1.0), p1_operator(cfg))
    assert np.allclose(q_theta(cfg, 1.0), q1_operator(cfg), atol=1e-16)
    for th in (0.01, 0.3, 1.0):
        assert abs(np.trace(p_theta(cfg, th)).real - 1) < 1e-14
    for bad in (0.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            p_theta(cfg, bad)
        with pytest.raises(ValueError):
            q_theta(cfg, bad)


def test_p_theta_q1_trace(rng):
    for _ in range(100):
        n = 2
        m, nn = random_config(rng, n), random_config(rng, n)
        th = rng.uniform(0.01, 1)
        lhs = np.trace(p_theta(m, th) @ q1_operator(nn)).real
        t_i = np.prod(1 + 3 * np.sum(m * nn, axis=1)) / FOUR_PI**n
        assert abs(lhs - ((1 - th) / FOUR_PI**n + th * t_i)) < 1e-12


def test_duality_product_formula(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        m, nn = random_config(rng, n), random_config(rng, n)
        lhs = np.trace(p1_operator(m) @ q1_operator(nn)).real
        assert abs(lhs - np.prod(1 + 3 * np.sum(m * nn, axis=1)) / FOUR_PI**n) < 1e-12


def test_w_rho_examples(rng):
    for n in (1, 2, 3):
        assert w_rho(maximally_mixed(n), random_config(rng, n)) == pytest.approx(1 / FOUR_PI**n, rel=1e-12)
    rho0 = basis_state("0")
    assert w_rho(rho0, [Z]) == pytest.approx(1 / np.pi, rel=1e-14)
    assert w_rho(rho0, [-Z]) == pytest.approx(-1 / (2 * np.pi), rel=1e-14)


def test_w_rho_nonnegativity_bound(rng):
    worst = np.inf
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        eta = eta_of(n)
        eps = rng.uniform(0, eta)
        rho = make_pseudopure(n, eps, random_pure(rng, n))
        w = w_rho_function(rho)
        cfgs = random_config(rng, n, 10)
        slack = w(cfgs) - (1 - eps / eta) / FOUR_PI**n
        worst = min(worst, slack.min())
    assert worst >= -1e-12


def test_vectorized_w_matches_trace(rng):
    for n in (1, 2, 3):
        rho = random_density(rng, n)
        w = w_rho_function(rho)
        cfgs = random_config(rng, n, 30)
        direct = np.array([w_rho(rho, c) for c in cfgs])
        assert np.abs(w(cfgs) - direct).max() < 1e-14


def test_w_k_rho(rng):
    p = ModelParams.from_alpha(2)
    rho = make_pseudopure(2, p.epsilon, random_pure(rng, 2))
    worst_rel = 0.0
    for a in random_config(rng, 2, 200):
        w = w_rho(rho, a)
        for k in range(p.k_max + 2):
            ek = theta_schedule(k, p)
            direct = w_k_rho(rho, a, k, p)
            worst_rel = max(worst_rel, abs(direct - w_k_from_w(w, ek, 2)))
            if k >= p.k_max:
                assert direct == pytest.approx(w, abs=1e-15)
    assert worst_rel < 1e-12
    for k in range(p.k_max + 1):
        assert w_k_rho(maximally_mixed(2), random_config(rng, 2), k, p) == pytest.approx(1 / FOUR_PI**2, rel=1e-9)


def test_w_k_rho_nonnegative_at_k0(rng):
    p = ModelParams.from_epsilon(2, 1e-6)
    assert p.k_max == 5
    rho = make_pseudopure(2, 1e-6, basis_state("00"))
    floor = (1 - 1e-6 / eta_of(2) ** 6) / FOUR_PI**2
    assert floor > 0
    for a in random_config(rng, 2, 1000):
        assert w_k_rho(rho, a, 0, p) >= floor - 1e-12


def test_classical_expectation_identity(rng):
    assert classical_expectation_identity(np.array([Z, Z, Z]), (3, 3, 3)) == 1.0
    assert classical_expectation_identity(np.array([X, Z]), (1, 0)) == 1.0
    assert classical_expectation_identity(np.array([X, Z]), (2, 0)) == 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        cfg = random_config(rng, n)
        b = all_pauli_strings(n)[rng.integers(4**n - 1)]
        ref = np.trace(p1_operator(cfg) @ pauli_matrix(b)).real
        assert abs(classical_expectation_identity(cfg, b) - ref) < 1e-12


def test_expectation_identity_by_mc(rng):
    for n in (1, 2, 3):
        rho = random_density(rng, n)
        w = w_rho_function(rho)
        for b in all_pauli_strings(n)[:: max(1, 4**n // 12)]:
            est, se = integrate(lambda c: w(c) * classical_expectation_identity(c, b), n, MonteCarlo(200_000, seed=n))
            assert abs(est - expectation_quantum(rho, b)) <= 4 * se


def test_reconstruct_mixed_state_exact():
    m = maximally_mixed(2)
    rho = reconstruct_rho(w_rho_function(m), 2, 1.0, Grid(3, 3))
    assert np.abs(rho - m).max() < 1e-14


def test_reconstruct_n1_grid():
    rho = basis_state("0")
    rec = reconstruct_rho(w_rho_function(rho), 1, 1.0, Grid(64, 64))
    assert np.linalg.norm(rec - rho) <= 1e-6


def test_reconstruct_with_theta(rng):
    p = ModelParams.from_epsilon(1, eta_of(1) ** 3)
    rho = make_pseudopure(1, p.epsilon, random_pure(rng, 1))
    for k in range(p.k_max + 1):
        ek = theta_schedule(k, p)
        w = w_rho_function(rho)
        rec = reconstruct_rho(lambda c: w.counter(c, ek), 1, ek, Grid(8, 8))
        assert np.abs(rec - rho).max() < 1e-12
    with pytest.raises(ValueError):
        reconstruct_rho(w_rho_function(rho), 1, 1.0, Grid(0, 4))
    with pytest.raises(ValueError):
        reconstruct_rho(w_rho_function(rho), 1, 1.0, MonteCarlo(0))


def test_mixing_reconstruction_matches_quadrature(rng):
    rho = random_density(rng, 1)
    w = w_rho_function(rho)
    theta, ek = 0.05, 0.2
    rec = reconstruct_rho(lambda c: w.counter(c, ek), 1, theta, Grid(8, 8))
    assert np.abs(rec - mixing_reconstruction(rho, theta, ek)).max() < 1e-13


def test_z_marginal_sample_vs_density(rng):
    # density-backed vs sample-backed marginal for a strongly polarized separable state
    from nmrtops.sampler import rejection_sample

    rho = make_pseudopure(1, eta_of(1), basis_state("0"))
    w = w_rho_function(rho)
    draws = rejection_sample(lambda c, i: w(c), 2 / FOUR_PI, SeedSpec(1).stream("z"), 1, 100_000)
    hist, edges = z_histogram(draws, 0, bins=10)
    centers = (edges[1:] + edges[:-1]) / 2
    expected = z_marginal_density(rho, 0, centers)
    se = np.sqrt(expected / (100_000 * 0.2))
    assert np.all(np.abs(hist - expected) < 5 * se)


def test_check_config():
    with pytest.raises(ValueError):
        check_config(np.array([[1.0, 0, 0.1]]))
    with pytest.raises(ValueError):
        check_config(np.array([1.0, 0, 0]))
    with pytest.raises(ValueError):
        check_config(np.array([[1.0, 0, 0]]), 2)
