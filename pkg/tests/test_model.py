import numpy as np
import pytest

from conftest import random_config, random_density, random_pure, random_unitary
from nmrtops.kernels import TransitionKernel, dephasing_mixture, rotations_of
from nmrtops.model import (
    analytic_apply,
    analytic_expectation,
    analytic_init,
    analytic_signal_ratio,
    apply_classical,
    apply_entangling_classical,
    apply_mixture_classical,
    apply_naive_gate,
    apply_product_unitary_classical,
    init_ensemble,
    readout,
    readout_combination,
)
from nmrtops.params import HiddenModelInapplicable, ModelParams, epsilon_for_lossless, eta_of, theta_schedule
from nmrtops.quantum import (
    H,
    SX,
    Entangling,
    Mixture,
    Product,
    all_pauli_strings,
    apply_gate,
    basis_state,
    cnot,
    compile_circuit,
    cphase,
    expectation_quantum,
    make_pseudopure,
    maximally_mixed,
    pure_state,
    ry,
)
from nmrtops.sampler import RejectionStats
from nmrtops.tops import FOUR_PI, product_grid, w_rho_function

Z4 = 4.0


def within(state, rho, betas, ratio=1.0, z=Z4):
    est, se = readout(state, betas)
    return abs(est - ratio * expectation_quantum(rho, betas)) <= z * se


def pooled_ratio(state, rho, block):
    """Least-squares classical/quantum ratio over ``block`` and its standard error."""
    q = {b: expectation_quantum(rho, b) for b in block}
    ss = sum(v * v for v in q.values())
    m, s = readout_combination(state, q)
    return m / ss, s / ss


def test_init_mixed_state_is_uniform():
    p = ModelParams.from_alpha(2)
    st = init_ensemble(maximally_mixed(2), p, 50_000, seed=1)
    assert st.counter_k == 0
    for arr in (st.hidden, st.observable):
        for j in range(2):
            for c in range(3):
                m = arr[:, j, c].mean()
                assert abs(m) <= 4 * np.sqrt(1 / 3 / len(arr))


def test_init_matches_quantum_all_strings():
    p = ModelParams.from_alpha(2)
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    st = init_ensemble(rho, p, 100_000, seed=2)
    for b in all_pauli_strings(2):
        assert within(st, rho, b)


def test_init_delta_fraction():
    p = ModelParams.from_alpha(2)
    st = init_ensemble(maximally_mixed(2), p, 200_000, seed=3)
    eta0 = theta_schedule(0, p)
    assert eta0 == pytest.approx(eta_of(2) ** 5)
    se = np.sqrt(eta0 * (1 - eta0) / len(st))
    assert abs(st.delta_fraction() - eta0) <= 4 * se


def test_init_diagnostic_epsilon():
    # at epsilon = eta**2 the signal is ~1e-2 and resolvable at 2e5 particles
    p = ModelParams.from_epsilon(2, epsilon_for_lossless(2, 1))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    st = init_ensemble(rho, p, 200_000, seed=4)
    r, se = pooled_ratio(st, rho, all_pauli_strings(2))
    assert abs(r - 1) <= 4 * se and se < 0.1


def test_init_errors():
    p = ModelParams.from_epsilon(2, eta_of(2))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    with pytest.raises(HiddenModelInapplicable):
        init_ensemble(rho, p, 100, mode="hidden")
    q = ModelParams.from_alpha(2)
    with pytest.raises(HiddenModelInapplicable):
        init_ensemble(make_pseudopure(2, 0.01, basis_state("00")), q, 100)
    with pytest.raises(ValueError):
        init_ensemble(maximally_mixed(2), q, 0)
    with pytest.raises(ValueError):
        init_ensemble(maximally_mixed(2), q, 10, mode="other")


def test_product_identity_and_inverse(rng):
    p = ModelParams.from_alpha(2)
    st = init_ensemble(maximally_mixed(2), p, 5000, seed=5)
    same = apply_product_unitary_classical(st, rotations_of(Product.identity(2)))
    assert np.array_equal(same.observable, st.observable) and np.array_equal(same.hidden, st.hidden)
    flip = Product.single(2, 0, SX)
    twice = apply_classical(apply_classical(st, flip), flip)
    assert np.array_equal(twice.observable, st.observable) and np.array_equal(twice.hidden, st.hidden)
    v = Product((random_unitary(rng, 2), random_unitary(rng, 2)))
    vinv = Product(tuple(u.conj().T for u in v.unitaries))
    back = apply_classical(apply_classical(st, v), vinv)
    assert np.abs(back.observable - st.observable).max() < 1e-13
    assert np.abs(back.hidden - st.hidden).max() < 1e-13
    assert back.counter_k == 0


def test_product_flip_sign_literal():
    p = ModelParams.from_alpha(2)
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    st = apply_classical(init_ensemble(rho, p, 100_000, seed=6), Product.single(2, 0, SX))
    assert within(st, apply_gate(rho, Product.single(2, 0, SX)), (3, 0))


def test_product_flip_sign_measurable():
    p = ModelParams.from_epsilon(2, epsilon_for_lossless(2, 1))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    st0 = init_ensemble(rho, p, 200_000, seed=7)
    st1 = apply_classical(st0, Product.single(2, 0, SX))
    m0, se0 = readout(st0, (3, 0))
    m1, se1 = readout(st1, (3, 0))
    assert m0 > 5 * se0 and m1 < -5 * se1
    assert abs(m1 + p.epsilon) <= 4 * se1


def test_hidden_lossless_until_k_literal():
    p = ModelParams.from_alpha(2)
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    st = init_ensemble(rho, p, 50_000, seed=8)
    q = rho
    rng = np.random.default_rng(0)
    for g in range(5):
        rot = Product((random_unitary(rng, 2), random_unitary(rng, 2)))
        st = apply_classical(apply_classical(st, cphase(0, 1)), rot)
        q = apply_gate(apply_gate(q, cphase(0, 1)), rot)
        assert st.counter_k == g + 1
        assert all(within(st, q, b) for b in all_pauli_strings(2))
    assert st.delta_fraction() == 1.0


def test_hidden_lossless_then_decay_measurable():
    # K = 1: first gate lossless, second gate loses a factor eta
    p = ModelParams.from_epsilon(2, epsilon_for_lossless(2, 1))
    assert p.k_max == 1
    rho = make_pseudopure(2, p.epsilon, pure_state([1, 1, 1, 1]))
    prep = Product((ry(0.7), ry(1.9)))
    stats = RejectionStats()
    st = apply_classical(init_ensemble(rho, p, 200_000, seed=9), prep)
    q = apply_gate(rho, prep)
    st = apply_classical(st, cnot(0, 1), stats)
    q = apply_gate(q, cnot(0, 1))
    r1, se1 = pooled_ratio(st, q, all_pauli_strings(2))
    assert abs(r1 - 1) <= 4 * se1
    assert st.delta_fraction() == 1.0
    st = apply_classical(st, Product((H, ry(0.4))))
    q = apply_gate(q, Product((H, ry(0.4))))
    st = apply_classical(st, cphase(0, 1), stats)
    q = apply_gate(q, cphase(0, 1))
    r2, se2 = pooled_ratio(st, q, all_pauli_strings(2))
    assert abs(r2 - eta_of(2)) <= 4 * se2
    assert abs(r2 - 1) > 4 * se2
    assert stats.acceptance_rate == pytest.approx(3 / 8, abs=0.01)


def test_naive_contraction_measurable():
    p = ModelParams.from_epsilon(2, eta_of(2))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    prep = Product((H, ry(0.3)))
    st = apply_classical(init_ensemble(rho, p, 200_000, seed=10, mode="naive"), prep)
    q = apply_gate(rho, prep)
    for g in (1, 2):
        st = apply_naive_gate(st, cphase(0, 1))
        q = apply_gate(q, cphase(0, 1))
        r, se = pooled_ratio(st, q, all_pauli_strings(2))
        assert abs(r - eta_of(2) ** g) <= 4 * se
    assert st.counter_k == 2


def test_naive_fixed_point():
    p = ModelParams.from_alpha(2)
    st = init_ensemble(maximally_mixed(2), p, 50_000, seed=11, mode="naive")
    st = apply_naive_gate(st, cnot(0, 1))
    for b in all_pauli_strings(2):
        est, se = readout(st, b)
        assert abs(est) <= 4 * se


def test_mode_guards():
    p = ModelParams.from_alpha(2)
    st = init_ensemble(maximally_mixed(2), p, 100, seed=0, mode="naive")
    with pytest.raises(ValueError):
        apply_entangling_classical(st, cphase(0, 1))
    hid = init_ensemble(maximally_mixed(2), p, 100, seed=0)
    with pytest.raises(ValueError):
        apply_naive_gate(hid, cphase(0, 1))
    with pytest.raises(TypeError):
        apply_entangling_classical(hid, Product.identity(2))
    with pytest.raises(TypeError):
        apply_mixture_classical(hid, Product.identity(2))


def test_mixture_actions():
    p = ModelParams.from_epsilon(1, epsilon_for_lossless(1, 1))
    rho = make_pseudopure(1, p.epsilon, pure_state([np.cos(0.4), np.sin(0.4)]))
    st = init_ensemble(rho, p, 200_000, seed=12)
    ident = apply_mixture_classical(st, Mixture(((1.0, Product.identity(1)),)))
    assert np.array_equal(ident.observable, st.observable)
    assert ident.counter_k == 0
    for s in (1.0, 0.5):
        out = apply_classical(st, dephasing_mixture(0, s, 1))
        q = apply_gate(rho, dephasing_mixture(0, s, 1))
        assert out.counter_k == 0
        assert within(out, q, (1,)) and within(out, q, (3,))
        m0, _ = readout(st, (1,))
        m1, se1 = readout(out, (1,))
        assert abs(m1 - (1 - s) * m0) <= 6 * se1


def test_readout_examples():
    p = ModelParams.from_alpha(3)
    rho = make_pseudopure(3, p.epsilon, basis_state("000"))
    st = init_ensemble(maximally_mixed(3), p, 20_000, seed=13)
    for b in ((1, 0, 0), (3, 3, 3), (1, 2, 3)):
        est, se = readout(st, b)
        assert abs(est) <= 4 * se
    st = init_ensemble(rho, p, 50_000, seed=14)
    assert within(st, rho, (3, 3, 3))
    with pytest.raises(ValueError):
        readout(st, (0, 0, 0))
    ghz = [Product.single(3, 0, H), cnot(0, 1), cnot(1, 2)]
    q = rho
    for g in ghz:
        st = apply_classical(st, g)
        q = apply_gate(q, g)
    assert expectation_quantum(q, (1, 1, 1)) == pytest.approx(p.epsilon, rel=1e-9)
    assert within(st, q, (1, 1, 1))


def test_compiled_identity_still_counts():
    p = ModelParams.from_epsilon(2, epsilon_for_lossless(2, 1))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    ident = compile_circuit([cphase(0, 1), cphase(0, 1)])
    an = analytic_init(rho, p)
    an = analytic_apply(an, ident)
    assert an.counter_k == 1
    assert analytic_expectation(an, (3, 3)) == pytest.approx(p.epsilon, rel=1e-9)
    an = analytic_apply(an, ident)
    assert an.counter_k == 2
    assert analytic_expectation(an, (3, 3)) == pytest.approx(eta_of(2) * p.epsilon, rel=1e-9)
    st = init_ensemble(rho, p, 200_000, seed=15)
    st = apply_classical(apply_classical(st, ident), ident)
    assert st.counter_k == 2
    est, se = readout(st, (3, 3))
    assert abs(est - eta_of(2) * p.epsilon) <= 4 * se


def test_analytic_signal_ratio():
    p2 = ModelParams.from_alpha(2)
    p3 = ModelParams.from_alpha(3)
    assert analytic_signal_ratio(p2.k_max, p2) == 1.0
    assert analytic_signal_ratio(5, p3) == pytest.approx((1 / 33) ** 2, rel=1e-12)
    assert analytic_signal_ratio(15, p2, "naive") == pytest.approx((1 / 9) ** 15, rel=1e-12)
    assert analytic_signal_ratio(0, p2, "naive") == 1.0
    assert analytic_signal_ratio(9, p2, "overall") == 1.0
    with pytest.raises(ValueError):
        analytic_signal_ratio(-1, p2)


def test_analytic_pipeline_schedule(rng):
    p = ModelParams.from_epsilon(2, eta_of(2) ** 6)
    rho = make_pseudopure(2, p.epsilon, random_pure(rng, 2))
    an = analytic_init(rho, p)
    naive = analytic_init(rho, p, "naive")
    q = rho
    for g in range(1, 8):
        gate = Entangling((0, 1), random_unitary(rng, 4))
        an, naive, q = analytic_apply(an, gate), analytic_apply(naive, gate), apply_gate(q, gate)
        for b in all_pauli_strings(2):
            qe = expectation_quantum(q, b)
            assert abs(analytic_expectation(an, b) - analytic_signal_ratio(g, p) * qe) <= 1e-9 * p.epsilon
            assert abs(analytic_expectation(naive, b) - eta_of(2) ** g * qe) <= 1e-9 * p.epsilon


def test_kernel_integral_identity(rng):
    # integral over b of w_U(a|b) w_k(b) equals w_{k+1} of U rho U^dag (k < K) or of U rho_eta U^dag (k >= K)
    n = 2
    p = ModelParams.from_epsilon(n, eta_of(n) ** 3)
    rho = make_pseudopure(n, p.epsilon, random_pure(rng, n))
    gate = Entangling((0, 1), random_unitary(rng, 4))
    kern = TransitionKernel(gate, n, p.eta)
    pts, wts = product_grid(n, 4, 4)
    w = w_rho_function(rho)
    u_rho = apply_gate(rho, gate)
    rho_eta = (1 - p.eta) * maximally_mixed(n) + p.eta * rho
    u_rho_eta = apply_gate(rho_eta, gate)
    for k in range(p.k_max + 2):
        ek, ek1 = theta_schedule(k, p), theta_schedule(k + 1, p)
        target = w_rho_function(u_rho if k < p.k_max else u_rho_eta)
        for a in random_config(rng, n, 5):
            pushed = np.sum(wts * w.counter(pts, ek) * kern(np.broadcast_to(a, pts.shape), pts))
            assert abs(pushed - target.counter(a[None], ek1)[0]) < 1e-12


def test_workers_do_not_change_ensemble():
    p = ModelParams.from_epsilon(2, epsilon_for_lossless(2, 1))
    rho = make_pseudopure(2, p.epsilon, basis_state("00"))
    outs = []
    for w in (1, 2, 5):
        st = init_ensemble(rho, p, 10_000, seed=16, workers=w)
        st = apply_classical(st, cphase(0, 1))
        st = apply_classical(st, dephasing_mixture(0, 0.5, 2))
        outs.append(st.observable.tobytes() + st.hidden.tobytes())
    assert outs[0] == outs[1] == outs[2]
