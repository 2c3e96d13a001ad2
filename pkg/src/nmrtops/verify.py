"""Self-check suite: model identities plus the named experiments.

``verify_suite`` returns a JSON-serializable report. ``corrupt_eta`` scales
the model's eta (not the reference value) to confirm the checks can fail.
"""

from __future__ import annotations

import dataclasses
import traceback

import numpy as np

from . import kernels, tops
from .experiments import RunConfig, chain_circuit, named_circuit, run_experiment
from .circuit import Readout, to_program
from .model import analytic_apply, analytic_expectation, analytic_init, init_ensemble, apply_classical
from .params import ModelParams, epsilon_for_lossless, epsilon_from_alpha, eta_of, theta_schedule
from .quantum import (
    Entangling,
    Product,
    all_pauli_strings,
    apply_gate,
    basis_state,
    cphase,
    expectation_quantum,
    make_pseudopure,
    pure_state,
)
from .sampler import SeedSpec, uniform_sphere

Z_LIMIT = 4.0


def _random_unitary(rng, dim):
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_pure(rng, n):
    return pure_state(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))


class Suite:
    def __init__(self, fast: bool, corrupt_eta: float | None, seed: int, workers: int):
        self.fast = fast
        self.corrupt = corrupt_eta
        self.seed = seed
        self.workers = workers
        self.points = 200 if fast else 1000
        self.samples = 20_000 if fast else 200_000

    def params(self, n, epsilon):
        p = ModelParams.from_epsilon(n, epsilon)
        if self.corrupt is not None:
            p = dataclasses.replace(p, eta=p.eta * self.corrupt)
        return p

    def rng(self, tag):
        return SeedSpec(self.seed).stream("verify", tag)

    # -- checks: each returns (passed, detail) -----------------------------

    def constants(self):
        eps16 = epsilon_from_alpha(16, 2e-6)
        ok = (
            eta_of(2) == 1 / 9
            and eta_of(3) == 1 / 33
            and ModelParams.from_alpha(2).k_max == 5
            and ModelParams.from_alpha(3).k_max == 3
            and all(epsilon_from_alpha(n, 2e-6) <= eta_of(n) for n in range(1, 16))
            and eps16 > eta_of(16)
        )
        return ok, {"K2": ModelParams.from_alpha(2).k_max, "K3": ModelParams.from_alpha(3).k_max}

    def kernel_closed_form(self):
        worst = 0.0
        rng = self.rng("cphase")
        for n in (2, 3):
            p = self.params(n, 0.0)
            for _ in range(self.points):
                i, j = rng.choice(n, size=2, replace=False)
                a, b = uniform_sphere(rng, n, 2)
                closed = kernels.w_cphase(a, b, int(i), int(j), p.eta)
                worst = max(worst, abs(closed - kernels.w_u(cphase(int(i), int(j)), a, b, eta_of(n))))
        return worst <= 1e-12, {"max_abs_dev": worst}

    def kernel_positivity(self):
        rng = self.rng("positivity")
        worst = np.inf
        draws = 2000 if self.fast else 10_000
        per = 100
        for _ in range(draws // per):
            n = int(rng.integers(2, 4))
            k = int(rng.integers(2, n + 1))
            qs = tuple(int(q) for q in rng.choice(n, size=k, replace=False))
            kern = kernels.TransitionKernel(Entangling(qs, _random_unitary(rng, 2**k)), n, self.params(n, 0.0).eta)
            a = uniform_sphere(rng, n, per)
            b = uniform_sphere(rng, n, per)
            worst = min(worst, float(kern(a, b).min()))
        return worst >= -1e-15, {"min_value": worst}

    def naive_contraction_analytic(self):
        n, g = 2, 4
        p = self.params(n, eta_of(n))
        circuit = chain_circuit(n, g, self.seed)
        worst = self._analytic_ratio_dev(circuit, p, "naive", lambda gi: eta_of(n) ** gi)
        return worst <= 1e-12, {"max_abs_dev": worst}

    def _analytic_ratio_dev(self, circuit, p, mode, expected_ratio):
        rho = make_pseudopure(circuit.n_qubits, p.epsilon, basis_state("0" * circuit.n_qubits))
        an = analytic_init(rho, p, mode)
        q = rho
        worst = 0.0
        for item in to_program(circuit):
            if isinstance(item, Readout):
                c = analytic_expectation(an, item.betas)
                ref = expected_ratio(an.counter_k) * expectation_quantum(q, item.betas)
                worst = max(worst, abs(c - ref))
            else:
                an = analytic_apply(an, item)
                q = apply_gate(q, item)
        return worst

    def _mc_blocks(self, circuit, p, mode, expected_ratio):
        """Max |z| over readouts and pooled blocks of (classical - expected ratio * quantum)."""
        cfg = RunConfig(mode, epsilon=p.epsilon, samples=self.samples, seed=self.seed, workers=self.workers)
        res = run_experiment(circuit, cfg, params=p)
        zmax = 0.0
        for r in res.rows:
            exp = expected_ratio(r.gate_index) * r.quantum_value
            zmax = max(zmax, abs(r.classical_estimate - exp) / r.classical_stderr)
        pooled = []
        for b in res.pooled:
            if np.isfinite(b.ratio):
                z = abs(b.ratio - expected_ratio(b.gate_index)) / b.stderr
                zmax = max(zmax, z)
                pooled.append([b.gate_index, b.ratio, b.stderr])
        return zmax, pooled

    def naive_contraction_mc(self):
        n = 2
        p = self.params(n, eta_of(n))
        z, pooled = self._mc_blocks(chain_circuit(n, 3, self.seed), p, "naive", lambda g: eta_of(n) ** g)
        return z <= Z_LIMIT, {"max_z": z, "pooled": pooled}

    def hidden_lossless_analytic(self):
        worst = 0.0
        for name in ("ghz", "teleport"):
            c = named_circuit(name)
            p = self.params(3, epsilon_from_alpha(3, 2e-6))
            worst = max(worst, self._analytic_ratio_dev(c, p, "hidden", lambda g: 1.0) / p.epsilon)
        return worst <= 1e-9, {"max_rel_dev": worst}

    def hidden_lossless_mc(self):
        detail = {}
        ok = True
        for name in ("ghz", "teleport", "epr"):
            c = named_circuit(name)
            p = self.params(c.n_qubits, epsilon_from_alpha(c.n_qubits, 2e-6))
            z, _ = self._mc_blocks(c, p, "hidden", lambda g: 1.0)
            detail[name] = z
            ok &= z <= Z_LIMIT
        return ok, {"max_z": detail}

    def hidden_diagnostic_mc(self):
        # K = 1 at the largest admissible epsilon: lossless first gate, eta at the second
        n = 2
        p = self.params(n, epsilon_for_lossless(n, 1))
        expected = lambda g: 1.0 if g <= 1 else eta_of(n) ** (g - 1)  # noqa: E731
        z, pooled = self._mc_blocks(chain_circuit(n, 2, self.seed), p, "hidden", expected)
        return z <= Z_LIMIT, {"max_z": z, "pooled": pooled}

    def post_k_decay_analytic(self):
        n = 2
        p = self.params(n, eta_of(n) ** 6)
        expected = lambda g: 1.0 if g <= 5 else eta_of(n) ** (g - 5)  # noqa: E731
        worst = self._analytic_ratio_dev(chain_circuit(n, 7, self.seed), p, "hidden", expected)
        return worst / p.epsilon <= 1e-9 and p.k_max == 5, {"max_rel_dev": worst / p.epsilon, "K": p.k_max}

    def marginal_identity(self):
        rng = self.rng("marginal")
        n = 2
        p = self.params(n, eta_of(n) ** 6)
        rho = make_pseudopure(n, p.epsilon, _random_pure(rng, n))
        worst = 0.0
        for _ in range(self.points // 10):
            a = uniform_sphere(rng, n, 1)[0]
            w = tops.w_rho(rho, a)
            for k in range(p.k_max + 1):
                ek = theta_schedule(k, p)
                marg = (1 - ek) / tops.FOUR_PI**n + ek * tops.w_k_rho(rho, a, k, p)
                worst = max(worst, abs(marg - w))
        return worst <= 1e-12, {"max_abs_dev": worst}

    def theta_independence(self):
        rng = self.rng("theta")
        n = 2
        p = self.params(n, eta_of(n) ** 6)
        worst = 0.0
        for _ in range(self.points // 10):
            g = Entangling((0, 1), _random_unitary(rng, 4))
            a, b = uniform_sphere(rng, n, 2)
            ref = kernels.w_u(g, a, b, eta_of(n))
            for k in range(p.k_max + 1):
                worst = max(worst, abs(kernels.w_u_theta(g, a, b, p.eta, theta_schedule(k, p)) - ref))
        return worst <= 1e-12, {"max_abs_dev": worst}

    def rotation_correspondence(self):
        rng = self.rng("rotation")
        n = 2
        worst = 0.0
        for _ in range(self.points // 10):
            v = Product(tuple(_random_unitary(rng, 2) for _ in range(n)))
            rho = _random_pure(rng, n)
            x = uniform_sphere(rng, n, 1)[0]
            rot = kernels.rotations_of(v)
            lhs = tops.w_rho(apply_gate(rho, v), x)
            rhs = tops.w_rho(rho, kernels.apply_rotations(x, rot, inverse=True))
            worst = max(worst, abs(lhs - rhs))
        return worst <= 1e-12, {"max_abs_dev": worst}

    def reproducibility(self):
        n = 2
        p = self.params(n, epsilon_for_lossless(n, 1))
        rho = make_pseudopure(n, p.epsilon, basis_state("00"))
        outs = []
        for workers in (1, 3):
            st = init_ensemble(rho, p, 10_000, self.seed, "hidden", workers)
            st = apply_classical(st, cphase(0, 1))
            outs.append(st.observable.tobytes() + st.hidden.tobytes())
        return outs[0] == outs[1], {}

    CHECKS = (
        "constants",
        "kernel_closed_form",
        "kernel_positivity",
        "naive_contraction_analytic",
        "naive_contraction_mc",
        "hidden_lossless_analytic",
        "hidden_lossless_mc",
        "hidden_diagnostic_mc",
        "post_k_decay_analytic",
        "marginal_identity",
        "theta_independence",
        "rotation_correspondence",
        "reproducibility",
    )


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def verify_suite(fast: bool = False, corrupt_eta: float | None = None, seed: int = 0, workers: int = 1) -> dict:
    suite = Suite(fast, corrupt_eta, seed, workers)
    checks = []
    for name in Suite.CHECKS:
        try:
            passed, detail = getattr(suite, name)()
        except Exception as exc:  # a crash is a failed check, reported with its type
            passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
            if not isinstance(exc, (ValueError, RuntimeError)):
                detail["traceback"] = traceback.format_exc(limit=3)
        checks.append({"name": name, "passed": bool(passed), "detail": _clean(detail)})
    return {"passed": all(c["passed"] for c in checks), "fast": fast, "seed": seed, "checks": checks}
