"""Gate-by-gate classical models: particle ensembles of classical tops.

Two modes share one state type:

* ``hidden``: every particle carries observable spins ``n`` and hidden spins
  ``a``. Gates act on the hidden spins; the observable spins are redrawn from
  ``q_k(n | a)`` (equal to ``a`` with probability ``eta_k``, else uniform).
* ``naive``: only the observable spins are used; entangling gates apply the
  kernel ``w_U(n' | n)`` directly and lose a factor ``eta`` each time.

Every stochastic operation draws from streams keyed by (seed, operation
step, chunk index), so results do not depend on how chunks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .kernels import TransitionKernel, apply_rotations, rotations_of
from .params import HiddenModelInapplicable, ModelParams, theta_schedule
from .quantum import (
    Entangling,
    GateOp,
    Mixture,
    Product,
    apply_gate,
    check_density,
    check_pauli,
    gate_matrix,
    pseudopure_fraction,
)
from .sampler import RejectionStats, SeedSpec, map_chunks, mc_mean_stderr, rejection_sample, uniform_sphere
from .tops import FOUR_PI, classical_expectation_identity, mixing_reconstruction, w_rho_function

MODES = ("hidden", "naive")
DEFAULT_SAMPLES = 200_000
_TOL = 1e-12


class Particle(NamedTuple):
    observable: np.ndarray
    hidden: np.ndarray


@dataclass(frozen=True, eq=False)
class ModelState:
    observable: np.ndarray  # (P, N, 3)
    hidden: np.ndarray  # (P, N, 3); equal to ``observable`` in naive mode
    counter_k: int
    params: ModelParams
    mode: str
    seed: SeedSpec
    step: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def __len__(self) -> int:
        return len(self.observable)

    def particle(self, i: int) -> Particle:
        return Particle(self.observable[i], self.hidden[i])

    def delta_fraction(self) -> float:
        """Fraction of particles whose observable spins coincide with their hidden spins."""
        same = np.all(self.observable == self.hidden, axis=(1, 2))
        return float(same.mean())


def _observe(a: np.ndarray, eta_k: float, rng: np.random.Generator) -> np.ndarray:
    """Draw observable spins from ``q_k(. | a)``."""
    keep = rng.uniform(size=len(a)) < eta_k
    n = uniform_sphere(rng, a.shape[1], len(a))
    n[keep] = a[keep]
    return n


def init_ensemble(
    rho: np.ndarray,
    params: ModelParams,
    sample_count: int = DEFAULT_SAMPLES,
    seed: int | SeedSpec = 0,
    mode: str = "hidden",
    workers: int = 1,
    stats: RejectionStats | None = None,
) -> ModelState:
    """Sample the initial ensemble for ``rho``.

    Hidden mode draws ``a`` from ``w_0^rho`` and ``n`` from ``q_0(. | a)``;
    naive mode draws ``n`` from ``w^rho``.
    """
    n = params.n_qubits
    rho = check_density(rho, n)
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    eps, _ = pseudopure_fraction(rho)
    w = w_rho_function(rho)
    if mode == "hidden":
        if not params.hidden_applicable:
            raise HiddenModelInapplicable(f"We assume epsilon <= eta^2; got epsilon={params.epsilon:g}")
        eta_0 = theta_schedule(0, params)
        if eps > params.eta * eta_0 * (1 + 1e-9):
            raise HiddenModelInapplicable(
                f"state has epsilon={eps:g} > eta^(K+1)={params.eta * eta_0:g}; w_0 would be negative"
            )
        c = eps / eta_0

        def density(cands, idx):
            return w.counter(cands, eta_0)

    elif mode == "naive":
        if eps > params.eta * (1 + 1e-9):
            raise HiddenModelInapplicable(f"state has epsilon={eps:g} > eta={params.eta:g}; not separable")
        c = eps
        eta_0 = 1.0

        def density(cands, idx):
            return w(cands)

    else:
        raise ValueError(f"mode must be one of {MODES}")
    bound = (1 + c * (4.0**n - 1)) / FOUR_PI**n
    total_stats = RejectionStats() if stats is None else stats

    def run(ci, start, stop):
        rng = seed.stream("init", ci)
        st = RejectionStats()
        a = rejection_sample(density, bound, rng, n, stop - start, st)
        obs = _observe(a, eta_0, rng) if mode == "hidden" else a
        return a, obs, st

    parts = map_chunks(run, sample_count, workers)
    for _, _, st in parts:
        total_stats.merge(st)
    hidden = np.concatenate([p[0] for p in parts])
    obs = np.concatenate([p[1] for p in parts])
    if mode == "naive":
        hidden = obs
    return ModelState(obs, hidden, 0, params, mode, seed, 0, workers)


def apply_product_unitary_classical(state: ModelState, rotations: np.ndarray) -> ModelState:
    """Rotate hidden and observable spins of every particle; the counter is unchanged."""
    rotations = np.asarray(rotations, dtype=float)
    obs = apply_rotations(state.observable, rotations)
    hidden = obs if state.mode == "naive" else apply_rotations(state.hidden, rotations)
    return replace(state, observable=obs, hidden=hidden)


def _kernel_step(state: ModelState, branches: Sequence[tuple[float, GateOp]], tag: str, stats) -> ModelState:
    """Resample through ``w_U`` (U chosen per particle from ``branches``)."""
    n = state.params.n_qubits
    eta = state.params.eta
    kernels = [TransitionKernel(g, n, eta) for _, g in branches]
    probs = np.array([p for p, _ in branches])
    hidden_mode = state.mode == "hidden"
    source = state.hidden if hidden_mode else state.observable
    eta_next = theta_schedule(state.counter_k + 1, state.params) if hidden_mode else 1.0
    step = state.step
    seed = state.seed

    def run(ci, start, stop):
        rng = seed.stream(tag, step, ci)
        b = source[start:stop]
        st = RejectionStats()
        if len(kernels) == 1:
            choice = np.zeros(len(b), dtype=int)
        else:
            choice = rng.choice(len(kernels), size=len(b), p=probs)
        out = np.empty_like(b)
        for bi, kern in enumerate(kernels):
            sel = np.flatnonzero(choice == bi)
            if sel.size == 0:
                continue
            prepared = kern.prepare(b[sel])

            def density(cands, idx, kern=kern, prepared=prepared):
                return kern.density(cands, prepared, idx)

            out[sel] = rejection_sample(density, kern.bound, rng, n, sel.size, st)
        obs = _observe(out, eta_next, rng) if hidden_mode else out
        return out, obs, st

    parts = map_chunks(run, len(state), state.workers)
    if stats is not None:
        for _, _, st in parts:
            stats.merge(st)
    hidden = np.concatenate([p[0] for p in parts])
    obs = np.concatenate([p[1] for p in parts])
    if not hidden_mode:
        hidden = obs
    return replace(state, observable=obs, hidden=hidden, counter_k=state.counter_k + 1, step=step + 1)


def apply_entangling_classical(state: ModelState, gate: Entangling, stats: RejectionStats | None = None) -> ModelState:
    """Hidden-model entangling gate: ``a' ~ w_U(. | a)``, ``n' ~ q_{k+1}(. | a')``, ``k -> k+1``."""
    if state.mode != "hidden":
        raise ValueError("apply_entangling_classical requires hidden mode")
    if not isinstance(gate, Entangling):
        raise TypeError("product gates and mixtures take the rotation path")
    return _kernel_step(state, [(1.0, gate)], "entangle", stats)


def apply_naive_gate(state: ModelState, gate: Entangling, stats: RejectionStats | None = None) -> ModelState:
    """Naive model: ``n' ~ w_U(. | n)``."""
    if state.mode != "naive":
        raise ValueError("apply_naive_gate requires naive mode")
    if not isinstance(gate, Entangling):
        raise TypeError("product gates and mixtures take the rotation path")
    return _kernel_step(state, [(1.0, gate)], "naive", stats)


def apply_compiled_mixture(
    state: ModelState, branches: Sequence[tuple[float, Entangling]], stats: RejectionStats | None = None
) -> ModelState:
    """One kernel step with a per-particle random unitary (mixture of compiled circuits)."""
    return _kernel_step(state, branches, "compiled", stats)


def apply_mixture_classical(state: ModelState, mixture: Mixture) -> ModelState:
    """Per particle, pick a branch by its probability and rotate by that branch's product unitary."""
    if not isinstance(mixture, Mixture):
        raise TypeError("expected a Mixture")
    for _, g in mixture.branches:
        if not isinstance(g, Product):
            raise TypeError("mixture branches must be product unitaries")
    rots = np.stack([rotations_of(g) for _, g in mixture.branches])
    probs = np.array([p for p, _ in mixture.branches])
    step = state.step
    seed = state.seed

    def run(ci, start, stop):
        rng = seed.stream("mixture", step, ci)
        return rng.choice(len(probs), size=stop - start, p=probs)

    choice = np.concatenate(map_chunks(run, len(state), state.workers))
    obs = np.einsum("pjab,pjb->pja", rots[choice], state.observable)
    if state.mode == "naive":
        hidden = obs
    else:
        hidden = np.einsum("pjab,pjb->pja", rots[choice], state.hidden)
    return replace(state, observable=obs, hidden=hidden, step=step + 1)


def apply_classical(state: ModelState, gate: GateOp, stats: RejectionStats | None = None) -> ModelState:
    """Dispatch a gate to the matching classical update."""
    if isinstance(gate, Product):
        return apply_product_unitary_classical(state, rotations_of(gate))
    if isinstance(gate, Mixture):
        return apply_mixture_classical(state, gate)
    if state.mode == "naive":
        return apply_naive_gate(state, gate, stats)
    return apply_entangling_classical(state, gate, stats)


def readout(state: ModelState, betas) -> tuple[float, float]:
    """Mean and standard error of ``prod_j (n_j)_{b_j}`` over the ensemble."""
    betas = check_pauli(betas, state.params.n_qubits)
    return mc_mean_stderr(classical_expectation_identity(state.observable, betas))


def readout_combination(state: ModelState, weights: dict) -> tuple[float, float]:
    """Mean and standard error of ``sum_b c_b prod_j (n_j)_{b_j}`` (per-particle combination)."""
    vals = np.zeros(len(state))
    for betas, c in weights.items():
        vals += c * classical_expectation_identity(state.observable, check_pauli(betas, state.params.n_qubits))
    return mc_mean_stderr(vals)


def analytic_signal_ratio(gate_count: int, params: ModelParams, mode: str = "hidden") -> float:
    """Predicted classical/quantum signal ratio after ``gate_count`` entangling gates."""
    if gate_count < 0:
        raise ValueError("gate_count must be >= 0")
    if mode == "naive":
        return params.eta**gate_count
    if mode == "hidden":
        return 1.0 if gate_count <= params.k_max else params.eta ** (gate_count - params.k_max)
    if mode in ("quantum", "overall"):
        return 1.0
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# density-backed (analytic) pipeline


@dataclass(frozen=True, eq=False)
class AnalyticState:
    """Density operator ``sigma`` whose counter-``k`` coefficients are the hidden distribution.

    The observable marginal of the model is ``w^sigma``, so classical
    expectation values are ``tr(sigma sigma_b)``.
    """

    sigma: np.ndarray
    counter_k: int
    params: ModelParams
    mode: str = "hidden"


def analytic_init(rho: np.ndarray, params: ModelParams, mode: str = "hidden") -> AnalyticState:
    return AnalyticState(check_density(rho, params.n_qubits), 0, params, mode)


def analytic_apply(state: AnalyticState, gate: GateOp) -> AnalyticState:
    """Propagate through one gate using trace algebra only."""
    if not isinstance(gate, Entangling):
        return replace(state, sigma=apply_gate(state.sigma, gate))
    params = state.params
    k = state.counter_k
    u = gate_matrix(gate, params.n_qubits)
    if state.mode == "naive":
        bracket = mixing_reconstruction(state.sigma, params.eta, 1.0)
    else:
        theta = params.eta * theta_schedule(k + 1, params)
        bracket = mixing_reconstruction(state.sigma, theta, theta_schedule(k, params))
    return replace(state, sigma=u @ bracket @ u.conj().T, counter_k=k + 1)


def analytic_expectation(state: AnalyticState, betas) -> float:
    from .quantum import expectation_quantum

    return expectation_quantum(state.sigma, betas)
