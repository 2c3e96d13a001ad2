"""Model constants: polarization scaling, separability threshold and the counter schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_ALPHA = 2e-6

# relative slack when comparing epsilon against powers of eta, so that
# epsilon = eta**(K+1) computed in floating point still yields K
_REL_TOL = 1e-12

# k_max when epsilon == 0 (no finite K exists)
K_CAP = 64


class HiddenModelInapplicable(ValueError):
    """Raised when epsilon is too large for the requested classical model."""


def epsilon_from_alpha(n_qubits: int, alpha: float) -> float:
    """Return ``alpha * N / 2**N``."""
    if n_qubits <= 0:
        raise ValueError("n_qubits must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return alpha * n_qubits / 2.0**n_qubits


def eta_of(n_qubits: int) -> float:
    """Separability threshold ``1 / (1 + 2**(2N-1))``."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return 1.0 / (1.0 + 2.0 ** (2 * n_qubits - 1))


def lossless_count(epsilon: float, eta: float) -> int:
    """Largest K with ``epsilon <= eta**(K+1)``; -1 if even ``epsilon <= eta`` fails."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon == 0:
        return K_CAP
    k = -1
    while k < K_CAP and epsilon <= eta ** (k + 2) * (1 + _REL_TOL):
        k += 1
    return k


def epsilon_for_lossless(n_qubits: int, k_max: int) -> float:
    """The largest admissible epsilon for which the hidden model has ``K = k_max``."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    return eta_of(n_qubits) ** (k_max + 1)


@dataclass(frozen=True)
class ModelParams:
    """Parameters shared by the quantum reference and the classical models.

    ``eta`` is normally derived from ``n_qubits``; it is a field so that a
    deliberately corrupted value can be injected for mutation testing.
    """

    n_qubits: int
    epsilon: float
    alpha: float | None = None
    eta: float = field(default=-1.0)
    k_max: int = field(default=-1)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= 8:
            raise ValueError("n_qubits must be in 1..8 (dense matrices only)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.eta < 0:
            object.__setattr__(self, "eta", eta_of(self.n_qubits))
        if self.k_max < 0:
            object.__setattr__(self, "k_max", max(lossless_count(self.epsilon, self.eta), 0))

    @classmethod
    def from_alpha(cls, n_qubits: int, alpha: float = DEFAULT_ALPHA) -> "ModelParams":
        return cls(n_qubits, epsilon_from_alpha(n_qubits, alpha), alpha=alpha)

    @classmethod
    def from_epsilon(cls, n_qubits: int, epsilon: float) -> "ModelParams":
        return cls(n_qubits, epsilon)

    @property
    def separable(self) -> bool:
        """Whether ``epsilon <= eta`` (every pseudopure state has a nonnegative w)."""
        return self.epsilon <= self.eta * (1 + _REL_TOL)

    @property
    def hidden_applicable(self) -> bool:
        return self.epsilon <= self.eta**2 * (1 + _REL_TOL)


def theta_schedule(k: int, params: ModelParams) -> float:
    """eta_k: ``eta**(K-k)`` before the K-th entangling gate, 1 afterwards."""
    if k < 0:
        raise ValueError("counter index must be nonnegative")
    if k >= params.k_max:
        return 1.0
    return params.eta ** (params.k_max - k)


def max_lossless_gates(params: ModelParams) -> int:
    """Number K of entangling gates the hidden model passes without signal loss."""
    if not params.hidden_applicable:
        raise HiddenModelInapplicable(
            f"epsilon={params.epsilon:g} exceeds eta^2={params.eta ** 2:g}; hidden model inapplicable"
        )
    return params.k_max
