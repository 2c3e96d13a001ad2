"""Exact density-operator simulation of small qubit registers.

Density operators are plain complex ``numpy`` arrays of shape ``(2**N, 2**N)``.
Qubit 0 is the most significant tensor factor, so ``|q0 q1 ... q_{N-1}>``
has index ``q0 * 2**(N-1) + ... + q_{N-1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

MAX_QUBITS = 8

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
UNITARY_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (I2, SX, SY, SZ)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CPHASE = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


# ---------------------------------------------------------------------------
# validation


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"unitary must be square, got shape {u.shape}")
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if dev > tol:
        raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3g})")


def n_qubits_of(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.ndim != 2 or rho.shape[1] != dim or 2**n != dim:
        raise ValueError(f"not a 2^N x 2^N operator: shape {rho.shape}")
    return n


def check_density(rho: np.ndarray, n_qubits: int | None = None) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return ``rho`` as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho)
    if n_qubits is not None and n != n_qubits:
        raise ValueError(f"operator acts on {n} qubits, expected {n_qubits}")
    if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOL:
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise ValueError(f"density operator has trace {np.trace(rho).real:.15g}")
    if np.linalg.eigvalsh(rho).min() < PSD_TOL:
        raise ValueError("density operator is not positive semidefinite")
    return rho


def maximally_mixed(n_qubits: int) -> np.ndarray:
    return np.eye(2**n_qubits, dtype=complex) / 2**n_qubits


def basis_state(bits: str) -> np.ndarray:
    """Projector onto the computational basis state ``|bits>``."""
    dim = 2 ** len(bits)
    rho = np.zeros((dim, dim), dtype=complex)
    idx = int(bits, 2)
    rho[idx, idx] = 1
    return rho


def pure_state(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True, eq=False)
class Product:
    """Tensor product of single-qubit unitaries, one per qubit."""

    unitaries: tuple

    def __post_init__(self):
        us = tuple(np.asarray(u, dtype=complex) for u in self.unitaries)
        for u in us:
            if u.shape != (2, 2):
                raise ValueError("product factors must be 2x2")
            check_unitary(u)
        object.__setattr__(self, "unitaries", us)

    @property
    def n_qubits(self) -> int:
        return len(self.unitaries)

    @classmethod
    def identity(cls, n_qubits: int) -> "Product":
        return cls((I2,) * n_qubits)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, u: np.ndarray) -> "Product":
        us = [I2] * n_qubits
        us[qubit] = u
        return cls(tuple(us))

    def active_qubits(self) -> tuple[int, ...]:
        return tuple(q for q, u in enumerate(self.unitaries) if not _is_identity(u))


@dataclass(frozen=True, eq=False)
class Entangling:
    """A unitary acting on the qubit subset ``qubits`` (in the given order)."""

    qubits: tuple
    unitary: np.ndarray
    label: str = ""

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if not qubits:
            raise ValueError("entangling gate needs a nonempty qubit subset")
        if len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise ValueError(f"invalid qubit subset {qubits}")
        u = np.asarray(self.unitary, dtype=complex)
        if u.shape != (2 ** len(qubits),) * 2:
            raise ValueError(f"unitary shape {u.shape} does not match {len(qubits)} qubits")
        check_unitary(u)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "unitary", u)

    def is_cphase(self) -> bool:
        return len(self.qubits) == 2 and np.allclose(self.unitary, CPHASE, atol=1e-14, rtol=0)


@dataclass(frozen=True, eq=False)
class Mixture:
    """Probabilistic mixture of product unitaries (decoherence)."""

    branches: tuple

    def __post_init__(self):
        branches = tuple((float(p), g) for p, g in self.branches)
        if not branches:
            raise ValueError("mixture needs at least one branch")
        for p, g in branches:
            if p < 0:
                raise ValueError("mixture probabilities must be nonnegative")
            if not isinstance(g, Product):
                raise ValueError("mixture branches must be product unitaries")
        if abs(sum(p for p, _ in branches) - 1) > 1e-12:
            raise ValueError("mixture probabilities must sum to 1")
        if len({g.n_qubits for _, g in branches}) != 1:
            raise ValueError("mixture branches act on different qubit counts")
        object.__setattr__(self, "branches", branches)

    @property
    def n_qubits(self) -> int:
        return self.branches[0][1].n_qubits


GateOp = Union[Product, Entangling, Mixture]


def cphase(i: int, j: int) -> Entangling:
    return Entangling((i, j), CPHASE, "cphase")


def cnot(control: int, target: int) -> Entangling:
    return Entangling((control, target), CNOT, "cnot")


def _is_identity(u: np.ndarray) -> bool:
    return np.array_equal(u, I2)


def _check_fits(g: GateOp, n: int) -> None:
    if isinstance(g, Entangling):
        if max(g.qubits) >= n:
            raise ValueError(f"gate qubits {g.qubits} out of range for {n} qubits")
    elif g.n_qubits != n:
        raise ValueError(f"gate acts on {g.n_qubits} qubits, state has {n}")


def apply_on_subset(op: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int, conj: bool = True) -> np.ndarray:
    """Return ``U op U^dag`` (or ``U op`` if ``conj`` is false) with ``U`` acting on ``qubits``.

    The embedding is done by contracting tensor indices, never by building
    the ``2**N`` dimensional Kronecker product.
    """
    k = len(qubits)
    qubits = list(qubits)
    ut = u.reshape((2,) * (2 * k))
    t = op.reshape((2,) * (2 * n))
    t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), qubits))
    t = np.moveaxis(t, list(range(k)), qubits)
    if conj:
        cols = [n + q for q in qubits]
        t = np.tensordot(t, ut.conj(), axes=(cols, list(range(k, 2 * k))))
        t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), cols)
    return t.reshape(op.shape)


def embed_unitary(u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**N`` matrix of ``u`` acting on ``qubits`` (identity elsewhere)."""
    return apply_on_subset(np.eye(2**n, dtype=complex), u, qubits, n, conj=False)


def gate_matrix(g: GateOp, n: int) -> np.ndarray:
    """Full unitary of a Product or Entangling gate."""
    _check_fits(g, n)
    if isinstance(g, Product):
        return reduce(np.kron, g.unitaries)
    if isinstance(g, Entangling):
        return embed_unitary(g.unitary, g.qubits, n)
    raise TypeError("a mixture has no single unitary")


def apply_unitary_gate(rho: np.ndarray, g: GateOp, n: int) -> np.ndarray:
    if isinstance(g, Product):
        for q, u in enumerate(g.unitaries):
            if not _is_identity(u):
                rho = apply_on_subset(rho, u, [q], n)
        return rho
    return apply_on_subset(rho, g.unitary, g.qubits, n)


def apply_gate(rho: np.ndarray, g: GateOp) -> np.ndarray:
    """Evolve ``rho`` by a unitary gate or a mixture of product unitaries."""
    n = n_qubits_of(rho)
    _check_fits(g, n)
    if isinstance(g, Mixture):
        out = np.zeros_like(rho, dtype=complex)
        for p, branch in g.branches:
            if p > 0:
                out += p * apply_unitary_gate(rho, branch, n)
        return out
    return apply_unitary_gate(rho, g, n)


def compile_circuit(gates: Sequence[GateOp]) -> Entangling:
    """Merge a sequence of unitary gates into one gate on the union of their qubits."""
    if not gates:
        raise ValueError("cannot compile an empty gate list")
    involved: set[int] = set()
    for g in gates:
        if isinstance(g, Mixture):
            raise ValueError("mixtures cannot be compiled into a unitary")
        if isinstance(g, Entangling):
            involved.update(g.qubits)
        else:
            involved.update(g.active_qubits())
    if not involved:
        involved = set(range(gates[0].n_qubits))
    support = sorted(involved)
    pos = {q: i for i, q in enumerate(support)}
    k = len(support)
    total = np.eye(2**k, dtype=complex)
    for g in gates:
        if isinstance(g, Entangling):
            total = apply_on_subset(total, g.unitary, [pos[q] for q in g.qubits], k, conj=False)
        else:
            for q, u in enumerate(g.unitaries):
                if not _is_identity(u):
                    total = apply_on_subset(total, u, [pos[q]], k, conj=False)
    return Entangling(tuple(support), total, "compiled")


# ---------------------------------------------------------------------------
# pseudopure states and readout


def make_pseudopure(n_qubits: int, epsilon: float, rho1: np.ndarray) -> np.ndarray:
    """``(1 - epsilon) I / 2**N + epsilon * rho1``."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}")
    rho1 = check_density(rho1, n_qubits)
    return check_density((1 - epsilon) * maximally_mixed(n_qubits) + epsilon * rho1)


def pseudopure_fraction(rho: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest epsilon with ``rho = (1-eps) M + eps rho1``, ``rho1 >= 0``, and that ``rho1``."""
    n = n_qubits_of(rho)
    lam = np.linalg.eigvalsh(rho).min()
    eps = float(np.clip(1 - 2**n * lam, 0.0, 1.0))
    if eps == 0:
        return 0.0, maximally_mixed(n)
    return eps, (rho - (1 - eps) * maximally_mixed(n)) / eps


def pauli_matrix(betas: Sequence[int]) -> np.ndarray:
    return reduce(np.kron, [PAULI[b] for b in betas])


def check_pauli(betas: Sequence[int], n_qubits: int | None = None) -> tuple[int, ...]:
    betas = tuple(int(b) for b in betas)
    if any(b not in (0, 1, 2, 3) for b in betas):
        raise ValueError(f"Pauli indices must be in 0..3, got {betas}")
    if n_qubits is not None and len(betas) != n_qubits:
        raise ValueError(f"Pauli string has length {len(betas)}, expected {n_qubits}")
    if not any(betas):
        raise ValueError("all-identity Pauli string is not a measurable observable")
    return betas


def parse_pauli(text: str) -> tuple[int, ...]:
    """``"330"`` -> ``(3, 3, 0)``."""
    if not text or any(c not in "0123" for c in text):
        raise ValueError(f"bad Pauli string {text!r}")
    return check_pauli([int(c) for c in text])


def pauli_label(betas: Sequence[int]) -> str:
    return "".join(str(b) for b in betas)


def all_pauli_strings(n_qubits: int) -> list[tuple[int, ...]]:
    """Every nontrivial Pauli string, in lexicographic order."""
    return [b for b in itertools.product(range(4), repeat=n_qubits) if any(b)]


def expectation_quantum(rho: np.ndarray, betas: Sequence[int]) -> float:
    """``tr(rho sigma_b1 x ... x sigma_bN)``."""
    n = n_qubits_of(rho)
    betas = check_pauli(betas, n)
    return float(np.einsum("ij,ji->", rho, pauli_matrix(betas)).real)


def pauli_coefficients(op: np.ndarray) -> np.ndarray:
    """Tensor ``r[b1, ..., bN] = tr(op sigma_b1 x ... x sigma_bN)`` (all 4**N strings)."""
    n = n_qubits_of(op)
    basis = np.stack(PAULI)  # (4, 2, 2): basis[b, row, col]
    t = op.reshape((2,) * (2 * n))
    # contract one qubit at a time: sum_{i,j} t[.., i, .., j, ..] sigma_b[j, i]
    for q in range(n):
        # axes are (b_0..b_{q-1}, row_q.., col_q..): row of qubit q at q, its column at n
        t = np.tensordot(t, basis, axes=([q, n], [2, 1]))
        t = np.moveaxis(t, -1, q)
    return t
