"""Transition functions and nonnegative transition probabilities for gates.

Conventions: ``t_u(gate, n, m)`` and ``w_u(gate, n, m, eta)`` are densities in
the *output* configuration ``n`` conditioned on the *input* ``m``.
"""

from __future__ import annotations

import itertools

import numpy as np

from .quantum import (
    I2,
    PAULI,
    SZ,
    Entangling,
    GateOp,
    Mixture,
    Product,
    check_unitary,
    gate_matrix,
    pauli_coefficients,
)
from .tops import FOUR_PI, _check_theta, check_config, features, p1_operator, p_theta, q1_operator

# ---------------------------------------------------------------------------
# pointwise trace forms (the reference path)


def _unitary_of(gate: GateOp, n_qubits: int) -> np.ndarray:
    if isinstance(gate, Mixture):
        raise TypeError("transition kernels are defined for unitary gates; split mixtures first")
    return gate_matrix(gate, n_qubits)


def t_u(gate: GateOp, n: np.ndarray, m: np.ndarray) -> float:
    """``tr(U P1(m) U^dag Q1(n))``; may be negative."""
    n, m = check_config(n), check_config(m, len(n))
    u = _unitary_of(gate, len(n))
    return float(np.einsum("ij,ji->", u @ p1_operator(m) @ u.conj().T, q1_operator(n)).real)


def w_u(gate: GateOp, n: np.ndarray, m: np.ndarray, eta: float) -> float:
    """``tr(U P_eta(m) U^dag Q1(n))``."""
    n, m = check_config(n), check_config(m, len(n))
    u = _unitary_of(gate, len(n))
    return float(np.einsum("ij,ji->", u @ p_theta(m, eta) @ u.conj().T, q1_operator(n)).real)


def _product_operator_ld(configs: np.ndarray, scale: float, norm) -> np.ndarray:
    """``prod_j (I + scale n_j.sigma) / norm`` in extended precision."""
    paulis = np.asarray(PAULI, dtype=np.clongdouble)
    out = np.ones((1, 1), dtype=np.clongdouble)
    for v in np.asarray(configs, dtype=np.longdouble):
        out = np.kron(out, (paulis[0] + scale * np.einsum("a,aij->ij", v, paulis[1:])) / norm)
    return out


def w_u_theta(gate: GateOp, a: np.ndarray, b: np.ndarray, eta: float, theta: float) -> float:
    """``tr(U P_{eta theta}(b) U^dag Q_theta(a))``; independent of ``theta``.

    ``Q_theta`` carries entries of order ``1/theta``, so the trace is taken in
    extended precision with ``U`` re-projected onto the unitary group there.
    """
    a, b = check_config(a), check_config(b, len(a))
    _check_theta(theta)
    n = len(a)
    u = np.asarray(_unitary_of(gate, n), dtype=np.clongdouble)
    dim = 2**n
    # one Newton-Schulz step: float64 unitarity defects would be amplified by 1/theta
    u = u @ (3 * np.eye(dim) - u.conj().T @ u) / 2
    four_pi = np.longdouble(FOUR_PI)
    th = np.longdouble(theta)
    et = np.longdouble(eta) * th
    eye = np.eye(dim, dtype=np.clongdouble)
    p = (1 - et) * eye / dim + et * _product_operator_ld(b, 1, 2)
    q = (1 - 1 / th) / four_pi**n * eye + _product_operator_ld(a, 3, four_pi) / th
    x = u @ p @ u.conj().T
    return float(np.einsum("ij,ji->", x, q).real)


def w_cphase(n: np.ndarray, m: np.ndarray, i: int, j: int, eta: float):
    """Closed-form controlled-phase kernel on qubits ``i``, ``j``; vectorized over leading axes."""
    if i == j:
        raise ValueError("controlled-phase needs two distinct qubits")
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    nq = n.shape[-2]
    if not (0 <= i < nq and 0 <= j < nq):
        raise ValueError("qubit index out of range")
    spect = np.ones(n.shape[:-2])
    for l in range(nq):
        if l not in (i, j):
            spect = spect * (1 + 3 * np.sum(m[..., l, :] * n[..., l, :], axis=-1))
    ni, nj, mi, mj = n[..., i, :], n[..., j, :], m[..., i, :], m[..., j, :]
    cross_i = mi[..., 0] * ni[..., 1] - mi[..., 1] * ni[..., 0]
    cross_j = mj[..., 0] * nj[..., 1] - mj[..., 1] * nj[..., 0]
    perp_i = mi[..., 0] * ni[..., 0] + mi[..., 1] * ni[..., 1]
    perp_j = mj[..., 0] * nj[..., 0] + mj[..., 1] * nj[..., 1]
    core = (
        (1 + 3 * mi[..., 2] * ni[..., 2]) * (1 + 3 * mj[..., 2] * nj[..., 2])
        + 9 * cross_i * cross_j
        + 3 * (mi[..., 2] + 3 * ni[..., 2]) * perp_j
        + 3 * (mj[..., 2] + 3 * nj[..., 2]) * perp_i
    )
    out = (1 - eta + eta * spect * core) / FOUR_PI**nq
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# product unitaries as rotations


def rotation_from_unitary(v: np.ndarray) -> np.ndarray:
    """3x3 rotation ``R`` with ``v^dag sigma_a v = sum_b R_ab sigma_b``."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (2, 2):
        raise ValueError("expected a 2x2 unitary")
    check_unitary(v, tol=1e-10)
    r = np.empty((3, 3))
    for a in range(3):
        conj = v.conj().T @ PAULI[a + 1] @ v
        for b in range(3):
            r[a, b] = 0.5 * np.trace(conj @ PAULI[b + 1]).real
    return r


def rotations_of(gate: Product) -> np.ndarray:
    """Rotation set (N, 3, 3) of a product unitary."""
    return np.stack([rotation_from_unitary(u) for u in gate.unitaries])


def apply_rotations(config: np.ndarray, rotations: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Rotate each top ``n_j -> R_j n_j`` (``R_j^-1 n_j`` if ``inverse``); batched over leading axes."""
    rotations = np.asarray(rotations, dtype=float)
    if inverse:
        rotations = np.swapaxes(rotations, -1, -2)
    return np.einsum("jab,...jb->...ja", rotations, config)


def dephasing_mixture(qubit: int, strength: float, n_qubits: int) -> Mixture:
    """Two-branch z-rotation mixture that damps transverse components by ``1 - strength``."""
    if not 0 <= strength <= 1:
        raise ValueError("dephasing strength must lie in [0, 1]")
    if not 0 <= qubit < n_qubits:
        raise ValueError("qubit index out of range")
    return Mixture(
        (
            (1 - strength / 2, Product.identity(n_qubits)),
            (strength / 2, Product.single(n_qubits, qubit, SZ)),
        )
    )


def combine_mixtures(mixtures) -> Mixture:
    """Mixture equivalent to applying ``mixtures`` in order (branch-wise products)."""
    branches = []
    for combo in itertools.product(*(m.branches for m in mixtures)):
        p = 1.0
        us = [I2] * combo[0][1].n_qubits
        for prob, g in combo:
            p *= prob
            us = [v @ u for u, v in zip(us, g.unitaries)]
        branches.append((p, Product(tuple(us))))
    return Mixture(tuple(branches))


# ---------------------------------------------------------------------------
# batched kernel used for sampling


def transfer_matrix(u: np.ndarray) -> np.ndarray:
    """Pauli transfer matrix ``T[b, c] = 2**-k tr(sigma_b U sigma_c U^dag)``."""
    k = u.shape[0].bit_length() - 1
    cols = []
    for c in itertools.product(range(4), repeat=k):
        sig = PAULI[c[0]]
        for x in c[1:]:
            sig = np.kron(sig, PAULI[x])
        cols.append(pauli_coefficients(u @ sig @ u.conj().T).real.ravel() / 2**k)
    return np.stack(cols, axis=1)


class TransitionKernel:
    """Vectorized ``w_U(a | b)`` for a fixed unitary gate.

    The gate's own qubits enter through the Pauli transfer matrix of its
    unitary; every other qubit contributes the factor ``1 + 3 a_l . b_l``.
    The controlled-phase gate uses its closed form instead.
    """

    def __init__(self, gate: GateOp, n_qubits: int, eta: float):
        if isinstance(gate, Mixture):
            raise TypeError("kernels are defined for unitary gates")
        self.n_qubits = n_qubits
        self.eta = eta
        self.cphase = isinstance(gate, Entangling) and gate.is_cphase()
        if isinstance(gate, Entangling):
            if max(gate.qubits) >= n_qubits:
                raise ValueError("gate qubits out of range")
            self.factors = [(list(gate.qubits), transfer_matrix(gate.unitary))]
            self.qubits = list(gate.qubits)
        else:
            self.factors = [([q], transfer_matrix(u)) for q, u in enumerate(gate.unitaries)]
            self.qubits = list(range(n_qubits))
        self.spectators = [q for q in range(n_qubits) if q not in self.qubits]
        self._gate = gate

    @property
    def bound(self) -> float:
        """``max w_U = (1 - eta + eta 4**N) / (4 pi)**N``."""
        n = self.n_qubits
        return (1 - self.eta + self.eta * 4.0**n) / FOUR_PI**n

    def prepare(self, b: np.ndarray):
        """Precompute the input-dependent part for a batch of inputs ``b`` (P, N, 3)."""
        if self.cphase:
            return b
        return b, [features(b[:, qs, :], 1.0) @ t.T for qs, t in self.factors]

    def t(self, a: np.ndarray, prepared, idx: np.ndarray) -> np.ndarray:
        """``t_U(a_i | b_idx[i])`` for candidates ``a`` (m, N, 3)."""
        b, vecs = prepared
        out = np.ones(len(a))
        for (qs, _), v in zip(self.factors, vecs):
            out *= np.einsum("mk,mk->m", features(a[:, qs, :], 3.0), v[idx])
        for l in self.spectators:
            out *= 1 + 3 * np.einsum("mk,mk->m", a[:, l, :], b[idx, l, :])
        return out / FOUR_PI**self.n_qubits

    def density(self, a: np.ndarray, prepared, idx: np.ndarray) -> np.ndarray:
        """``w_U(a_i | b_idx[i])``."""
        if self.cphase:
            i, j = self._gate.qubits
            return w_cphase(a, prepared[idx], i, j, self.eta)
        n = self.n_qubits
        return (1 - self.eta) / FOUR_PI**n + self.eta * self.t(a, prepared, idx)

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise ``w_U(a[i] | b[i])`` for equal-length batches."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self.density(a, self.prepare(b), np.arange(len(a)))
