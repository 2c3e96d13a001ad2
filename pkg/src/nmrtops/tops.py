"""Classical-tops representation of N-qubit operators.

A spin configuration is an array of shape ``(N, 3)`` (one unit vector per
qubit); batches of configurations have shape ``(..., N, 3)``. All densities
are per unit solid-angle product, i.e. they include the ``(4 pi)**-N``
normalization, so the uniform distribution has density ``(4 pi)**-N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np

from .params import ModelParams, theta_schedule
from .quantum import PAULI, maximally_mixed, n_qubits_of, pauli_coefficients

FOUR_PI = 4 * np.pi
NORM_TOL = 1e-12


def check_config(n: np.ndarray, n_qubits: int | None = None) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.ndim < 2 or n.shape[-1] != 3:
        raise ValueError(f"spin configuration must have shape (..., N, 3), got {n.shape}")
    if n_qubits is not None and n.shape[-2] != n_qubits:
        raise ValueError(f"configuration has {n.shape[-2]} spins, expected {n_qubits}")
    if np.abs(np.linalg.norm(n, axis=-1) - 1).max(initial=0) > NORM_TOL:
        raise ValueError("spin vectors must have unit norm")
    return n


def _check_theta(theta: float) -> None:
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")


def _spin_operator(v: np.ndarray, scale: float) -> np.ndarray:
    return PAULI[0] + scale * (v[0] * PAULI[1] + v[1] * PAULI[2] + v[2] * PAULI[3])


# ---------------------------------------------------------------------------
# operators


def p1_operator(n: np.ndarray) -> np.ndarray:
    """Pure product state ``2**-N (I + n_1.sigma) x ... x (I + n_N.sigma)``."""
    n = check_config(n)
    return reduce(np.kron, [_spin_operator(v, 1.0) / 2 for v in n])


def q1_operator(n: np.ndarray) -> np.ndarray:
    """Dual operator ``(4 pi)**-N (I + 3 n_1.sigma) x ... x (I + 3 n_N.sigma)``."""
    n = check_config(n)
    return reduce(np.kron, [_spin_operator(v, 3.0) / FOUR_PI for v in n])


def q1_min_eigenvalue(n_qubits: int) -> float:
    """Smallest eigenvalue of any ``Q1``: ``-2**(2N-1) / (4 pi)**N``."""
    return -(2.0 ** (2 * n_qubits - 1)) / FOUR_PI**n_qubits


def p_theta(n: np.ndarray, theta: float) -> np.ndarray:
    """``(1 - theta) M + theta P1(n)``."""
    _check_theta(theta)
    p1 = p1_operator(n)
    return (1 - theta) * maximally_mixed(len(n)) + theta * p1


def q_theta(n: np.ndarray, theta: float) -> np.ndarray:
    """``(1 - 1/theta) (4 pi)**-N I + Q1(n) / theta``."""
    _check_theta(theta)
    q1 = q1_operator(n)
    dim = q1.shape[0]
    return (1 - 1 / theta) / FOUR_PI ** len(n) * np.eye(dim) + q1 / theta


# ---------------------------------------------------------------------------
# expansion coefficients


def w_rho(rho: np.ndarray, n: np.ndarray) -> float:
    """``tr(rho Q1(n))`` by direct matrix trace."""
    return float(np.einsum("ij,ji->", rho, q1_operator(n)).real)


def w_k_rho(rho: np.ndarray, a: np.ndarray, k: int, params: ModelParams) -> float:
    """``tr(rho Q_{eta_k}(a))`` by direct matrix trace."""
    eta_k = theta_schedule(k, params)
    return float(np.einsum("ij,ji->", rho, q_theta(a, eta_k)).real)


def w_k_from_w(w: float | np.ndarray, eta_k: float, n_qubits: int):
    """Affine map ``w -> (1 - 1/eta_k) (4 pi)**-N + w / eta_k``."""
    return (1 - 1 / eta_k) / FOUR_PI**n_qubits + w / eta_k


def features(configs: np.ndarray, scale: float) -> np.ndarray:
    """Monomials ``prod_j c(b_j)`` for all ``4**N`` Pauli strings.

    ``c(0) = 1`` and ``c(b) = scale * (n_j)_b``; the last axis enumerates Pauli
    strings in the same (C) order as ``pauli_coefficients(...).ravel()``.
    """
    configs = np.asarray(configs, dtype=float)
    lead = configs.shape[:-2]
    n = configs.shape[-2]
    ones = np.ones(lead + (n, 1))
    per = np.concatenate([ones, scale * configs], axis=-1)  # (..., N, 4)
    out = per[..., 0, :]
    for j in range(1, n):
        out = (out[..., :, None] * per[..., j, None, :]).reshape(lead + (-1,))
    return out


@dataclass(frozen=True)
class DensityBackedW:
    """Vectorized ``w^rho``: closure over a stored density operator.

    Evaluates ``(4 pi)**-N sum_b tr(rho sigma_b) 3**|b| n^b`` for batches of
    configurations; the pointwise trace ``w_rho`` is the independent check.
    """

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_coef", pauli_coefficients(self.rho).real.ravel())

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.rho)

    def __call__(self, configs: np.ndarray) -> np.ndarray:
        n = self.n_qubits
        return features(configs, 3.0) @ self._coef / FOUR_PI**n

    def counter(self, configs: np.ndarray, eta_k: float) -> np.ndarray:
        """``w_k^rho`` for the counter schedule value ``eta_k``."""
        return w_k_from_w(self(configs), eta_k, self.n_qubits)


def w_rho_function(rho: np.ndarray) -> DensityBackedW:
    return DensityBackedW(np.asarray(rho, dtype=complex))


def classical_expectation_identity(n: np.ndarray, betas) -> float | np.ndarray:
    """``(n_1)_{b_1} ... (n_N)_{b_N}`` with component 0 read as 1; vectorized over leading axes."""
    n = np.asarray(n, dtype=float)
    out = np.ones(n.shape[:-2])
    for j, b in enumerate(betas):
        if b:
            out = out * n[..., j, b - 1]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# quadrature over (S^2)^N


@dataclass(frozen=True)
class Grid:
    """Product rule: Gauss-Legendre in cos(theta) times uniform in phi, per sphere."""

    n_cos: int = 64
    n_phi: int = 64


@dataclass(frozen=True)
class MonteCarlo:
    """Uniform Monte Carlo over (S^2)^N."""

    samples: int
    seed: int = 0
    batch: int = 100_000


def sphere_grid(n_cos: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Points (P, 3) and weights (P,) on S^2 summing to 4 pi."""
    x, wx = np.polynomial.legendre.leggauss(n_cos)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1 - x**2)
    pts = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(x, np.ones(n_phi))], axis=-1
    ).reshape(-1, 3)
    w = np.outer(wx, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    return pts, w


def product_grid(n_qubits: int, n_cos: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """All grid points of (S^2)^N as configs (P**N, N, 3) with product weights."""
    pts, w = sphere_grid(n_cos, n_phi)
    m = len(w)
    idx = np.indices((m,) * n_qubits).reshape(n_qubits, -1).T
    return pts[idx], np.prod(w[idx], axis=1)


def integrate(f: Callable[[np.ndarray], np.ndarray], n_qubits: int, quad) -> tuple[np.ndarray, np.ndarray]:
    """Integral of ``f`` over (S^2)^N and its standard error (zero for grids).

    ``f`` maps configs of shape (B, N, 3) to values of shape (B, ...).
    """
    if isinstance(quad, Grid):
        if quad.n_cos <= 0 or quad.n_phi <= 0:
            raise ValueError("quadrature budget must be positive")
        cfg, w = product_grid(n_qubits, quad.n_cos, quad.n_phi)
        vals = f(cfg)
        total = np.tensordot(w, vals, axes=(0, 0))
        return total, np.zeros_like(total, dtype=float)
    if isinstance(quad, MonteCarlo):
        from .sampler import SeedSpec, uniform_sphere

        if quad.samples < 2:
            raise ValueError("quadrature budget must be at least 2 samples")
        rng = SeedSpec(quad.seed).stream("quadrature")
        vol = FOUR_PI**n_qubits
        s1 = s2 = 0.0
        done = 0
        while done < quad.samples:
            b = min(quad.batch, quad.samples - done)
            vals = vol * f(uniform_sphere(rng, n_qubits, b))
            s1 = s1 + vals.sum(axis=0)
            s2 = s2 + (np.abs(vals) ** 2).sum(axis=0)
            done += b
        mean = s1 / done
        var = (s2 - done * np.abs(mean) ** 2) / (done - 1)
        return mean, np.sqrt(np.maximum(var, 0) / done)
    raise TypeError(f"unknown quadrature rule {quad!r}")


def _batched_p1(configs: np.ndarray) -> np.ndarray:
    """``P1`` for a batch of configs: (B, N, 3) -> (B, 2**N, 2**N)."""
    ops = None
    for j in range(configs.shape[1]):
        v = configs[:, j]
        single = 0.5 * (
            PAULI[0][None] + np.einsum("bk,kij->bij", v, np.stack(PAULI[1:]))
        )
        ops = single if ops is None else np.einsum("bij,bkl->bikjl", ops, single).reshape(
            len(v), ops.shape[1] * 2, ops.shape[2] * 2
        )
    return ops


def reconstruct_rho(
    w: Callable[[np.ndarray], np.ndarray],
    n_qubits: int,
    theta: float,
    quad,
    return_stderr: bool = False,
):
    """``integral dOmega w(n) P_theta(n)`` by the given quadrature.

    ``w`` must be vectorized over a leading batch axis. With ``return_stderr``
    the entrywise Monte Carlo standard errors are returned as well.
    """
    _check_theta(theta)
    dim = 2**n_qubits
    mixed = np.eye(dim) / dim

    def integrand(cfg):
        vals = np.asarray(w(cfg), dtype=float)
        return vals[:, None, None] * ((1 - theta) * mixed[None] + theta * _batched_p1(cfg))

    rho, se = integrate(integrand, n_qubits, quad)
    return (rho, se) if return_stderr else rho


def mixing_reconstruction(rho: np.ndarray, theta: float, eta_k: float) -> np.ndarray:
    """Closed form of ``integral dOmega w_k^rho(b) P_theta(b)`` = ``rho_{theta/eta_k}``.

    Obtained from ``integral w^rho P1 = rho`` and ``integral w^rho = tr rho``.
    Used for the bracketed term of the kernel-integral identity.
    """
    c = theta / eta_k
    return (1 - c) * maximally_mixed(n_qubits_of(rho)) + c * rho


# ---------------------------------------------------------------------------
# single-qubit marginals (sample-backed vs density-backed)


def z_marginal_density(rho: np.ndarray, qubit: int, z: np.ndarray) -> np.ndarray:
    """Density of ``(n_qubit)_3`` on [-1, 1] under ``w^rho``: ``(1 + 3 r_3 z) / 2``."""
    n = n_qubits_of(rho)
    betas = [0] * n
    betas[qubit] = 3
    r3 = pauli_coefficients(rho).real[tuple(betas)]
    return (1 + 3 * r3 * np.asarray(z)) / 2


def z_histogram(configs: np.ndarray, qubit: int, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Sample-backed counterpart of :func:`z_marginal_density` (normalized histogram)."""
    return np.histogram(configs[:, qubit, 2], bins=bins, range=(-1, 1), density=True)
