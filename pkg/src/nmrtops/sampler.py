"""Seeded random streams, uniform sampling on (S^2)^N and rejection sampling."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ACCEPTANCE_FLOOR = 1e-4
# proposals seen before the acceptance floor is enforced
_FLOOR_MIN_PROPOSALS = 100_000
# relative slack on the analytic bound, for round-off in density evaluation
_BOUND_SLACK = 1e-9

# particles per independently seeded chunk; the unit of parallel work
CHUNK = 4096


class BoundViolation(RuntimeError):
    """A density exceeded its analytic upper bound (or went negative)."""


class AcceptanceTooLow(RuntimeError):
    """Rejection sampling accepted less than ``ACCEPTANCE_FLOOR`` of proposals."""


def _label_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be nonnegative")
        return int(label)
    return zlib.crc32(str(label).encode())


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus derivation labels; streams depend only on these values."""

    master_seed: int
    labels: tuple = ()

    def child(self, *labels) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.labels + tuple(labels))

    def stream(self, *labels) -> np.random.Generator:
        key = tuple(_label_int(x) for x in self.labels + tuple(labels))
        ss = np.random.SeedSequence(self.master_seed & (2**64 - 1), spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))


def uniform_sphere(rng: np.random.Generator, n_qubits: int, size: int) -> np.ndarray:
    """``size`` configurations of ``n_qubits`` independent uniform unit vectors."""
    z = rng.uniform(-1.0, 1.0, size=(size, n_qubits))
    phi = rng.uniform(0.0, 2 * np.pi, size=(size, n_qubits))
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def uniform_sphere_config(n_qubits: int, stream: np.random.Generator) -> np.ndarray:
    return uniform_sphere(stream, n_qubits, 1)[0]


@dataclass
class RejectionStats:
    proposed: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def merge(self, other: "RejectionStats") -> None:
        self.proposed += other.proposed
        self.accepted += other.accepted


def rejection_sample(
    density: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bound: float,
    stream: np.random.Generator,
    n_qubits: int,
    size: int,
    stats: RejectionStats | None = None,
) -> np.ndarray:
    """Draw ``size`` configurations, the i-th from a density proportional to ``density(., i)``.

    ``density(cands, idx)`` evaluates the target at candidate configs ``cands``
    (shape (m, N, 3)) for targets ``idx`` (shape (m,)); unconditional targets
    may ignore ``idx``. Proposals are uniform on (S^2)^N and accepted with
    probability ``density / bound``. Any value above ``bound`` or below zero
    raises :class:`BoundViolation`.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    stats = RejectionStats() if stats is None else stats
    out = np.empty((size, n_qubits, 3))
    pending = np.arange(size)
    local = RejectionStats()
    while pending.size:
        cands = uniform_sphere(stream, n_qubits, pending.size)
        u = stream.uniform(size=pending.size)
        vals = np.asarray(density(cands, pending), dtype=float)
        if vals.max() > bound * (1 + _BOUND_SLACK):
            raise BoundViolation(f"density {vals.max():.17g} exceeds bound {bound:.17g}")
        if vals.min() < -bound * _BOUND_SLACK:
            raise BoundViolation(f"density is negative ({vals.min():.3g})")
        ok = u * bound < vals
        out[pending[ok]] = cands[ok]
        local.proposed += pending.size
        local.accepted += int(ok.sum())
        pending = pending[~ok]
        if local.proposed >= _FLOOR_MIN_PROPOSALS and local.acceptance_rate < ACCEPTANCE_FLOOR:
            raise AcceptanceTooLow(f"acceptance rate {local.acceptance_rate:.2e}; bound misconfigured")
    stats.merge(local)
    return out


def mc_mean_stderr(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and ``s / sqrt(n)`` with the unbiased sample deviation ``s``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def chunk_bounds(total: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def map_chunks(fn: Callable[[int, int, int], object], total: int, workers: int = 1) -> list:
    """Run ``fn(chunk_index, start, stop)`` over all chunks; results in chunk order.

    Each chunk seeds its own stream from its index, so the output does not
    depend on ``workers``.
    """
    bounds = chunk_bounds(total)
    if workers <= 1 or len(bounds) == 1:
        return [fn(i, s, e) for i, (s, e) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, s, e) for i, (s, e) in enumerate(bounds)]
        return [f.result() for f in futures]
