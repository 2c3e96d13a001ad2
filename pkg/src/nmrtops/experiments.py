"""Experiment drivers: run a circuit in one mode, decay curves, CSV output."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .circuit import CircuitFile, Readout, parse_circuit, to_program
from .model import analytic_signal_ratio, apply_classical, apply_compiled_mixture, init_ensemble, readout, readout_combination
from .params import DEFAULT_ALPHA, HiddenModelInapplicable, ModelParams, epsilon_from_alpha
from .quantum import (
    Entangling,
    Mixture,
    Product,
    all_pauli_strings,
    apply_gate,
    basis_state,
    compile_circuit,
    expectation_quantum,
    make_pseudopure,
    pauli_label,
)
from .sampler import SeedSpec

MODES = ("quantum", "naive", "hidden", "overall")
CSV_COLUMNS = (
    "gate_index",
    "observable",
    "quantum_value",
    "classical_estimate",
    "classical_stderr",
    "ratio",
    "analytic_ratio",
)
DECAY_COLUMNS = ("mode", "gate_index", "pooled_ratio", "pooled_stderr", "analytic_ratio")
MAX_COMPILED_BRANCHES = 1024


@dataclass(frozen=True)
class RunConfig:
    mode: str = "hidden"
    alpha: float | None = None
    epsilon: float | None = None
    samples: int = 200_000
    seed: int = 0
    out: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.alpha is not None and self.epsilon is not None:
            raise ValueError("set exactly one of alpha and epsilon")
        if self.alpha is None and self.epsilon is None:
            object.__setattr__(self, "alpha", DEFAULT_ALPHA)
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    def params(self, n_qubits: int) -> ModelParams:
        if self.epsilon is not None:
            return ModelParams.from_epsilon(n_qubits, self.epsilon)
        return ModelParams(n_qubits, epsilon_from_alpha(n_qubits, self.alpha), alpha=self.alpha)


@dataclass(frozen=True)
class Row:
    gate_index: int
    observable: str
    quantum_value: float
    classical_estimate: float
    classical_stderr: float
    ratio: float
    analytic_ratio: float


@dataclass(frozen=True)
class Pooled:
    """Least-squares ratio of classical to quantum values over one readout block."""

    gate_index: int
    ratio: float
    stderr: float
    analytic_ratio: float


@dataclass
class ExperimentResult:
    mode: str
    params: ModelParams
    rows: list = field(default_factory=list)
    pooled: list = field(default_factory=list)


def _ratio(c: float, q: float, eps: float) -> float:
    if abs(q) <= 1e-8 * max(eps, 1e-300):
        return float("nan")
    return c / q


def _blocks(program: Sequence) -> list[tuple[int, list[tuple[int, ...]]]]:
    """(number of gates before the block, readouts) for each run of consecutive readouts."""
    out = []
    gates = 0
    for item in program:
        if isinstance(item, Readout):
            if out and out[-1][0] == gates:
                out[-1][1].append(item.betas)
            else:
                out.append((gates, [item.betas]))
        else:
            gates += 1
    return out


def _compiled_branches(gates: Sequence) -> list[tuple[float, Entangling]]:
    """The whole gate list as a mixture of single compiled unitaries."""
    choices = []
    for g in gates:
        choices.append(g.branches if isinstance(g, Mixture) else ((1.0, g),))
    count = int(np.prod([len(c) for c in choices]))
    if count > MAX_COMPILED_BRANCHES:
        raise ValueError(f"overall mode would need {count} compiled branches")
    branches = []
    for combo in itertools.product(*choices):
        p = float(np.prod([x[0] for x in combo]))
        if p > 0:
            branches.append((p, compile_circuit([x[1] for x in combo])))
    return branches


def run_experiment(
    circuit: CircuitFile, cfg: RunConfig, rho1: np.ndarray | None = None, params: ModelParams | None = None
) -> ExperimentResult:
    """Execute ``circuit`` in ``cfg.mode`` and read out every ``measure`` statement.

    ``gate_index`` counts entangling gates applied before the readout.
    ``params`` overrides the parameters derived from ``cfg``.
    """
    n = circuit.n_qubits
    params = cfg.params(n) if params is None else params
    if cfg.mode in ("hidden", "overall") and not params.hidden_applicable:
        raise HiddenModelInapplicable(
            f"We assume that epsilon <= eta^2: epsilon={params.epsilon:g}, eta^2={params.eta ** 2:g}"
        )
    if cfg.mode == "naive" and not params.separable:
        raise HiddenModelInapplicable(f"epsilon={params.epsilon:g} exceeds eta={params.eta:g}")
    rho1 = basis_state("0" * n) if rho1 is None else rho1
    rho = make_pseudopure(n, params.epsilon, rho1)
    program = to_program(circuit)
    gates = [x for x in program if not isinstance(x, Readout)]

    # exact reference after each gate prefix
    quantum_states = [rho]
    for g in gates:
        quantum_states.append(apply_gate(quantum_states[-1], g))
    ent_before = np.cumsum([0] + [isinstance(g, Entangling) for g in gates])

    result = ExperimentResult(cfg.mode, params)
    seed = SeedSpec(cfg.seed)
    classical = {}
    if cfg.mode in ("naive", "hidden"):
        state = init_ensemble(rho, params, cfg.samples, seed, mode=cfg.mode, workers=cfg.workers)
        done = 0
        for n_gates, _ in _blocks(program):
            while done < n_gates:
                state = apply_classical(state, gates[done])
                done += 1
            classical[n_gates] = state
    elif cfg.mode == "overall":
        base = init_ensemble(rho, params, cfg.samples, seed, mode="hidden", workers=cfg.workers)
        for n_gates, _ in _blocks(program):
            if n_gates == 0:
                classical[0] = base
            else:
                classical[n_gates] = apply_compiled_mixture(base, _compiled_branches(gates[:n_gates]))

    for n_gates, block in _blocks(program):
        g_idx = int(ent_before[n_gates])
        q_vals = [expectation_quantum(quantum_states[n_gates], b) for b in block]
        analytic = analytic_signal_ratio(g_idx, params, cfg.mode)
        if cfg.mode == "overall" and n_gates > 0:
            analytic = 1.0
        for betas, q in zip(block, q_vals):
            if cfg.mode == "quantum":
                c, se = q, 0.0
            else:
                c, se = readout(classical[n_gates], betas)
            result.rows.append(Row(g_idx, pauli_label(betas), q, c, se, _ratio(c, q, params.epsilon), analytic))
        ss = float(np.dot(q_vals, q_vals))
        if ss <= (1e-8 * params.epsilon) ** 2:
            pr, pse = float("nan"), float("nan")
        elif cfg.mode == "quantum":
            pr, pse = 1.0, 0.0
        else:
            weights = {}
            for b, q in zip(block, q_vals):
                weights[b] = weights.get(b, 0.0) + q
            m, s = readout_combination(classical[n_gates], weights)
            pr, pse = m / ss, s / ss
        result.pooled.append(Pooled(g_idx, pr, pse, analytic))
    return result


def format_float(x: float) -> str:
    return "%.17g" % x


def write_csv(rows: Iterable, columns: Sequence[str], out=None) -> str:
    """Render dataclass rows as CSV (17 significant digits); also write to ``out`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_float(v) if isinstance(v, float) else str(v) for v in (getattr(r, c) for c in columns)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def experiment_csv(result: ExperimentResult, out=None) -> str:
    return write_csv(result.rows, CSV_COLUMNS, out)


# ---------------------------------------------------------------------------
# named circuits and the standard chain


def named_circuit(name: str) -> CircuitFile:
    """Bundled circuits: ``teleport``, ``ghz``, ``epr``."""
    text = resources.files("nmrtops").joinpath("circuits").joinpath(f"{name}.circ").read_text(encoding="utf-8")
    return parse_circuit(text)


def chain_text(n_qubits: int, gate_count: int, seed: int = 0, observables: Sequence | None = None) -> str:
    """Alternating random product rotations and controlled-phase gates, read out after each step."""
    if n_qubits < 2:
        raise ValueError("an entangling chain needs at least 2 qubits")
    if gate_count < 0:
        raise ValueError("gate_count must be >= 0")
    rng = SeedSpec(seed).stream("chain", n_qubits, gate_count)
    pairs = list(itertools.combinations(range(n_qubits), 2))
    obs = all_pauli_strings(n_qubits) if observables is None else observables
    lines = [f"qubits {n_qubits}"]

    def rotate_and_measure():
        for q in range(n_qubits):
            a, b, c = (float(x) for x in rng.uniform(0, 2 * np.pi, size=3))
            lines.extend([f"rz {q} {a!r}", f"ry {q} {b!r}", f"rz {q} {c!r}"])
        lines.extend(f"measure {pauli_label(b)}" for b in obs)

    rotate_and_measure()
    for g in range(gate_count):
        i, j = pairs[g % len(pairs)]
        lines.append(f"cphase {i} {j}")
        rotate_and_measure()
    return "\n".join(lines) + "\n"


def chain_circuit(n_qubits: int, gate_count: int, seed: int = 0) -> CircuitFile:
    return parse_circuit(chain_text(n_qubits, gate_count, seed))


@dataclass(frozen=True)
class DecayRow:
    mode: str
    gate_index: int
    pooled_ratio: float
    pooled_stderr: float
    analytic_ratio: float


def decay_curve(
    n_qubits: int, gate_count: int, cfg: RunConfig, modes: Sequence[str] = MODES
) -> tuple[list[DecayRow], dict[str, ExperimentResult]]:
    """Ratio-vs-gate-count table for the standard chain in each mode."""
    if gate_count < 1:
        raise ValueError("gate_count must be >= 1")
    circuit = chain_circuit(n_qubits, gate_count, cfg.seed)
    rows = []
    results = {}
    for mode in modes:
        res = run_experiment(circuit, RunConfig(mode, cfg.alpha, cfg.epsilon, cfg.samples, cfg.seed, None, cfg.workers))
        results[mode] = res
        rows += [DecayRow(mode, p.gate_index, p.ratio, p.stderr, p.analytic_ratio) for p in res.pooled]
    return rows, results


def decay_csv(rows: Sequence[DecayRow], out=None) -> str:
    return write_csv(rows, DECAY_COLUMNS, out)
