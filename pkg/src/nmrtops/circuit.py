"""Line-oriented circuit format.

::

    qubits 3
    h 0                  # single-qubit gates: h x y z, rx/ry/rz q angle
    cnot 0 1             # entangling: cnot, cphase, unitary q1 q2 ... file=PATH
    dephase 0 1.0        # z-dephasing of qubit 0 with strength 1
    compile {            # one entangling gate from the enclosed unitaries
      cnot 1 2
      cphase 0 2
    }
    measure 003          # Pauli string, one digit per qubit

Consecutive single-qubit statements become one product gate and
consecutive ``dephase`` statements one mixture.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import polar

from .kernels import combine_mixtures, dephasing_mixture
from .quantum import (
    CNOT,
    CPHASE,
    H,
    I2,
    MAX_QUBITS,
    SX,
    SY,
    SZ,
    Entangling,
    GateOp,
    Mixture,
    Product,
    check_pauli,
    compile_circuit,
    pauli_label,
    rx,
    ry,
    rz,
)

SINGLE = {"h": H, "x": SX, "y": SY, "z": SZ}
ROTATIONS = {"rx": rx, "ry": ry, "rz": rz}
TWO_QUBIT = {"cphase": CPHASE, "cnot": CNOT}
UNITARY_TOL = 1e-10


class ParseError(ValueError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Statement:
    op: str
    qubits: tuple = ()
    value: float | None = None
    betas: tuple | None = None
    path: str | None = None
    matrix: tuple | None = None
    body: tuple = ()
    line: int = field(default=0, compare=False)

    def unitary(self) -> np.ndarray:
        if self.op in SINGLE:
            return SINGLE[self.op]
        if self.op in ROTATIONS:
            return ROTATIONS[self.op](self.value)
        if self.op in TWO_QUBIT:
            return TWO_QUBIT[self.op]
        if self.op == "unitary":
            return np.array(self.matrix, dtype=complex)
        raise ValueError(f"{self.op} is not a unitary statement")

    @property
    def single_qubit(self) -> bool:
        return self.op in SINGLE or self.op in ROTATIONS or (self.op == "unitary" and len(self.qubits) == 1)


@dataclass(frozen=True)
class CircuitFile:
    n_qubits: int
    statements: tuple


class Readout(NamedTuple):
    betas: tuple


# ---------------------------------------------------------------------------
# parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(text: str) -> float:
    """Numbers, ``pi`` and + - * / only."""

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    return ev(ast.parse(text, mode="eval").body)


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _load_matrix(path: Path, k: int) -> np.ndarray:
    nums = [float(x) for x in path.read_text().split()]
    dim = 2**k
    if len(nums) != 2 * dim * dim:
        raise ValueError(f"expected {2 * dim * dim} numbers for a {dim}x{dim} complex matrix, got {len(nums)}")
    arr = np.array(nums).reshape(dim, dim, 2)
    return arr[..., 0] + 1j * arr[..., 1]


class _Parser:
    def __init__(self, text: str, base_dir: Path | None):
        self.lines = text.splitlines()
        self.base_dir = base_dir or Path.cwd()
        self.n: int | None = None

    def qubit(self, tok, lineno) -> int:
        text, col = tok
        if not re.fullmatch(r"\d+", text):
            raise ParseError(lineno, col, f"expected a qubit index, got {text!r}")
        q = int(text)
        if q >= self.n:
            raise ParseError(lineno, col, f"qubit {q} out of range for {self.n} qubits")
        return q

    def number(self, tok, lineno) -> float:
        text, col = tok
        try:
            return _eval_angle(text)
        except (ValueError, SyntaxError, ZeroDivisionError):
            raise ParseError(lineno, col, f"expected a number, got {text!r}") from None

    def arity(self, toks, lineno, count):
        if len(toks) - 1 != count:
            col = toks[min(len(toks) - 1, count + 1)][1] if len(toks) > count + 1 else toks[-1][1] + len(toks[-1][0])
            raise ParseError(lineno, col, f"{toks[0][0]} takes {count} argument(s), got {len(toks) - 1}")

    def distinct(self, qs, toks, lineno):
        if len(set(qs)) != len(qs):
            raise ParseError(lineno, toks[1][1], "qubit indices must be distinct")

    def statement(self, toks, lineno) -> Statement:
        op, col = toks[0]
        if op in SINGLE:
            self.arity(toks, lineno, 1)
            return Statement(op, (self.qubit(toks[1], lineno),), line=lineno)
        if op in ROTATIONS:
            self.arity(toks, lineno, 2)
            return Statement(op, (self.qubit(toks[1], lineno),), value=self.number(toks[2], lineno), line=lineno)
        if op in TWO_QUBIT:
            self.arity(toks, lineno, 2)
            qs = (self.qubit(toks[1], lineno), self.qubit(toks[2], lineno))
            self.distinct(qs, toks, lineno)
            return Statement(op, qs, line=lineno)
        if op == "dephase":
            self.arity(toks, lineno, 2)
            s = self.number(toks[2], lineno)
            if not 0 <= s <= 1:
                raise ParseError(lineno, toks[2][1], "dephasing strength must lie in [0, 1]")
            return Statement(op, (self.qubit(toks[1], lineno),), value=s, line=lineno)
        if op == "unitary":
            return self.unitary(toks, lineno)
        if op == "measure":
            self.arity(toks, lineno, 1)
            text, c = toks[1]
            if not re.fullmatch(r"[0-3]+", text) or len(text) != self.n:
                raise ParseError(lineno, c, f"measure needs {self.n} digits in 0-3, got {text!r}")
            betas = tuple(int(x) for x in text)
            if not any(betas):
                raise ParseError(lineno, c, "all-identity measurement is not an observable")
            return Statement(op, betas=betas, line=lineno)
        raise ParseError(lineno, col, f"unknown statement {op!r}")

    def unitary(self, toks, lineno) -> Statement:
        if len(toks) < 3 or not toks[-1][0].startswith("file="):
            raise ParseError(lineno, toks[0][1], "usage: unitary q1 [q2 ...] file=PATH")
        qs = tuple(self.qubit(t, lineno) for t in toks[1:-1])
        self.distinct(qs, toks, lineno)
        path_text, pcol = toks[-1]
        path_text = path_text[len("file="):]
        path = Path(path_text)
        if not path.is_absolute():
            path = self.base_dir / path
        try:
            u = _load_matrix(path, len(qs))
        except (OSError, ValueError) as exc:
            raise ParseError(lineno, pcol, f"cannot read matrix: {exc}") from None
        dev = np.abs(u.conj().T @ u - np.eye(len(u))).max()
        if dev > UNITARY_TOL:
            raise ParseError(lineno, pcol, f"matrix is not unitary (deviation {dev:.3g})")
        u = polar(u)[0]
        return Statement(
            "unitary", qs, path=path_text, matrix=tuple(tuple(complex(x) for x in row) for row in u), line=lineno
        )

    def parse(self) -> CircuitFile:
        out: list[Statement] = []
        block: list[Statement] | None = None
        block_line = 0
        for lineno, raw in enumerate(self.lines, start=1):
            toks = _tokens(raw.split("#", 1)[0])
            if not toks:
                continue
            op, col = toks[0]
            if self.n is None:
                if op != "qubits":
                    raise ParseError(lineno, col, "first statement must be 'qubits N'")
                self.arity(toks, lineno, 1)
                text, c = toks[1]
                if not re.fullmatch(r"\d+", text) or not 1 <= int(text) <= MAX_QUBITS:
                    raise ParseError(lineno, c, f"qubit count must be an integer in 1..{MAX_QUBITS}")
                self.n = int(text)
                continue
            if op == "qubits":
                raise ParseError(lineno, col, "duplicate 'qubits' statement")
            if op == "compile":
                if block is not None:
                    raise ParseError(lineno, col, "compile blocks cannot be nested")
                if len(toks) != 2 or toks[1][0] != "{":
                    raise ParseError(lineno, col, "usage: 'compile {' on its own line")
                block, block_line = [], lineno
                continue
            if op == "}":
                if block is None or len(toks) != 1:
                    raise ParseError(lineno, col, "unmatched '}'")
                if not block:
                    raise ParseError(lineno, col, "empty compile block")
                out.append(Statement("compile", body=tuple(block), line=block_line))
                block = None
                continue
            stmt = self.statement(toks, lineno)
            if block is not None:
                if stmt.op in ("measure", "dephase"):
                    raise ParseError(lineno, col, f"{stmt.op} is not allowed inside a compile block")
                block.append(stmt)
            else:
                out.append(stmt)
        if self.n is None:
            raise ParseError(max(len(self.lines), 1), 1, "missing 'qubits N' statement")
        if block is not None:
            raise ParseError(block_line, 1, "unterminated compile block")
        return CircuitFile(self.n, tuple(out))


def parse_circuit(text: str, base_dir: str | Path | None = None) -> CircuitFile:
    """Parse circuit text; relative ``file=`` paths resolve against ``base_dir``."""
    return _Parser(text, Path(base_dir) if base_dir is not None else None).parse()


def load_circuit(path: str | Path) -> CircuitFile:
    path = Path(path)
    return parse_circuit(path.read_text(encoding="utf-8"), path.parent)


def _format_statement(s: Statement) -> list[str]:
    if s.op == "compile":
        return ["compile {"] + ["  " + line for b in s.body for line in _format_statement(b)] + ["}"]
    if s.op == "measure":
        return [f"measure {pauli_label(s.betas)}"]
    args = [str(q) for q in s.qubits]
    if s.value is not None:
        args.append(repr(s.value))
    if s.op == "unitary":
        args.append(f"file={s.path}")
    return [" ".join([s.op] + args)]


def format_circuit(circuit: CircuitFile) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    for s in circuit.statements:
        lines.extend(_format_statement(s))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# lowering to gates


def _statement_gate(s: Statement, n: int) -> GateOp:
    if s.single_qubit:
        return Product.single(n, s.qubits[0], s.unitary())
    if s.op == "compile":
        return compile_circuit([_statement_gate(b, n) for b in s.body])
    return Entangling(s.qubits, s.unitary(), s.op)


def to_program(circuit: CircuitFile) -> list:
    """Lower statements to a list of ``GateOp`` and :class:`Readout` items."""
    n = circuit.n_qubits
    program: list = []
    product: list | None = None
    mixtures: list[Mixture] = []

    def flush():
        nonlocal product, mixtures
        if product is not None:
            program.append(Product(tuple(product)))
            product = None
        if mixtures:
            program.append(mixtures[0] if len(mixtures) == 1 else combine_mixtures(mixtures))
            mixtures = []

    for s in circuit.statements:
        if s.single_qubit:
            if mixtures:
                flush()
            if product is None:
                product = [I2] * n
            q = s.qubits[0]
            product[q] = s.unitary() @ product[q]
            continue
        if s.op == "dephase":
            if product is not None:
                flush()
            mixtures.append(dephasing_mixture(s.qubits[0], s.value, n))
            continue
        flush()
        if s.op == "measure":
            program.append(Readout(check_pauli(s.betas, n)))
        else:
            program.append(_statement_gate(s, n))
    flush()
    return program


def gates_of(program: Sequence) -> list[GateOp]:
    return [x for x in program if not isinstance(x, Readout)]
