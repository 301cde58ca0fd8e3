"""Gate-level intermediate representation.

Gates carry fixed, global-phase-inclusive semantics (see ``hamforge.sim``):

    rz(t)      = exp(-i t Z / 2)        (rx, ry analogous)
    czpow(a)   = diag(1, 1, 1, exp(i pi a))
    heis(a)    = exp(-i a (XX + YY + ZZ))

A circuit additionally records a global phase and the set of ancilla qubits
that are promised to start and end in |0>.  Measurements leave the measured
qubit in the computational basis state matching the outcome; ``measx`` is an
H followed by a Z-basis measurement.

Text format, one statement per line::

    qubits 3
    clbits 1
    phase 0.5            # optional, only written when non-zero
    ancillas 2           # optional
    h 0
    rz 0.25 1
    cnot 0 1
    heis 0.1 0 1
    measx 2 -> 0
    cz_ifc 0 ? 0 1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

ONE_QUBIT_FIXED = frozenset({"h", "x", "z", "s", "sdg", "t", "tdg"})
ROTATIONS = frozenset({"rx", "ry", "rz"})
TWO_QUBIT_FIXED = frozenset({"cnot", "cz", "swap"})
TWO_QUBIT_PARAM = frozenset({"czpow", "heis"})
MEASUREMENTS = frozenset({"measz", "measx"})
CONDITIONAL_1Q = frozenset({"x_ifc", "z_ifc"})
CONDITIONAL_2Q = frozenset({"cz_ifc"})
MACROS = frozenset({"czpow", "heis"})

KINDS = (ONE_QUBIT_FIXED | ROTATIONS | TWO_QUBIT_FIXED | TWO_QUBIT_PARAM
         | MEASUREMENTS | CONDITIONAL_1Q | CONDITIONAL_2Q)
PARAMETERIZED = ROTATIONS | TWO_QUBIT_PARAM
CONDITIONAL = CONDITIONAL_1Q | CONDITIONAL_2Q
CLIFFORD_1Q = frozenset({"h", "x", "z", "s", "sdg"})


class CircuitError(ValueError):
    """Invalid gate or circuit construction."""


class CircuitParseError(CircuitError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _arity(kind: str) -> int:
    if kind in TWO_QUBIT_FIXED or kind in TWO_QUBIT_PARAM or kind in CONDITIONAL_2Q:
        return 2
    return 1


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    clbit: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != _arity(self.kind):
            raise CircuitError(f"{self.kind} acts on {_arity(self.kind)} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if self.kind in PARAMETERIZED:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{self.kind} needs a finite angle, got {self.angle}")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{self.kind} takes no angle")
        needs_clbit = self.kind in MEASUREMENTS or self.kind in CONDITIONAL
        if needs_clbit and (self.clbit is None or self.clbit < 0):
            raise CircuitError(f"{self.kind} needs a classical bit")
        if not needs_clbit and self.clbit is not None:
            raise CircuitError(f"{self.kind} takes no classical bit")

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def __str__(self) -> str:
        return format_gate(self)


# Short constructors, used throughout the synthesis code.
def H(q): return Gate("h", (q,))
def X(q): return Gate("x", (q,))
def Z(q): return Gate("z", (q,))
def S(q): return Gate("s", (q,))
def Sdg(q): return Gate("sdg", (q,))
def T(q): return Gate("t", (q,))
def Tdg(q): return Gate("tdg", (q,))
def Rx(theta, q): return Gate("rx", (q,), theta)
def Ry(theta, q): return Gate("ry", (q,), theta)
def Rz(theta, q): return Gate("rz", (q,), theta)
def CNOT(c, t): return Gate("cnot", (c, t))
def CZ(a, b): return Gate("cz", (a, b))
def CZPow(a, q1, q2): return Gate("czpow", (q1, q2), a)
def Swap(a, b): return Gate("swap", (a, b))
def Heis(a, q1, q2): return Gate("heis", (q1, q2), a)
def MeasZ(q, c): return Gate("measz", (q,), clbit=c)
def MeasX(q, c): return Gate("measx", (q,), clbit=c)
def X_ifc(c, q): return Gate("x_ifc", (q,), clbit=c)
def Z_ifc(c, q): return Gate("z_ifc", (q,), clbit=c)
def CZ_ifc(c, a, b): return Gate("cz_ifc", (a, b), clbit=c)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[Gate, ...] = ()
    num_clbits: int = 0
    global_phase: float = 0.0
    ancillas: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "ancillas", tuple(sorted(set(self.ancillas))))
        if self.num_qubits < 0 or self.num_clbits < 0:
            raise CircuitError("register sizes must be non-negative")
        if not math.isfinite(self.global_phase):
            raise CircuitError("global phase must be finite")
        for a in self.ancillas:
            if not 0 <= a < self.num_qubits:
                raise CircuitError(f"ancilla {a} out of range")
        written: set[int] = set()
        for g in self.ops:
            for q in g.qubits:
                if q >= self.num_qubits:
                    raise CircuitError(f"qubit {q} out of range in {g}")
            if g.clbit is not None:
                if g.clbit >= self.num_clbits:
                    raise CircuitError(f"clbit {g.clbit} out of range in {g}")
                if g.kind in MEASUREMENTS:
                    written.add(g.clbit)
                elif g.clbit not in written:
                    raise CircuitError(f"{g} reads clbit {g.clbit} before any measurement writes it")

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __add__(self, other: Circuit) -> Circuit:
        return concat([self, other])

    def repeat(self, times: int) -> Circuit:
        return concat([self] * times) if times > 0 else self.with_ops(())

    def with_ops(self, ops: Iterable[Gate], global_phase: float | None = None) -> Circuit:
        return Circuit(self.num_qubits, tuple(ops), self.num_clbits,
                       self.global_phase if global_phase is None else global_phase,
                       self.ancillas)

    @property
    def has_measurements(self) -> bool:
        return any(g.kind in MEASUREMENTS for g in self.ops)


def concat(circuits: Sequence[Circuit]) -> Circuit:
    if not circuits:
        raise CircuitError("nothing to concatenate")
    ops: list[Gate] = []
    for c in circuits:
        ops.extend(c.ops)
    return Circuit(
        max(c.num_qubits for c in circuits),
        ops,
        max(c.num_clbits for c in circuits),
        sum(c.global_phase for c in circuits),
        tuple(a for c in circuits for a in c.ancillas),
    )


@dataclass(frozen=True)
class ResourceReport:
    cnot_count: int = 0
    t_count: int = 0
    rz_count: int = 0
    single_qubit_clifford_count: int = 0
    measurement_count: int = 0
    ancilla_count: int = 0
    two_qubit_depth: int = 0
    other_two_qubit_count: int = 0
    macros: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "cnot_count": self.cnot_count,
            "t_count": self.t_count,
            "rz_count": self.rz_count,
            "single_qubit_clifford_count": self.single_qubit_clifford_count,
            "measurement_count": self.measurement_count,
            "ancilla_count": self.ancilla_count,
            "two_qubit_depth": self.two_qubit_depth,
            "other_two_qubit_count": self.other_two_qubit_count,
            "macros": dict(self.macros),
        }


def two_qubit_depth(c: Circuit) -> int:
    """Longest chain of two-qubit gates, ordered by shared qubits."""
    level = [0] * c.num_qubits
    for g in c.ops:
        if g.is_two_qubit:
            a, b = g.qubits
            level[a] = level[b] = max(level[a], level[b]) + 1
    return max(level, default=0)


def count_resources(c: Circuit) -> ResourceReport:
    """Gate census.  Unlowered heis/czpow gates land in ``macros`` only."""
    counts: dict[str, int] = {}
    for g in c.ops:
        counts[g.kind] = counts.get(g.kind, 0) + 1
    get = counts.get
    return ResourceReport(
        cnot_count=get("cnot", 0),
        t_count=get("t", 0) + get("tdg", 0),
        rz_count=sum(get(k, 0) for k in ROTATIONS),
        single_qubit_clifford_count=sum(get(k, 0) for k in CLIFFORD_1Q | CONDITIONAL_1Q),
        measurement_count=sum(get(k, 0) for k in MEASUREMENTS),
        ancilla_count=len(c.ancillas),
        two_qubit_depth=two_qubit_depth(c),
        other_two_qubit_count=get("cz", 0) + get("swap", 0) + get("cz_ifc", 0),
        macros={k: get(k, 0) for k in sorted(MACROS) if get(k, 0)},
    )


# ---------------------------------------------------------------------------
# text format

def _fmt_angle(x: float) -> str:
    return format(x, ".17g")


def format_gate(g: Gate) -> str:
    k = g.kind
    qs = " ".join(str(q) for q in g.qubits)
    if k in MEASUREMENTS:
        return f"{k} {g.qubits[0]} -> {g.clbit}"
    if k in CONDITIONAL:
        return f"{k} {g.clbit} ? {qs}"
    if k in PARAMETERIZED:
        return f"{k} {_fmt_angle(g.angle)} {qs}"
    return f"{k} {qs}"


def serialize(c: Circuit) -> str:
    lines = [f"qubits {c.num_qubits}"]
    if c.num_clbits:
        lines.append(f"clbits {c.num_clbits}")
    if c.global_phase:
        lines.append(f"phase {_fmt_angle(c.global_phase)}")
    if c.ancillas:
        lines.append("ancillas " + " ".join(str(a) for a in c.ancillas))
    lines.extend(format_gate(g) for g in c.ops)
    return "\n".join(lines) + "\n"


class _Line:
    """Whitespace tokenizer that remembers token columns for error messages."""

    def __init__(self, text: str, lineno: int):
        self.lineno = lineno
        self.tokens: list[tuple[str, int]] = []
        col = 0
        for part in text.split(" "):
            if part:
                self.tokens.append((part, col + 1))
            col += len(part) + 1
        self.pos = 0

    def fail(self, msg: str, col: int | None = None):
        if col is None:
            col = self.tokens[self.pos][1] if self.pos < len(self.tokens) else (
                self.tokens[-1][1] + len(self.tokens[-1][0]) if self.tokens else 1)
        raise CircuitParseError(msg, self.lineno, col)

    def take(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.tokens):
            self.fail(f"expected {what}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def int(self, what: str) -> int:
        tok, col = self.take(what)
        if not tok.isdigit():
            self.fail(f"expected {what}, got {tok!r}", col)
        return int(tok)

    def float(self, what: str) -> float:
        tok, col = self.take(what)
        try:
            val = float(tok)
        except ValueError:
            self.fail(f"expected {what}, got {tok!r}", col)
        if not math.isfinite(val):
            self.fail(f"{what} must be finite", col)
        return val

    def literal(self, lit: str):
        tok, col = self.take(repr(lit))
        if tok != lit:
            self.fail(f"expected {lit!r}, got {tok!r}", col)

    def end(self):
        if self.pos != len(self.tokens):
            self.fail(f"unexpected trailing token {self.tokens[self.pos][0]!r}")


def parse(text: str) -> Circuit:
    num_qubits: int | None = None
    num_clbits = 0
    phase = 0.0
    ancillas: tuple[int, ...] = ()
    ops: list[Gate] = []
    header_done = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = raw.split("#", 1)[0].rstrip("\r").strip()
        if not body:
            continue
        ln = _Line(body, lineno)
        head, col = ln.take("statement")
        if num_qubits is None:
            if head != "qubits":
                ln.fail("first statement must be 'qubits <n>'", col)
            num_qubits = ln.int("qubit count")
            ln.end()
            continue
        if head in ("clbits", "phase", "ancillas"):
            if header_done:
                ln.fail(f"'{head}' must precede all gates", col)
            if head == "clbits":
                num_clbits = ln.int("clbit count")
            elif head == "phase":
                phase = ln.float("phase")
            else:
                qs = []
                while ln.pos < len(ln.tokens):
                    qs.append(ln.int("ancilla index"))
                ancillas = tuple(qs)
            ln.end()
            continue
        header_done = True
        if head not in KINDS:
            ln.fail(f"unknown gate {head!r}", col)
        try:
            if head in MEASUREMENTS:
                q = ln.int("qubit")
                ln.literal("->")
                g = Gate(head, (q,), clbit=ln.int("clbit"))
            elif head in CONDITIONAL:
                c = ln.int("clbit")
                ln.literal("?")
                g = Gate(head, tuple(ln.int("qubit") for _ in range(_arity(head))), clbit=c)
            elif head in PARAMETERIZED:
                a = ln.float("angle")
                g = Gate(head, tuple(ln.int("qubit") for _ in range(_arity(head))), a)
            else:
                g = Gate(head, tuple(ln.int("qubit") for _ in range(_arity(head))))
            ln.end()
        except CircuitParseError:
            raise
        except CircuitError as exc:
            raise CircuitParseError(str(exc), lineno, col) from None
        for q in g.qubits:
            if q >= num_qubits:
                raise CircuitParseError(f"qubit {q} out of range (qubits {num_qubits})", lineno, col)
        if g.clbit is not None and g.clbit >= num_clbits:
            raise CircuitParseError(f"clbit {g.clbit} out of range (clbits {num_clbits})", lineno, col)
        ops.append(g)
    if num_qubits is None:
        raise CircuitParseError("missing 'qubits <n>' header", 1)
    try:
        return Circuit(num_qubits, ops, num_clbits, phase, ancillas)
    except CircuitError as exc:
        raise CircuitParseError(str(exc), 1) from None
