"""Product-formula circuit construction for the disordered Heisenberg model.

    H = sum_{(i,j) in E} (X_i X_j + Y_i Y_j + Z_i Z_j) + sum_i d_i Z_i

Each product-formula stage with scalar s applies exp(-i s H_term) for every
term, i.e. heis(s) per edge and rz(2 d_i s) per qubit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .circuit import (CNOT, CZ_ifc, CZPow, Circuit, Gate, H, Heis, MeasX, Ry, Rz, S, Sdg, T, Tdg,
                      X_ifc)
from .graphs import ColoredLayout, Graph, GraphError, diameter, vizing_color

Mode = Literal["preft", "ft"]
MODES = ("preft", "ft")
FORWARD, REVERSE = "forward", "reverse"


@dataclass(frozen=True)
class DisorderedHeisenberg:
    graph: Graph
    disorders: tuple[float, ...]
    t: float | None = None
    epsilon: float = 1e-3

    def __post_init__(self):
        d = tuple(float(x) for x in self.disorders)
        object.__setattr__(self, "disorders", d)
        if len(d) != self.graph.n:
            raise ValueError(f"need {self.graph.n} disorder values, got {len(d)}")
        if any(not -1.0 <= x <= 1.0 for x in d):
            raise ValueError("disorder values must lie in [-1, 1]")
        if self.t is None:
            object.__setattr__(self, "t", 2.0 * diameter(self.graph))
        if not self.t > 0:
            raise ValueError(f"evolution time must be positive, got {self.t}")
        if not self.epsilon > 0:
            raise ValueError(f"target error must be positive, got {self.epsilon}")

    @classmethod
    def random(cls, graph: Graph, seed: int, t: float | None = None,
               epsilon: float = 1e-3) -> DisorderedHeisenberg:
        rng = np.random.default_rng(seed)
        return cls(graph, tuple(rng.uniform(-1.0, 1.0, graph.n)), t, epsilon)

    def with_time(self, t: float) -> DisorderedHeisenberg:
        return DisorderedHeisenberg(self.graph, self.disorders, t, self.epsilon)


# ---------------------------------------------------------------------------
# Suzuki recursion

@dataclass(frozen=True)
class ProductFormulaPlan:
    """One S_{2k} block as a flat list of half-stages.

    A stage (s, direction) applies exp(-i s H_j) for each term H_j in the given
    order; ``t``/``r`` record the step the block approximates.
    """
    order: int
    r: int
    t: float
    stages: tuple[tuple[float, str], ...] = field(default_factory=tuple)

    @property
    def step(self) -> float:
        return self.t / self.r


def suzuki_p(k: int) -> float:
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def suzuki_coefficients(order: int) -> list[float]:
    """Coefficients mu of the S_2(mu * step) factors making up one S_order block."""
    if order not in (2, 4, 6):
        raise ValueError(f"unsupported product-formula order {order}; use 2, 4 or 6")
    coeffs = [1.0]
    for k in range(2, order // 2 + 1):
        p = suzuki_p(k)
        outer = [p * c for c in coeffs]
        coeffs = outer + outer + [(1 - 4 * p) * c for c in coeffs] + outer + outer
    return coeffs


def suzuki_stages(order: int, t: float, r: int) -> ProductFormulaPlan:
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    step = t / r
    stages = []
    for mu in suzuki_coefficients(order):
        half = mu * step / 2
        stages.append((half, FORWARD))
        stages.append((half, REVERSE))
    return ProductFormulaPlan(order, r, t, tuple(stages))


# ---------------------------------------------------------------------------
# two-qubit syntheses

PREFT_PHASE = math.pi / 4


def _preft_ops(a: float, i: int, j: int) -> list[Gate]:
    # Three-CNOT canonical-form circuit; equals exp(-i pi/4) heis(a).
    th = 2 * a + math.pi / 2
    return [S(j), CNOT(j, i), Rz(th, i), Ry(th, j), CNOT(i, j), Ry(-th, j), CNOT(j, i), Sdg(i)]


def heis_gate_preft(a: float) -> Circuit:
    """heis(a) with 3 CNOTs; the template's e^{-i pi/4} is stored as global phase."""
    return Circuit(2, _preft_ops(a, 0, 1), global_phase=PREFT_PHASE)


def czpow_exponent(a: float) -> float:
    """CZ-power exponent that carries heis(a) in the Bell-basis decomposition."""
    return 4 * a / math.pi


def _ft_ops(a: float, i: int, j: int) -> list[Gate]:
    # C czpow(4a/pi) C^dagger with C = CNOT(i, j) (H on i); the singlet picks up e^{4ia}
    return [CNOT(i, j), H(i), CZPow(czpow_exponent(a), i, j), H(i), CNOT(i, j)]


def heis_gate_ft(a: float) -> Circuit:
    """heis(a) with a single continuous gate, a czpow; circuit phase -a."""
    return Circuit(2, _ft_ops(a, 0, 1), global_phase=-a)


def temporary_and(a: int, b: int, target: int) -> list[Gate]:
    """Relative-phase Toffoli writing a AND b into a fresh |0> target with 4 T gates."""
    return [H(target), T(target), CNOT(a, target), CNOT(b, target), CNOT(target, a),
            CNOT(target, b), Tdg(a), Tdg(b), T(target), CNOT(target, a), CNOT(target, b),
            H(target), S(target)]


def uncompute_and(a: int, b: int, target: int, clbit: int) -> list[Gate]:
    """Measurement-based uncompute of temporary_and; Clifford only."""
    return [MeasX(target, clbit), CZ_ifc(clbit, a, b), X_ifc(clbit, target)]


def _gadget_ops(x: float, a: int, b: int, anc: int, clbit: int) -> list[Gate]:
    return temporary_and(a, b, anc) + [Rz(math.pi * x, anc)] + uncompute_and(a, b, anc, clbit)


def cz_gadget(a: float) -> Circuit:
    """czpow(a) on qubits 0, 1 via a temporary AND on ancilla 2 and one rz(pi a)."""
    return Circuit(3, _gadget_ops(a, 0, 1, 2, 0), num_clbits=1,
                   global_phase=math.pi * a / 2, ancillas=(2,))


def cnot_from_heisenberg() -> Circuit:
    """CNOT(0 -> 1) from two heis(pi/8) gates and single-qubit rotations."""
    q1, q2 = 0, 1
    return Circuit(2, [
        Ry(-math.pi / 2, q2), Rz(math.pi / 2, q1), Rz(-math.pi / 2, q2),
        Heis(math.pi / 8, q1, q2), Rz(math.pi, q1), Heis(math.pi / 8, q1, q2),
        Ry(math.pi / 2, q2),
    ])


# ---------------------------------------------------------------------------
# lowering

def lower(c: Circuit, mode: Mode, gadgets: bool = False) -> Circuit:
    """Expand heis macros for the given mode.

    With ``gadgets`` (ft only) every czpow is further expanded into cz_gadget
    on one shared ancilla appended after the data qubits; its clbit is reused.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ops: list[Gate] = []
    phase = c.global_phase
    n, nclb, ancillas = c.num_qubits, c.num_clbits, c.ancillas
    anc = clb = None
    if gadgets and any(g.kind in ("heis", "czpow") for g in c.ops):
        anc, clb = n, nclb
        n, nclb, ancillas = n + 1, nclb + 1, ancillas + (anc,)
    for g in c.ops:
        if g.kind == "heis":
            a = g.angle
            i, j = g.qubits
            if mode == "preft":
                ops.extend(_preft_ops(a, i, j))
                phase += PREFT_PHASE
            else:
                phase -= a
                for h in _ft_ops(a, i, j):
                    if h.kind == "czpow" and gadgets:
                        ops.extend(_gadget_ops(h.angle, i, j, anc, clb))
                        phase += math.pi * h.angle / 2
                    else:
                        ops.append(h)
        elif g.kind == "czpow" and gadgets:
            ops.extend(_gadget_ops(g.angle, *g.qubits, anc, clb))
            phase += math.pi * g.angle / 2
        else:
            ops.append(g)
    return Circuit(n, ops, nclb, phase, ancillas)


# ---------------------------------------------------------------------------
# stages and blocks

def build_stage(h: DisorderedHeisenberg, layout: ColoredLayout, s: float, direction: str,
                mode: Mode = "preft", lower_gates: bool = True) -> Circuit:
    """One product-formula stage: edge terms class by class, disorder layer last.

    Reverse stages apply the whole sequence backwards, so neighbouring stages
    meet on identical terms.
    """
    if direction not in (FORWARD, REVERSE):
        raise ValueError(f"direction must be {FORWARD!r} or {REVERSE!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    _check_layout(h.graph, layout)
    ops = _stage_ops(h, layout, s, direction)
    c = Circuit(h.graph.n, ops)
    return lower(c, mode) if lower_gates else c


def _stage_ops(h: DisorderedHeisenberg, layout: ColoredLayout, s: float, direction: str) -> list[Gate]:
    ops = [Heis(s, u, v) for cls in layout.classes for u, v in cls]
    ops += [Rz(2 * d * s, q) for q, d in enumerate(h.disorders) if d != 0.0]
    return ops if direction == FORWARD else ops[::-1]


def _check_layout(g: Graph, layout: ColoredLayout) -> None:
    try:
        layout.check(g)
    except GraphError as exc:
        raise ValueError(f"layout does not match the Hamiltonian graph: {exc}") from None


def default_layout(g: Graph, seed: int = 0) -> ColoredLayout:
    return vizing_color(g, seed=seed)


def build_pf_block(h: DisorderedHeisenberg, order: int, r: int, layout: ColoredLayout | None = None,
                   mode: Mode = "preft", lower_gates: bool = True) -> Circuit:
    """A single S_order block for step t/r."""
    layout = layout if layout is not None else default_layout(h.graph)
    _check_layout(h.graph, layout)
    plan = suzuki_stages(order, h.t, r)
    ops: list[Gate] = []
    for s, direction in plan.stages:
        ops.extend(_stage_ops(h, layout, s, direction))
    c = Circuit(h.graph.n, ops)
    return lower(c, mode) if lower_gates else c


def build_pf_circuit(h: DisorderedHeisenberg, order: int, r: int, mode: Mode = "preft",
                     layout: ColoredLayout | None = None, lower_gates: bool = True) -> Circuit:
    """r back-to-back S_order blocks, unoptimized."""
    block = build_pf_block(h, order, r, layout, mode, lower_gates)
    return block.repeat(r)


def stages_per_block(order: int) -> int:
    return 2 * len(suzuki_coefficients(order))
