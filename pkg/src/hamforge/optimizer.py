"""Peephole optimizer: cancellation, rotation/CZ-power/Heisenberg merging and
commutation-aware floating.

Each incoming gate walks back along the timelines of the wires it touches,
passing gates it commutes with, until it either merges with an identical-support
partner or hits a blocker.  Sweeps repeat until nothing changes (at most
MAX_SWEEPS).  Global phases released by deleting e.g. rz(2 pi) are folded into
the circuit's global phase, so rewrites are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .circuit import CONDITIONAL, MEASUREMENTS, Circuit, Gate, count_resources
from .sim import CapacityError, spectral_distance, unitary_of
from .synth import Mode, lower

MAX_SWEEPS = 20
ZERO_TOL = 1e-12
VERIFY_MAX_QUBITS = 10

_EIGHTHS = {"t": 1, "s": 2, "z": 4, "sdg": 6, "tdg": 7}
_FROM_EIGHTHS = {1: "t", 2: "s", 4: "z", 6: "sdg", 7: "tdg"}
_SELF_INVERSE = {"h", "x", "z", "cnot", "x_ifc", "z_ifc"}
_SYMMETRIC = {"cz", "swap", "czpow", "heis", "cz_ifc"}
_Z_1Q = {"z", "s", "sdg", "t", "tdg", "rz"}
_X_1Q = {"x", "rx"}


@dataclass
class RewriteStats:
    cnot_removed: int = 0
    rz_removed: int = 0
    heis_merged: int = 0
    czpow_merged: int = 0
    passes_run: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _action(g: Gate, q: int) -> str | None:
    """How g acts on qubit q: 'Z' (diagonal), 'X' (X-diagonal) or None."""
    k = g.kind
    if k in _Z_1Q or k in ("cz", "czpow"):
        return "Z"
    if k in _X_1Q:
        return "X"
    if k == "cnot":
        return "Z" if q == g.qubits[0] else "X"
    return None


def commutes(p: Gate, g: Gate) -> bool:
    """Sufficient (not necessary) test that p and g commute."""
    shared_clbit = p.clbit is not None and p.clbit == g.clbit
    if shared_clbit and (p.kind in MEASUREMENTS or g.kind in MEASUREMENTS):
        return False
    shared = set(p.qubits) & set(g.qubits)
    if not shared:
        return True
    if p.kind in MEASUREMENTS or g.kind in MEASUREMENTS:
        return False
    p_ifc, g_ifc = p.kind in CONDITIONAL, g.kind in CONDITIONAL
    if p_ifc or g_ifc:
        # classically controlled gates only pass other controlled diagonals
        return p.kind in ("z_ifc", "cz_ifc") and g.kind in ("z_ifc", "cz_ifc")
    if p.kind == g.kind == "heis" and set(p.qubits) == set(g.qubits):
        return True
    for q in shared:
        a = _action(p, q)
        if a is None or a != _action(g, q):
            return False
    return True


def _same_support(p: Gate, g: Gate) -> bool:
    if p.qubits == g.qubits:
        return True
    return p.kind in _SYMMETRIC and g.kind in _SYMMETRIC and set(p.qubits) == set(g.qubits)


class _Result:
    """Outcome of a merge: replacement gate (or None for deletion) plus phase."""
    __slots__ = ("gate", "phase")

    def __init__(self, gate: Gate | None, phase: float = 0.0):
        self.gate = gate
        self.phase = phase


def _simplify(g: Gate) -> _Result:
    """Drop g if it is the identity up to a global phase."""
    k = g.kind
    if k in ("rx", "ry", "rz"):
        turns = round(g.angle / (2 * math.pi))
        if abs(g.angle - 2 * math.pi * turns) <= ZERO_TOL:
            return _Result(None, math.pi * (turns % 2))
    elif k == "czpow":
        turns = round(g.angle / 2)
        if abs(g.angle - 2 * turns) <= ZERO_TOL:
            return _Result(None)
    elif k == "heis":
        quarter = round(g.angle / (math.pi / 2))
        if abs(g.angle - quarter * math.pi / 2) <= ZERO_TOL:
            return _Result(None, -quarter * math.pi / 2)
    return _Result(g)


def _merge(p: Gate, g: Gate) -> _Result | None:
    """Combine p followed by g (same support), or None when no rule applies."""
    if not _same_support(p, g):
        return None
    pk, gk = p.kind, g.kind
    if pk == gk and pk in _SELF_INVERSE | {"cz", "swap", "cz_ifc"}:
        if p.clbit == g.clbit:
            return _Result(None)
        return None
    if pk in _EIGHTHS and gk in _EIGHTHS:
        total = (_EIGHTHS[pk] + _EIGHTHS[gk]) % 8
        if total == 0:
            return _Result(None)
        if total in _FROM_EIGHTHS:
            return _Result(Gate(_FROM_EIGHTHS[total], p.qubits))
        return None
    if pk == gk and pk in ("rx", "ry", "rz", "heis"):
        return _simplify(Gate(pk, p.qubits, p.angle + g.angle))
    if {pk, gk} <= {"czpow", "cz"} and "czpow" in (pk, gk):
        a = (p.angle if pk == "czpow" else 1.0) + (g.angle if gk == "czpow" else 1.0)
        return _simplify(Gate("czpow", p.qubits, a))
    return None


class _Builder:
    def __init__(self, c: Circuit):
        self.out: list[Gate | None] = []
        self.qwires: list[list[int]] = [[] for _ in range(c.num_qubits)]
        self.cwires: list[list[int]] = [[] for _ in range(c.num_clbits)]
        self.phase = c.global_phase

    def _wires(self, g: Gate) -> list[list[int]]:
        ws = [self.qwires[q] for q in g.qubits]
        if g.clbit is not None:
            ws.append(self.cwires[g.clbit])
        return ws

    def add(self, g: Gate) -> None:
        first = _simplify(g)
        self.phase += first.phase
        if first.gate is None:
            return
        g = first.gate
        wires = self._wires(g)
        ptrs = [len(w) - 1 for w in wires]
        while True:
            # next most recent live gate on any of g's wires
            best = -1
            for wi, w in enumerate(wires):
                while ptrs[wi] >= 0 and self.out[w[ptrs[wi]]] is None:
                    ptrs[wi] -= 1
                if ptrs[wi] >= 0:
                    best = max(best, w[ptrs[wi]])
            if best < 0:
                break
            p = self.out[best]
            res = _merge(p, g)
            if res is not None:
                self.phase += res.phase
                self.out[best] = res.gate
                return
            if not commutes(p, g):
                break
            for wi, w in enumerate(wires):
                if ptrs[wi] >= 0 and w[ptrs[wi]] == best:
                    ptrs[wi] -= 1
        idx = len(self.out)
        self.out.append(g)
        for w in wires:
            w.append(idx)

    def gates(self) -> list[Gate]:
        return [g for g in self.out if g is not None]


def _sweep(c: Circuit) -> Circuit:
    b = _Builder(c)
    for g in c.ops:
        b.add(g)
    return c.with_ops(b.gates(), global_phase=math.remainder(b.phase, 2 * math.pi))


def optimize(c: Circuit) -> tuple[Circuit, RewriteStats]:
    """Apply the rewrite rules to a fixpoint; returns the new circuit and stats."""
    current = c
    passes = 0
    for _ in range(MAX_SWEEPS):
        nxt = _sweep(current)
        passes += 1
        done = nxt.ops == current.ops
        current = nxt
        if done:
            break
    return current, rewrite_delta(c, current, passes)


def compile_circuit(c: Circuit, mode: Mode) -> tuple[Circuit, RewriteStats]:
    """Optimize at the heis-macro level, lower for ``mode``, optimize again.

    Stats are measured against lowering ``c`` without any optimization, plus
    the heis/czpow merges made at the macro level.
    """
    macro_opt, macro_stats = optimize(c)
    lowered, low_stats = optimize(lower(macro_opt, mode))
    stats = rewrite_delta(lower(c, mode), lowered, macro_stats.passes_run + low_stats.passes_run)
    stats.heis_merged = macro_stats.heis_merged
    stats.czpow_merged += macro_stats.czpow_merged
    return lowered, stats


def rewrite_delta(before: Circuit, after: Circuit, passes: int = 0) -> RewriteStats:
    """Stats computed from the gate census of two circuits."""
    rb, ra = count_resources(before), count_resources(after)
    hb, ha = rb.macros.get("heis", 0), ra.macros.get("heis", 0)
    cb, ca = rb.macros.get("czpow", 0), ra.macros.get("czpow", 0)
    return RewriteStats(
        cnot_removed=max(rb.cnot_count - ra.cnot_count, 0),
        rz_removed=max(rb.rz_count - ra.rz_count, 0),
        heis_merged=max(hb - ha, 0),
        czpow_merged=max(cb - ca, 0),
        passes_run=passes,
    )


def verify_equivalence(before: Circuit, after: Circuit, tol: float = 1e-9) -> bool:
    """True iff the two circuits' unitaries agree up to global phase within tol."""
    if before.num_qubits != after.num_qubits:
        raise ValueError("circuits act on different numbers of qubits")
    if before.num_qubits > VERIFY_MAX_QUBITS:
        raise CapacityError(f"equivalence checking is limited to {VERIFY_MAX_QUBITS} qubits")
    return spectral_distance(unitary_of(before), unitary_of(after), phase_invariant=True) <= tol
