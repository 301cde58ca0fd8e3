"""Exact dense simulation at desk scale.

Qubit 0 is the most significant bit of a basis-state index.  Unitaries act on
column vectors; ``unitary_of`` returns U with U[i, j] = <i|U|j>.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import MEASUREMENTS, Circuit, Gate

MAX_QUBITS = 12
MAX_BRANCHES = 1 << 14
BRANCH_TOL = 1e-10


class CapacityError(ValueError):
    pass


class NondeterministicCircuitError(ValueError):
    """Measurement branches induce different data-qubit operators."""


class SearchFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# gate matrices

_I2 = np.eye(2, dtype=complex)
_FIXED_1Q = {
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
}
PAULI_X = _FIXED_1Q["x"]
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = _FIXED_1Q["z"]

_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
_CNOT = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def czpow(a: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * math.pi * a)])


def heis(a: float) -> np.ndarray:
    """exp(-i a (XX + YY + ZZ)), using XX + YY + ZZ = 2 SWAP - I."""
    return np.exp(1j * a) * (math.cos(2 * a) * np.eye(4) - 1j * math.sin(2 * a) * _SWAP)


def gate_matrix(g: Gate) -> np.ndarray:
    k = g.kind
    if k in _FIXED_1Q:
        return _FIXED_1Q[k]
    if k == "rx":
        return rx(g.angle)
    if k == "ry":
        return ry(g.angle)
    if k == "rz":
        return rz(g.angle)
    if k == "cnot":
        return _CNOT
    if k == "cz":
        return _CZ
    if k == "swap":
        return _SWAP
    if k == "czpow":
        return czpow(g.angle)
    if k == "heis":
        return heis(g.angle)
    raise ValueError(f"{k} has no fixed matrix")


# ---------------------------------------------------------------------------
# application to (2**n, cols) arrays

def apply_1q(state: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    cols = state.shape[1]
    s = state.reshape(1 << q, 2, (1 << (n - q - 1)) * cols)
    return np.einsum("ij,ajb->aib", u, s).reshape(-1, cols)


def apply_2q(state: np.ndarray, u: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    cols = state.shape[1]
    s = state.reshape((2,) * n + (cols,))
    s = np.moveaxis(s, (q1, q2), (0, 1))
    shape = s.shape
    s = (u @ s.reshape(4, -1)).reshape(shape)
    return np.moveaxis(s, (0, 1), (q1, q2)).reshape(-1, cols)


def apply_gate(state: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if len(g.qubits) == 1:
        return apply_1q(state, gate_matrix(g), g.qubits[0], n)
    return apply_2q(state, gate_matrix(g), g.qubits[0], g.qubits[1], n)


def _bit_mask(n: int, q: int) -> np.ndarray:
    return ((np.arange(1 << n) >> (n - 1 - q)) & 1).astype(bool)


# ---------------------------------------------------------------------------
# circuit unitaries

def unitary_of(c: Circuit) -> np.ndarray:
    """Unitary on the non-ancilla qubits.

    Measurement-free circuits without ancillas give the plain gate product
    times exp(i global_phase).  Otherwise every measurement branch is
    simulated with ancillas starting in |0>; each branch must return the
    ancillas to |0> and induce the same data operator.
    """
    n = c.num_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the simulator cap of {MAX_QUBITS}")
    phase = np.exp(1j * c.global_phase)
    if not c.ancillas and not c.has_measurements:
        u = np.eye(1 << n, dtype=complex)
        for g in c.ops:
            u = apply_gate(u, g, n)
        return phase * u
    return phase * _branch_unitary(c)


def _branch_unitary(c: Circuit) -> np.ndarray:
    n = c.num_qubits
    anc = set(c.ancillas)
    data = [q for q in range(n) if q not in anc]
    dim = 1 << n
    # columns: data basis states embedded with all ancillas in |0>
    cols = []
    for bits in itertools.product((0, 1), repeat=len(data)):
        idx = 0
        for q, b in zip(data, bits):
            idx |= b << (n - 1 - q)
        cols.append(idx)
    start = np.zeros((dim, len(cols)), dtype=complex)
    start[cols, range(len(cols))] = 1.0

    branches = [(start, (0,) * c.num_clbits)]
    for g in c.ops:
        nxt = []
        for state, clbits in branches:
            if g.kind in MEASUREMENTS:
                q = g.qubits[0]
                if g.kind == "measx":
                    state = apply_1q(state, _FIXED_1Q["h"], q, n)
                mask = _bit_mask(n, q)
                for outcome in (0, 1):
                    proj = state * (mask == bool(outcome))[:, None]
                    if np.linalg.norm(proj) > 1e-12:
                        bits = list(clbits)
                        bits[g.clbit] = outcome
                        nxt.append((proj, tuple(bits)))
                if len(nxt) > MAX_BRANCHES:
                    raise CapacityError(f"more than {MAX_BRANCHES} measurement branches")
            elif g.clbit is not None:
                if clbits[g.clbit]:
                    base = Gate(g.kind.removesuffix("_ifc"), g.qubits)
                    state = apply_gate(state, base, n)
                nxt.append((state, clbits))
            else:
                nxt.append((apply_gate(state, g, n), clbits))
        branches = nxt

    ref = None
    for state, _ in branches:
        block = state[cols, :]
        leak = np.linalg.norm(state) ** 2 - np.linalg.norm(block) ** 2
        if leak > BRANCH_TOL:
            raise NondeterministicCircuitError("ancillas are not returned to |0> in every branch")
        weight = np.linalg.norm(block) / math.sqrt(len(cols))
        if weight < 1e-12:
            continue
        u = block / weight
        if not np.allclose(u.conj().T @ u, np.eye(len(cols)), atol=1e-9):
            raise NondeterministicCircuitError("a measurement branch is not unitary on the data qubits")
        if ref is None:
            ref = u
        elif spectral_distance(ref, u, phase_invariant=True) > BRANCH_TOL:
            raise NondeterministicCircuitError("measurement branches induce different operators")
    assert ref is not None
    return ref


def branch_operators(c: Circuit) -> list[np.ndarray]:
    """Per-branch data operators (normalised), for gadget inspection."""
    ops = []
    meas = [g for g in c.ops if g.kind in MEASUREMENTS]
    for outcomes in itertools.product((0, 1), repeat=len(meas)):
        ops.append(_forced_branch(c, outcomes))
    return ops


def _forced_branch(c: Circuit, outcomes) -> np.ndarray:
    n = c.num_qubits
    anc = set(c.ancillas)
    data = [q for q in range(n) if q not in anc]
    cols = []
    for bits in itertools.product((0, 1), repeat=len(data)):
        idx = 0
        for q, b in zip(data, bits):
            idx |= b << (n - 1 - q)
        cols.append(idx)
    state = np.zeros((1 << n, len(cols)), dtype=complex)
    state[cols, range(len(cols))] = 1.0
    clbits = [0] * c.num_clbits
    it = iter(outcomes)
    for g in c.ops:
        if g.kind in MEASUREMENTS:
            q = g.qubits[0]
            if g.kind == "measx":
                state = apply_1q(state, _FIXED_1Q["h"], q, n)
            m = next(it)
            state = state * (_bit_mask(n, q) == bool(m))[:, None]
            clbits[g.clbit] = m
        elif g.clbit is not None:
            if clbits[g.clbit]:
                state = apply_gate(state, Gate(g.kind.removesuffix("_ifc"), g.qubits), n)
        else:
            state = apply_gate(state, g, n)
    block = state[cols, :]
    return np.exp(1j * c.global_phase) * block / (np.linalg.norm(block) / math.sqrt(len(cols)))


# ---------------------------------------------------------------------------
# distances

def spectral_distance(u: np.ndarray, v: np.ndarray, phase_invariant: bool = False) -> float:
    """Largest singular value of u - v, optionally minimised over a global phase on v.

    For unitaries the minimum is exact: with W = v^dagger u, the distance is the
    chord 2 sin(arc / 4) of the shortest arc holding all eigenphases of W.
    Non-unitary inputs fall back to aligning the phase of trace(v^dagger u).
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not phase_invariant:
        return float(np.linalg.norm(u - v, 2))
    w = v.conj().T @ u
    if is_unitary(u) and is_unitary(v):
        phases = np.sort(np.angle(np.linalg.eigvals(w)))
        gaps = np.diff(np.concatenate([phases, [phases[0] + 2 * math.pi]]))
        arc = 2 * math.pi - float(gaps.max())
        return 2 * math.sin(arc / 4)
    tr = np.trace(w)
    phi = float(np.angle(tr)) if abs(tr) > 1e-14 else 0.0
    return float(np.linalg.norm(u - np.exp(1j * phi) * v, 2))


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol))


# ---------------------------------------------------------------------------
# Hamiltonian evolution

def pauli_on(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    mats = [ops.get(q, _I2) for q in range(n)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def hamiltonian_matrix(h) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the disordered Heisenberg Hamiltonian."""
    n = h.graph.n
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the simulator cap of {MAX_QUBITS}")
    dim = 1 << n
    idx = np.arange(dim)
    z = 1 - 2 * ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)  # z[state, qubit]
    diag = z @ np.asarray(h.disorders, dtype=float)
    mat = np.zeros((dim, dim), dtype=complex)
    for i, j in h.graph.edges:
        diag = diag + z[:, i] * z[:, j]
        differ = z[:, i] != z[:, j]
        flipped = idx ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
        mat[flipped[differ], idx[differ]] += 2.0  # XX + YY swaps anti-aligned pairs
    mat[idx, idx] += diag
    return mat


def exact_evolution(h) -> np.ndarray:
    """exp(-i t H) by Hermitian eigendecomposition."""
    mat = hamiltonian_matrix(h)
    if np.abs(mat - mat.conj().T).max() > 1e-12:
        raise ValueError("Hamiltonian is not Hermitian")
    return _expm_hermitian(mat, h.t)


def _expm_hermitian(mat: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


# ---------------------------------------------------------------------------
# magnetization sectors
#
# Every term conserves the number of 1 bits, so exact and product-formula
# unitaries are block diagonal over Hamming-weight sectors and the spectral
# distance is the largest blockwise distance.

@dataclass(frozen=True)
class _Sector:
    states: np.ndarray          # basis-state integers with this popcount
    bits: np.ndarray            # bits[k, q] of states[k]


@lru_cache(maxsize=None)
def _sectors(n: int) -> tuple[_Sector, ...]:
    idx = np.arange(1 << n)
    pop = np.array([bin(i).count("1") for i in idx])
    out = []
    for w in range(n + 1):
        states = idx[pop == w]
        bits = (states[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        out.append(_Sector(states, bits))
    return tuple(out)


def _swap_perm(sec: _Sector, n: int, i: int, j: int) -> np.ndarray:
    flipped = sec.states ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
    differ = sec.bits[:, i] != sec.bits[:, j]
    target = np.where(differ, flipped, sec.states)
    return np.searchsorted(sec.states, target)


def _sector_hamiltonian(h, sec: _Sector) -> np.ndarray:
    n = h.graph.n
    z = 1 - 2 * sec.bits
    diag = z @ np.asarray(h.disorders, dtype=float)
    dim = len(sec.states)
    mat = np.zeros((dim, dim), dtype=complex)
    rows = np.arange(dim)
    for i, j in h.graph.edges:
        diag = diag + z[:, i] * z[:, j]
        perm = _swap_perm(sec, n, i, j)
        moved = perm != rows
        mat[perm[moved], rows[moved]] += 2.0
    mat[rows, rows] += diag
    return mat


def sector_exact_evolution(h) -> list[np.ndarray]:
    return [_expm_hermitian(_sector_hamiltonian(h, sec), h.t) for sec in _sectors(h.graph.n)]


def _apply_heis_rows(m: np.ndarray, perm: np.ndarray, a: float) -> np.ndarray:
    # heis(a) = e^{ia} (cos 2a I - i sin 2a SWAP); the e^{ia} is left to the caller
    tmp = m[perm]
    tmp *= -1j * math.sin(2 * a)
    m *= math.cos(2 * a)
    m += tmp
    return m


def sector_circuit_unitary(c: Circuit, n: int) -> list[np.ndarray]:
    """Sector blocks of a circuit made of heis and rz gates (plus global phase)."""
    out = []
    for sec in _sectors(n):
        m = np.eye(len(sec.states), dtype=complex)
        phase = c.global_phase
        perms: dict[tuple[int, int], np.ndarray] = {}
        for g in c.ops:
            if g.kind == "heis":
                if g.qubits not in perms:
                    perms[g.qubits] = _swap_perm(sec, n, *g.qubits)
                m = _apply_heis_rows(m, perms[g.qubits], g.angle)
                phase += g.angle
            elif g.kind == "rz":
                m *= _rz_diag(sec, g.qubits[0], g.angle)[:, None]
            else:
                raise ValueError(f"sector simulation supports heis/rz only, got {g.kind}")
        out.append(np.exp(1j * phase) * m)
    return out


def _rz_diag(sec: _Sector, q: int, theta: float) -> np.ndarray:
    return np.where(sec.bits[:, q] == 1, np.exp(0.5j * theta), np.exp(-0.5j * theta))


class _SectorPF:
    """Product-formula blocks restricted to one sector.

    Every factor (heis, rz) is a symmetric matrix, so a reverse stage is the
    transpose of the forward stage, and the Suzuki recursion reuses its
    sub-blocks; only a handful of distinct stages are ever built.
    """

    def __init__(self, h, layout, sec: _Sector):
        n = h.graph.n
        self.sec = sec
        self.edges = [e for cls in layout.classes for e in cls]
        self.perms = [_swap_perm(sec, n, *e) for e in self.edges]
        self.disorders = [(q, d) for q, d in enumerate(h.disorders) if d != 0.0]

    def forward(self, s: float) -> np.ndarray:
        m = np.eye(len(self.sec.states), dtype=complex)
        for perm in self.perms:
            m = _apply_heis_rows(m, perm, s)
        diag = np.ones(len(self.sec.states), dtype=complex)
        for q, d in self.disorders:
            diag *= _rz_diag(self.sec, q, 2 * d * s)
        m *= diag[:, None]
        return m * np.exp(1j * s * len(self.edges))

    def block(self, order: int, x: float, memo: dict) -> np.ndarray:
        from .synth import suzuki_p
        key = (order, x)
        if key not in memo:
            if order == 2:
                f = self.forward(x / 2)
                memo[key] = f.T @ f
            else:
                p = suzuki_p(order // 2)
                outer = self.block(order - 2, p * x, memo)
                outer2 = outer @ outer
                mid = self.block(order - 2, (1 - 4 * p) * x, memo)
                memo[key] = outer2 @ mid @ outer2
        return memo[key]


# ---------------------------------------------------------------------------
# Trotter error and r search

@dataclass(frozen=True)
class RSearchResult:
    r_min: int
    achieved_error: float
    evaluations: int
    error_below: float | None = None   # error at r_min - 1, when probed


class TrotterErrorModel:
    """Caches exact evolution and the layout for repeated error evaluations."""

    def __init__(self, h, order: int, mode: str = "preft", layout=None):
        from .synth import MODES, default_layout, suzuki_coefficients
        suzuki_coefficients(order)  # validates order
        if h.graph.n > MAX_QUBITS:
            raise CapacityError(f"{h.graph.n} qubits exceeds the simulator cap of {MAX_QUBITS}")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.h = h
        self.order = order
        self.mode = mode
        self.layout = layout if layout is not None else default_layout(h.graph)
        self._exact: list[np.ndarray] | None = None
        self._pf = [_SectorPF(h, self.layout, sec) for sec in _sectors(h.graph.n)]
        self.evaluations = 0

    @property
    def exact(self) -> list[np.ndarray]:
        if self._exact is None:
            self._exact = sector_exact_evolution(self.h)
        return self._exact

    def error(self, r: int) -> float:
        # heis macros: both lowerings are exact including phase, so the
        # algorithmic error is the same in either mode
        if r < 1:
            raise ValueError(f"r must be >= 1, got {r}")
        step = self.h.t / r
        self.evaluations += 1
        worst = 0.0
        for u, pf in zip(self.exact, self._pf):
            b = pf.block(self.order, step, {})
            worst = max(worst, float(np.linalg.norm(u - np.linalg.matrix_power(b, r), 2)))
        return worst


def trotter_error(h, order: int, r: int, mode: str = "preft", layout=None,
                  method: str = "sector") -> float:
    """Spectral distance between exp(-i t H) and r blocks of the product formula.

    ``method="dense"`` simulates the fully lowered circuit gate by gate; the
    default works blockwise on magnetization sectors and is far cheaper.
    """
    if method == "sector":
        return TrotterErrorModel(h, order, mode, layout).error(r)
    if method != "dense":
        raise ValueError(f"unknown method {method!r}")
    from .synth import build_pf_circuit
    circ = build_pf_circuit(h, order, r, mode, layout)
    return spectral_distance(exact_evolution(h), unitary_of(circ), phase_invariant=False)


R_LIMIT = 1 << 24


def find_min_r(h, order: int, eps_budget: float | None = None, mode: str = "preft",
               layout=None, model: TrotterErrorModel | None = None) -> RSearchResult:
    """Smallest r with trotter_error <= eps_budget.

    Doubles r from 1 until the error is within budget, then bisects the last
    bracket.  The answer is re-checked at r_min and r_min - 1, since the error
    need not be monotone in r.  The default budget is h.epsilon for pre-FT and
    h.epsilon / 2 for FT (the other half goes to rotation synthesis).
    """
    if eps_budget is None:
        eps_budget = h.epsilon if mode == "preft" else h.epsilon / 2
    if not eps_budget > 0:
        raise ValueError("error budget must be positive")
    model = model or TrotterErrorModel(h, order, mode, layout)
    cache: dict[int, float] = {}

    def err(r: int) -> float:
        if r not in cache:
            cache[r] = model.error(r)
        return cache[r]

    hi = 1
    while err(hi) > eps_budget:
        hi *= 2
        if hi > R_LIMIT:
            raise SearchFailure(f"error still above {eps_budget} at r = {R_LIMIT}")
    lo = hi // 2  # err(lo) > budget, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if err(mid) <= eps_budget:
            hi = mid
        else:
            lo = mid
    # bisection keeps err(hi) <= budget and err(hi - 1) > budget (or hi == 1)
    below = err(hi - 1) if hi > 1 else None
    return RSearchResult(hi, err(hi), len(cache), below)
