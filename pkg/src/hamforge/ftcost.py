"""Fault-tolerant and physical-level resource accounting.

Rotation synthesis is modelled, not performed: an Rz with error budget e costs
ceil(A log2(1/e) + B) T gates.  Mixing over several approximations is folded
into the budget exponent p, and repeat-until-success divides the expected
T-count by a constant factor.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .circuit import CNOT, Circuit, Gate, Rz, count_resources, two_qubit_depth
from .graphs import ColoredLayout, Graph
from .optimizer import compile_circuit, optimize
from .synth import (DisorderedHeisenberg, Mode, MODES, build_pf_block, default_layout,
                    stages_per_block, temporary_and, uncompute_and)

WEIGHT_TRICK_MAX_M = 7
ANGLE_TOL = 1e-12


class CostModelError(ValueError):
    pass


class MissingFitError(LookupError):
    pass


@dataclass(frozen=True)
class CostModel:
    grid_A: float = 3.0
    grid_B: float = 2.0
    p_direct: float = 0.875
    p_mixing: float = 0.665
    mixing_enabled: bool = True
    rus_enabled: bool = True
    rus_factor: float = 2.5
    weight_trick_enabled: bool = True
    approx_depth: float | None = None   # depth of one Rz approximation; no default value known

    def __post_init__(self):
        if not self.grid_A > 0:
            raise CostModelError("grid_A must be positive")
        for name in ("p_direct", "p_mixing"):
            p = getattr(self, name)
            if not 0 < p <= 1:
                raise CostModelError(f"{name} must lie in (0, 1], got {p}")
        if not self.rus_factor >= 1:
            raise CostModelError("rus_factor must be >= 1")

    @property
    def budget_exponent(self) -> float:
        return self.p_mixing if self.mixing_enabled else self.p_direct

    def with_flags(self, **flags) -> CostModel:
        return replace(self, **flags)

    def as_dict(self) -> dict:
        return asdict(self)


_OVERRIDE_KEYS = {"grid_A", "grid_B", "p_direct", "p_mixing", "rus_factor", "approx_depth"}
_FLAG_KEYS = {"mixing_enabled", "rus_enabled", "weight_trick_enabled"}


def parse_cost_overrides(text: str, base: CostModel | None = None) -> CostModel:
    """Apply ``key=value`` lines (``#`` starts a comment) to a cost model."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise CostModelError(f"line {lineno}: expected key=value")
        if key in _OVERRIDE_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise CostModelError(f"line {lineno}: {key} needs a number, got {val!r}") from None
        elif key in _FLAG_KEYS:
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise CostModelError(f"line {lineno}: {key} needs a boolean, got {val!r}")
            values[key] = low in ("true", "1", "yes")
        else:
            raise CostModelError(f"line {lineno}: unknown cost-model key {key!r}")
    return replace(base or CostModel(), **values)


def load_cost_overrides(path, base: CostModel | None = None) -> CostModel:
    return parse_cost_overrides(Path(path).read_text(), base)


# ---------------------------------------------------------------------------
# rotation costs

def per_gate_budget(eps_approx: float, n_rz: int, p: float) -> float:
    """Per-rotation synthesis error (eps_approx / n_rz) ** p."""
    if not 0 < eps_approx < 1:
        raise ValueError(f"eps_approx must lie in (0, 1), got {eps_approx}")
    if int(n_rz) != n_rz or n_rz < 1:
        raise ValueError(f"n_rz must be a positive integer, got {n_rz}")
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return (eps_approx / n_rz) ** p


def direct_rz_cost(eps_gate: float, model: CostModel) -> int:
    if not 0 < eps_gate < 1:
        raise ValueError(f"per-gate error must lie in (0, 1), got {eps_gate}")
    return math.ceil(model.grid_A * math.log2(1 / eps_gate) + model.grid_B)


def rz_cost(eps_gate: float, model: CostModel) -> int:
    """Expected T-count of one Rz at per-gate error eps_gate."""
    base = direct_rz_cost(eps_gate, model)
    return math.ceil(base / model.rus_factor) if model.rus_enabled else base


@dataclass(frozen=True)
class RzOverhead:
    t_count: int
    cnot_count: int
    ancillas: int


def rz_overhead(eps_gate: float, model: CostModel) -> RzOverhead:
    """T-count plus the Clifford/ancilla bookkeeping that RUS adds per rotation."""
    base = direct_rz_cost(eps_gate, model)
    if not model.rus_enabled:
        return RzOverhead(base, 0, 0)
    return RzOverhead(math.ceil(base / model.rus_factor), base + 1, 1)


# ---------------------------------------------------------------------------
# Hamming-weight batching of equal-angle rotations

def weight(m: int) -> int:
    return bin(m).count("1")


@dataclass(frozen=True)
class WeightTrickPlan:
    m: int
    adders: int
    t_cost: int
    rz_applications: int
    ancillas: int


def weight_trick_plan(m: int) -> WeightTrickPlan:
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    m = int(m)
    adders = m - weight(m)
    bits = m.bit_length()
    return WeightTrickPlan(m, adders, 4 * adders, bits, bits + adders)


def _adder_network(m: int) -> tuple[list[tuple], dict[int, int], int]:
    """Steps ('cnot', c, t) / ('and', a, b, target) that sum m bits.

    Returns the steps, the register qubit holding each binary digit, and the
    total qubit count.  Data qubits are 0..m-1; carries are fresh ancillas.
    """
    levels: dict[int, list[int]] = {0: list(range(m))}
    steps: list[tuple] = []
    nxt = m
    j = 0
    while j in levels:
        bits = levels[j]
        while len(bits) >= 2:
            c = nxt
            nxt += 1
            if len(bits) >= 3:
                x, y, z = bits.pop(0), bits.pop(0), bits.pop(0)
                steps += [("cnot", z, x), ("cnot", z, y), ("and", x, y, c), ("cnot", z, c),
                          ("cnot", x, z), ("cnot", y, z)]
                bits.append(z)      # sum
            else:
                x, y = bits.pop(0), bits.pop(0)
                steps += [("and", x, y, c), ("cnot", x, y)]
                bits.append(y)
            levels.setdefault(j + 1, []).append(c)
        j += 1
    digits = {lvl: qs[0] for lvl, qs in levels.items() if qs}
    return steps, digits, nxt


def weight_trick_circuit(m: int, theta: float) -> Circuit:
    """m parallel Rz(theta) realised through a Hamming-weight register.

    The data-qubit operator equals Rz(theta) on each of qubits 0..m-1 exactly,
    global phase included; qubits m.. are |0>-initialised ancillas.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if m > WEIGHT_TRICK_MAX_M:
        raise ValueError(f"weight_trick_circuit is limited to m <= {WEIGHT_TRICK_MAX_M}")
    if m == 1:
        return Circuit(1, [Rz(theta, 0)])
    steps, digits, nq = _adder_network(m)
    ops: list[Gate] = []
    for st in steps:
        ops.extend([CNOT(st[1], st[2])] if st[0] == "cnot" else temporary_and(*st[1:]))
    # Rz(2^j theta) on digit j gives exp(i theta w) up to exp(-i theta (2^L - 1) / 2)
    for lvl, q in sorted(digits.items()):
        ops.append(Rz(theta * 2 ** lvl, q))
    for st in reversed(steps):
        ops.extend([CNOT(st[1], st[2])] if st[0] == "cnot" else uncompute_and(*st[1:], clbit=0))
    top = max(digits) + 1
    phase = -theta * m / 2 + theta * (2 ** top - 1) / 2
    return Circuit(nq, ops, num_clbits=1, global_phase=phase, ancillas=tuple(range(m, nq)))


# ---------------------------------------------------------------------------
# fitted r scaling, r = c * n ** alpha

FIT_TABLE: dict[tuple[int, int, str], tuple[float, float]] = {
    (3, 4, "preft"): (116.3, 0.169), (4, 4, "preft"): (66.4, 0.331), (5, 4, "preft"): (30.1, 0.602),
    (3, 6, "preft"): (12.5, 0.564), (4, 6, "preft"): (7.05, 0.759), (5, 6, "preft"): (4.24, 0.883),
    (7, 6, "preft"): (7.11, 0.476),
    (3, 4, "ft"): (126.0, 0.215), (4, 4, "ft"): (80.5, 0.328), (5, 4, "ft"): (34.6, 0.620),
    (3, 6, "ft"): (15.9, 0.493), (4, 6, "ft"): (7.82, 0.751), (5, 6, "ft"): (5.26, 0.826),
    (7, 6, "ft"): (7.61, 0.490),
}


def r_from_fit(k: int, n: int, order: int, mode: Mode,
               fits: dict[tuple[int, int, str], tuple[float, float]] | None = None) -> int:
    table = FIT_TABLE if fits is None else fits
    try:
        c, alpha = table[(k, order, mode)]
    except KeyError:
        raise MissingFitError(f"no r fit for k={k}, order={order}, mode={mode}") from None
    return max(1, math.ceil(c * n ** alpha))


@dataclass(frozen=True)
class PowerLawFit:
    c: float
    alpha: float
    residual: float


def fit_power_law(points) -> PowerLawFit:
    """Least-squares line through (ln n, ln r); residual is the RMS in log space."""
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(n <= 0 or r <= 0 for n, r in pts):
        raise ValueError("points must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([r for _, r in pts])
    if np.ptp(x) == 0:
        raise ValueError("need at least two distinct n values")
    alpha, intercept = np.polyfit(x, y, 1)
    resid = y - (alpha * x + intercept)
    return PowerLawFit(float(math.exp(intercept)), float(alpha), float(np.sqrt(np.mean(resid ** 2))))


# ---------------------------------------------------------------------------
# end-to-end estimates

@dataclass(frozen=True)
class RotationTally:
    """Per-circuit counts that feed the FT cost model."""
    heis: int = 0
    batches: tuple[int, ...] = ()      # sizes m of equal-angle parallel heis runs
    single_rz: int = 0                 # rotations costed one by one (disorder)

    @property
    def adders(self) -> int:
        return sum(m - weight(m) for m in self.batches)

    @property
    def batched_rotations(self) -> int:
        return sum(m.bit_length() for m in self.batches)


def tally_rotations(c: Circuit) -> RotationTally:
    """Group consecutive equal-angle heis gates on disjoint qubits into batches."""
    batches: list[int] = []
    cur_angle, cur_qubits = None, set()
    heis = single = 0

    def close():
        nonlocal cur_angle, cur_qubits
        if cur_qubits:
            batches.append(len(cur_qubits) // 2)
        cur_angle, cur_qubits = None, set()

    for g in c.ops:
        if g.kind == "heis":
            heis += 1
            same = cur_angle is not None and abs(g.angle - cur_angle) <= ANGLE_TOL * max(1.0, abs(g.angle))
            if not same or cur_qubits & set(g.qubits):
                close()
                cur_angle = g.angle
            cur_qubits |= set(g.qubits)
        else:
            close()
            if g.kind in ("rz", "rx", "ry", "czpow"):
                single += 1
    close()
    return RotationTally(heis, tuple(batches), single)


def _extrapolate(c1: float, c2: float, r: int) -> float:
    # block 1 carries the boundary terms; each further block adds c2 - c1
    return c1 + (r - 1) * (c2 - c1)


@dataclass
class EstimateReport:
    mode: str
    order: int
    r: int
    n: int
    k: int
    colors_used: int
    stages: int
    cnot: int | None = None
    depth2q: int | None = None
    cnot_unoptimized: int | None = None
    depth2q_unoptimized: int | None = None
    t_count: int | None = None
    n_rz: int | None = None
    eps_gate: float | None = None
    rz_t_cost: int | None = None
    heis_count: int | None = None
    adders: int | None = None
    rus_cnot_overhead: int | None = None
    ft_depth_estimate: str | None = None
    savings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    cost_model: dict | None = None

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _k_of(g: Graph) -> int:
    return g.max_degree()


def estimate(g: Graph, disorders, order: int, model: CostModel | None = None,
             r: int | str = "from_fit", mode: Mode = "preft", epsilon: float = 1e-3,
             t: float | None = None, layout: ColoredLayout | None = None,
             fits: dict | None = None, exact: bool = False,
             use_optimizer: bool = True) -> EstimateReport:
    """Resource estimate for r blocks of the order-`order` product formula.

    Counts are measured on optimized 1- and 2-block circuits and extrapolated
    linearly in r (``exact=True`` optimizes the full circuit instead).  With
    ``use_optimizer=False`` the raw circuit is counted.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    model = model or CostModel()
    h = DisorderedHeisenberg(g, tuple(disorders), t, epsilon)
    k = _k_of(g)
    if r == "from_fit":
        r = r_from_fit(k, g.n, order, mode, fits)
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 1:
        raise ValueError(f"r must be a positive integer or 'from_fit', got {r!r}")
    r = int(r)
    layout = layout if layout is not None else default_layout(g)
    stages = stages_per_block(order)
    rep = EstimateReport(mode, order, r, g.n, k, layout.colors_used, stages * r)
    block = build_pf_block(h, order, r, layout, mode, lower_gates=False)
    if mode == "preft":
        _preft_counts(rep, block, r, exact, use_optimizer)
    else:
        _ft_counts(rep, block, r, h.epsilon, model, exact, use_optimizer)
        rep.cost_model = model.as_dict()
    return rep


def _preft_counts(rep: EstimateReport, block: Circuit, r: int, exact: bool,
                  use_optimizer: bool) -> None:
    rep.cnot_unoptimized = 3 * sum(g.kind == "heis" for g in block.ops) * r
    rep.depth2q_unoptimized = 3 * rep.colors_used * rep.stages
    if not use_optimizer:
        rep.cnot, rep.depth2q = rep.cnot_unoptimized, rep.depth2q_unoptimized
        return
    if exact:
        full, _ = compile_circuit(block.repeat(r), "preft")
        rep.cnot = count_resources(full).cnot_count
        rep.depth2q = two_qubit_depth(full)
        return
    one, _ = compile_circuit(block, "preft")
    two, _ = compile_circuit(block.repeat(2), "preft")
    c1, c2 = count_resources(one).cnot_count, count_resources(two).cnot_count
    rep.cnot = round(_extrapolate(c1, c2, r))
    rep.depth2q = round(_extrapolate(two_qubit_depth(one), two_qubit_depth(two), r))


def _ft_tally(block: Circuit, r: int, exact: bool,
              use_optimizer: bool = True) -> tuple[float, float, float, float, float]:
    def counts(c: Circuit):
        tl = tally_rotations(optimize(c)[0] if use_optimizer else c)
        return (tl.heis, tl.adders, tl.batched_rotations, tl.single_rz, sum(tl.batches))

    if exact:
        return counts(block.repeat(r))
    one, two = counts(block), counts(block.repeat(2))
    return tuple(_extrapolate(a, b, r) for a, b in zip(one, two))


def _ft_t_count(heis, adders, batched, single, batched_m, epsilon, model) -> tuple[int, int, float, int]:
    rotations = (batched if model.weight_trick_enabled else batched_m) + single
    n_rz = max(1, round(rotations))
    eps_gate = per_gate_budget(epsilon / 2, n_rz, model.budget_exponent)
    c_rz = rz_cost(eps_gate, model)
    t = 4 * heis + (4 * adders if model.weight_trick_enabled else 0) + n_rz * c_rz
    return round(t), n_rz, eps_gate, c_rz


def _ft_counts(rep: EstimateReport, block: Circuit, r: int, epsilon: float,
               model: CostModel, exact: bool, use_optimizer: bool) -> None:
    heis, adders, batched, single, batched_m = _ft_tally(block, r, exact, use_optimizer)
    args = (heis, adders, batched, single, batched_m, epsilon)
    rep.t_count, rep.n_rz, rep.eps_gate, rep.rz_t_cost = _ft_t_count(*args, model)
    rep.heis_count = round(heis)
    rep.adders = round(adders) if model.weight_trick_enabled else 0
    if model.rus_enabled:
        rep.rus_cnot_overhead = rep.n_rz * (direct_rz_cost(rep.eps_gate, model) + 1)
    a = "a" if model.approx_depth is None else format(model.approx_depth, "g")
    rep.ft_depth_estimate = f"O({rep.colors_used} * (log2({rep.n}) + {a})) per stage, {rep.stages} stages"

    def t_with(trick: bool, rus: bool) -> int:
        return _ft_t_count(*args, model.with_flags(weight_trick_enabled=trick, rus_enabled=rus))[0]

    base, trick, both = t_with(False, False), t_with(True, False), t_with(True, True)
    rus_only = t_with(False, True)
    # incremental: batching first, then RUS on top of the batched circuit
    rep.savings = {
        "t_count_baseline": base,
        "t_count_weight_trick": trick,
        "t_count_weight_trick_rus": both,
        "t_count_rus": rus_only,
        "weight_trick_saving": 1 - trick / base,
        "rus_saving": 1 - both / trick,
        "weight_trick_saving_with_rus": 1 - both / rus_only,
        "rus_saving_without_weight_trick": 1 - rus_only / base,
    }
    for key, lo, hi in (("weight_trick_saving", 0.51, 0.60), ("rus_saving", 0.44, 0.50)):
        v = rep.savings[key]
        if not lo <= v <= hi:
            rep.warnings.append(f"{key} = {v:.3f} outside the expected band [{lo}, {hi}]")
