import math

import pytest
from hypothesis import given, strategies as st

from hamforge.circuit import (CNOT, CZ, CZ_ifc, CZPow, Circuit, CircuitError, CircuitParseError, Gate,
                              H, Heis, MeasX, MeasZ, Rx, Ry, Rz, S, Sdg, Swap, T, Tdg, X, X_ifc, Z,
                              Z_ifc, count_resources, parse, serialize, two_qubit_depth)
from hamforge.synth import heis_gate_preft, lower


def longest_chain(c):
    """Longest path in the two-qubit dependency DAG, by explicit DAG construction."""
    two = [g for g in c.ops if len(g.qubits) == 2]
    best = [1] * len(two)
    for i, g in enumerate(two):
        for j in range(i):
            if set(two[j].qubits) & set(g.qubits):
                best[i] = max(best[i], best[j] + 1)
    return max(best, default=0)


ONE = ["h", "x", "z", "s", "sdg", "t", "tdg"]
ROT = ["rx", "ry", "rz"]
TWO = ["cnot", "cz", "swap"]
TWO_P = ["czpow", "heis"]


@st.composite
def circuits(draw, max_qubits=5, max_gates=60, classical=True):
    n = draw(st.integers(2, max_qubits))
    ops = []
    nclb = 2 if classical else 0
    written = set()
    angles = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    for _ in range(draw(st.integers(0, max_gates))):
        kind = draw(st.sampled_from(ONE + ROT + TWO + TWO_P + (["measz", "measx", "x_ifc", "z_ifc", "cz_ifc"]
                                                               if classical else [])))
        q = draw(st.permutations(range(n)))[:2]
        if kind in ONE:
            ops.append(Gate(kind, (q[0],)))
        elif kind in ROT:
            ops.append(Gate(kind, (q[0],), draw(angles)))
        elif kind in TWO:
            ops.append(Gate(kind, tuple(q)))
        elif kind in TWO_P:
            ops.append(Gate(kind, tuple(q), draw(angles)))
        elif kind in ("measz", "measx"):
            c = draw(st.integers(0, nclb - 1))
            written.add(c)
            ops.append(Gate(kind, (q[0],), clbit=c))
        elif written:
            c = draw(st.sampled_from(sorted(written)))
            ops.append(Gate(kind, tuple(q) if kind == "cz_ifc" else (q[0],), clbit=c))
    return Circuit(n, ops, nclb)


class TestGate:
    def test_distinct_qubits(self):
        with pytest.raises(CircuitError):
            CNOT(1, 1)

    def test_finite_angle(self):
        with pytest.raises(CircuitError):
            Rz(math.inf, 0)

    def test_angle_required(self):
        with pytest.raises(CircuitError):
            Gate("rz", (0,))

    def test_unknown_kind(self):
        with pytest.raises(CircuitError):
            Gate("ccx", (0, 1))


class TestCircuit:
    def test_bounds(self):
        with pytest.raises(CircuitError):
            Circuit(2, [CNOT(0, 2)])

    def test_ifc_needs_prior_measurement(self):
        with pytest.raises(CircuitError):
            Circuit(2, [X_ifc(0, 1), MeasZ(0, 0)], num_clbits=1)
        Circuit(2, [MeasZ(0, 0), X_ifc(0, 1)], num_clbits=1)

    def test_concat_and_repeat(self):
        a = Circuit(2, [H(0)], global_phase=0.25)
        b = Circuit(3, [CNOT(1, 2)])
        c = a + b
        assert c.num_qubits == 3 and c.ops == (H(0), CNOT(1, 2))
        assert c.global_phase == 0.25
        assert a.repeat(3).ops == (H(0),) * 3
        assert a.repeat(3).global_phase == pytest.approx(0.75)


class TestResources:
    def test_two_cnots(self):
        r = count_resources(Circuit(2, [CNOT(0, 1), CNOT(0, 1)]))
        assert r.cnot_count == 2 and r.two_qubit_depth == 2

    def test_lowered_heis_has_three_cnots(self):
        assert count_resources(heis_gate_preft(0.3)).cnot_count == 3

    def test_empty(self):
        r = count_resources(Circuit(3))
        assert all(v == 0 for k, v in r.as_dict().items() if k != "macros")
        assert r.macros == {}

    def test_macros_tallied_separately(self):
        c = Circuit(2, [Heis(0.1, 0, 1), CZPow(0.3, 0, 1), T(0)])
        r = count_resources(c)
        assert r.macros == {"heis": 1, "czpow": 1}
        assert r.cnot_count == 0 and r.t_count == 1
        assert count_resources(lower(c, "preft")).cnot_count == 3

    def test_census(self):
        c = Circuit(3, [H(0), X(1), Z(2), S(0), Sdg(1), T(0), Tdg(1), Rx(0.1, 0), Ry(0.2, 1),
                        Rz(0.3, 2), CNOT(0, 1), CZ(1, 2), Swap(0, 2), MeasX(2, 0), CZ_ifc(0, 0, 1),
                        Z_ifc(0, 1), X_ifc(0, 2)], num_clbits=1, ancillas=(2,))
        r = count_resources(c)
        assert (r.cnot_count, r.t_count, r.rz_count) == (1, 2, 3)
        assert r.single_qubit_clifford_count == 7
        assert r.measurement_count == 1 and r.ancilla_count == 1
        assert r.other_two_qubit_count == 3

    def test_depth_examples(self):
        assert two_qubit_depth(Circuit(4, [CNOT(0, 1), CNOT(2, 3)])) == 1
        assert two_qubit_depth(Circuit(3, [CNOT(0, 1), CNOT(1, 2), CNOT(0, 1)])) == 3

    @given(circuits(max_gates=200, classical=False))
    def test_depth_matches_dag_oracle(self, c):
        d = two_qubit_depth(c)
        assert d == longest_chain(c)
        assert d <= sum(len(g.qubits) == 2 for g in c.ops)

    @given(circuits(), circuits())
    def test_additive(self, a, b):
        ra, rb, rab = count_resources(a), count_resources(b), count_resources(a + b)
        for f in ("cnot_count", "t_count", "rz_count", "single_qubit_clifford_count",
                  "measurement_count", "other_two_qubit_count"):
            assert getattr(rab, f) == getattr(ra, f) + getattr(rb, f)


class TestTextFormat:
    def test_cnot(self):
        assert parse("qubits 2\ncnot 0 1\n") == Circuit(2, [CNOT(0, 1)])

    def test_rz(self):
        assert parse("qubits 1\nrz 0.5 0\n").ops == (Rz(0.5, 0),)

    def test_grammar_example(self):
        c = parse("qubits 2\nclbits 1\nmeasx 0 -> 0\ncz_ifc 0 ? 0 1\n")
        assert c.num_clbits == 1 and c.ops == (MeasX(0, 0), CZ_ifc(0, 0, 1))

    def test_comments(self):
        c = parse("# header\nqubits 2  # two\n\nh 0 # gate\n")
        assert c.ops == (H(0),)

    def test_phase_and_ancillas(self):
        c = Circuit(3, [H(0)], global_phase=0.125, ancillas=(2,))
        text = serialize(c)
        assert "phase 0.125" in text and "ancillas 2" in text
        assert parse(text) == c

    def test_exact_angles(self):
        c = Circuit(1, [Rz(math.pi / 3, 0), Rz(1e-17, 0), Rz(-2.0 / 7.0, 0)])
        assert parse(serialize(c)) == c

    @pytest.mark.parametrize("text,line,col", [
        ("qubits 2\ncnot 0\n", 2, 7),
        ("qubits 2\nfoo 0\n", 2, 1),
        ("qubits 2\nrz abc 0\n", 2, 4),
        ("cnot 0 1\n", 1, 1),
        ("qubits 2\nmeasz 0 => 0\n", 2, 9),
        ("qubits 2\nh 0 1\n", 2, 5),
    ])
    def test_parse_errors(self, text, line, col):
        with pytest.raises(CircuitParseError) as exc:
            parse(text)
        assert (exc.value.line, exc.value.column) == (line, col)

    def test_out_of_range(self):
        with pytest.raises(CircuitError):
            parse("qubits 2\ncnot 0 2\n")

    @given(circuits())
    def test_round_trip(self, c):
        assert parse(serialize(c)) == c
        assert serialize(parse(serialize(c))) == serialize(c)
