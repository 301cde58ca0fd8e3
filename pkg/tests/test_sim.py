import math

import numpy as np
import pytest
from hypothesis import given
from scipy.linalg import expm

from conftest import XXYYZZ, Z, hamiltonian_oracle, rz_oracle
from hamforge.circuit import CNOT, Circuit, H, MeasZ, X
from hamforge.graphs import Graph, complete, cycle, path, random_regular
from hamforge.sim import (CapacityError, NondeterministicCircuitError, TrotterErrorModel,
                          branch_operators, exact_evolution, find_min_r, hamiltonian_matrix,
                          sector_circuit_unitary, sector_exact_evolution, spectral_distance,
                          trotter_error, unitary_of)
from hamforge.synth import DisorderedHeisenberg, build_pf_circuit, cnot_from_heisenberg, cz_gadget
from test_circuit import circuits


class TestUnitaryOf:
    def test_hh_identity(self):
        assert spectral_distance(unitary_of(Circuit(1, [H(0), H(0)])), np.eye(2)) <= 1e-12

    def test_qubit_zero_is_msb(self):
        u = unitary_of(Circuit(2, [X(0)]))
        assert u[2, 0] == 1

    def test_global_phase(self):
        u = unitary_of(Circuit(1, [], global_phase=0.4))
        assert u[0, 0] == pytest.approx(np.exp(0.4j))

    def test_cz_gadget_is_cz(self):
        assert spectral_distance(unitary_of(cz_gadget(1.0)), np.diag([1, 1, 1, -1])) <= 1e-10

    def test_lone_measurement_rejected(self):
        with pytest.raises(NondeterministicCircuitError):
            unitary_of(Circuit(1, [MeasZ(0, 0)], num_clbits=1))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            unitary_of(Circuit(13, [CNOT(0, 12)]))

    @given(circuits(max_qubits=4, max_gates=25, classical=False),
           circuits(max_qubits=4, max_gates=25, classical=False))
    def test_composition(self, a, b):
        n = max(a.num_qubits, b.num_qubits)
        a2, b2 = Circuit(n, a.ops), Circuit(n, b.ops)
        lhs = unitary_of(a2 + b2)
        assert spectral_distance(lhs, unitary_of(b2) @ unitary_of(a2)) <= 1e-9

    def test_gadget_branches_agree(self, rng):
        for a in rng.uniform(-2, 2, 100):
            ops = branch_operators(cz_gadget(a))
            assert len(ops) == 2
            assert spectral_distance(ops[0], ops[1]) <= 1e-10

    def test_cnot_from_heisenberg(self):
        u = unitary_of(cnot_from_heisenberg())
        assert spectral_distance(u, np.eye(4)[[0, 1, 3, 2]], phase_invariant=True) <= 1e-9


class TestSpectralDistance:
    def test_examples(self, rng):
        a = rng.normal(size=(4, 4))
        u = expm(1j * (a + a.T))
        assert spectral_distance(u, u) == 0
        assert spectral_distance(np.eye(2), Z) == pytest.approx(2)
        assert spectral_distance(np.eye(2), np.exp(0.7j) * np.eye(2), phase_invariant=True) <= 1e-12

    def test_mismatch(self):
        with pytest.raises(ValueError):
            spectral_distance(np.eye(2), np.eye(4))

    def test_rz_period(self):
        assert spectral_distance(rz_oracle(0.3), rz_oracle(0.3 + 2 * math.pi), phase_invariant=True) <= 1e-12
        assert spectral_distance(rz_oracle(0.3), rz_oracle(0.3 + 2 * math.pi)) == pytest.approx(2)

    def test_phase_invariant_is_minimum_over_grid(self, rng):
        # grid oracle: min over phi of ||u - e^{i phi} v||
        for _ in range(20):
            a = rng.normal(size=(3, 3))
            u = expm(0.3j * (a + a.T))
            v = np.eye(3)
            grid = min(np.linalg.norm(u - np.exp(1j * p) * v, 2) for p in np.linspace(-math.pi, math.pi, 20001))
            got = spectral_distance(u, v, phase_invariant=True)
            assert got <= grid + 1e-9 and got >= grid - 1e-3


class TestExactEvolution:
    def test_hamiltonian_matches_oracle(self, rng):
        g = random_regular(6, 3, 1)
        h = DisorderedHeisenberg.random(g, 2, t=1.0)
        assert np.allclose(hamiltonian_matrix(h), hamiltonian_oracle(6, g.edges, h.disorders))

    def test_single_edge_eigenphases(self):
        h = DisorderedHeisenberg(Graph(2, [(0, 1)]), [0.0, 0.0], t=math.pi / 4)
        phases = np.sort(np.angle(np.linalg.eigvals(exact_evolution(h))))
        assert phases == pytest.approx(sorted([-math.pi / 4] * 3 + [3 * math.pi / 4]), abs=1e-12)
        assert spectral_distance(exact_evolution(h), expm(-1j * math.pi / 4 * XXYYZZ)) <= 1e-12

    def test_tiny_time_is_near_identity(self):
        h = DisorderedHeisenberg.random(complete(4), 0, t=1e-12)
        assert spectral_distance(exact_evolution(h), np.eye(16)) <= 1e-10

    def test_pure_disorder(self):
        h = DisorderedHeisenberg(Graph(1, []), [1.0], t=0.8)
        assert np.allclose(exact_evolution(h), np.diag([np.exp(-0.8j), np.exp(0.8j)]))

    def test_group_property(self):
        g = cycle(5)
        d = [0.1, -0.4, 0.9, 0.0, -1.0]
        u = lambda t: exact_evolution(DisorderedHeisenberg(g, d, t=t))
        assert spectral_distance(u(0.7) @ u(1.6), u(2.3)) <= 1e-9

    def test_sectors_match_dense(self):
        h = DisorderedHeisenberg.random(random_regular(6, 3, 3), 1, t=1.5)
        dense = exact_evolution(h)
        from hamforge.sim import _sectors
        for sec, block in zip(_sectors(6), sector_exact_evolution(h)):
            assert np.allclose(dense[np.ix_(sec.states, sec.states)], block, atol=1e-12)

    def test_sector_circuit_matches_dense(self):
        h = DisorderedHeisenberg.random(path(4), 7, t=0.9)
        c = build_pf_circuit(h, 4, 2, lower_gates=False)
        dense = unitary_of(c)
        from hamforge.sim import _sectors
        for sec, block in zip(_sectors(4), sector_circuit_unitary(c, 4)):
            assert np.allclose(dense[np.ix_(sec.states, sec.states)], block, atol=1e-12)


def four_node():
    return DisorderedHeisenberg(cycle(4), [0.3, -0.8, 0.5, 0.1], t=1.0)


class TestTrotterError:
    @pytest.mark.parametrize("order", [4, 6])
    def test_empirical_order(self, order):
        model = TrotterErrorModel(four_node(), order)
        rs = [4, 8, 16, 32, 64]
        errs = [model.error(r) for r in rs]
        assert all(a > b for a, b in zip(errs, errs[1:]))
        slope = np.polyfit(np.log(rs), np.log(errs), 1)[0]
        assert -order - 0.4 <= slope <= -order + 0.4

    def test_order2_slope(self):
        model = TrotterErrorModel(four_node(), 2)
        errs = [model.error(r) for r in (16, 32, 64)]
        slope = np.polyfit(np.log([16, 32, 64]), np.log(errs), 1)[0]
        assert slope == pytest.approx(-2, abs=0.2)

    def test_converges_on_two_qubits(self):
        h = DisorderedHeisenberg(Graph(2, [(0, 1)]), [0.7, -0.2], t=1.0)
        assert trotter_error(h, 2, 10**4) <= 1e-6

    def test_order4_beats_order2(self):
        h = four_node()
        assert trotter_error(h, 4, 8) < trotter_error(h, 2, 8)

    @pytest.mark.parametrize("order,mode", [(2, "preft"), (4, "preft"), (4, "ft")])
    def test_sector_matches_dense(self, order, mode):
        h = DisorderedHeisenberg.random(random_regular(6, 3, 4), 2, t=2.0)
        a = trotter_error(h, order, 3, mode)
        b = trotter_error(h, order, 3, mode, method="dense")
        assert a == pytest.approx(b, abs=1e-12)

    def test_bad_r(self):
        with pytest.raises(ValueError):
            trotter_error(four_node(), 4, 0)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            trotter_error(four_node(), 3, 1)


class TestFindMinR:
    def test_loose_budget(self):
        res = find_min_r(four_node(), 4, 2.0)
        assert res.r_min == 1 and res.error_below is None

    def test_bracket_is_verified(self):
        h = four_node()
        res = find_min_r(h, 4, 1e-4)
        assert res.achieved_error <= 1e-4 < res.error_below
        assert trotter_error(h, 4, res.r_min) == pytest.approx(res.achieved_error)
        assert trotter_error(h, 4, res.r_min - 1) > 1e-4

    def test_ft_needs_at_least_preft(self):
        h = DisorderedHeisenberg.random(random_regular(6, 3, 5), 0, t=3.0)
        assert find_min_r(h, 4, mode="ft").r_min >= find_min_r(h, 4, mode="preft").r_min

    def test_default_budgets(self):
        h = four_node()
        assert find_min_r(h, 2).r_min == find_min_r(h, 2, h.epsilon).r_min
        assert find_min_r(h, 2, mode="ft").r_min == find_min_r(h, 2, h.epsilon / 2).r_min

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            find_min_r(four_node(), 4, 0.0)
