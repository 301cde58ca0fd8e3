import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import kron_all, rz_oracle
from hamforge.circuit import count_resources
from hamforge.ftcost import (FIT_TABLE, CostModel, CostModelError, MissingFitError,
                             direct_rz_cost, estimate, fit_power_law, parse_cost_overrides,
                             per_gate_budget, r_from_fit, rz_cost, rz_overhead, tally_rotations,
                             weight, weight_trick_circuit, weight_trick_plan)
from hamforge.graphs import complete, cycle, random_regular
from hamforge.sim import spectral_distance, unitary_of
from hamforge.synth import DisorderedHeisenberg, build_pf_block

NO_RUS = CostModel(rus_enabled=False)


class TestBudget:
    def test_examples(self):
        assert per_gate_budget(0.5, 1, 1) == 0.5
        assert per_gate_budget(5e-4, 10**5, 0.665) == pytest.approx((5e-9) ** 0.665)
        assert per_gate_budget(5e-4, 10**5, 0.665) == pytest.approx(3.0e-6, rel=0.05)

    def test_smaller_p_is_looser(self):
        assert per_gate_budget(1e-3, 100, 0.665) > per_gate_budget(1e-3, 100, 0.875)

    @pytest.mark.parametrize("args", [(0.0, 1, 1), (1.0, 1, 1), (0.1, 0, 1), (0.1, 1.5, 1), (0.1, 1, 0)])
    def test_errors(self, args):
        with pytest.raises(ValueError):
            per_gate_budget(*args)


class TestRzCost:
    def test_operating_point(self):
        assert rz_cost(3.0e-6, NO_RUS) == math.ceil(3.0 * math.log2(1 / 3.0e-6) + 2.0) == 58

    def test_loose(self):
        assert rz_cost(0.5, NO_RUS) == 5

    def test_rus(self):
        # pick eps so that the direct cost is exactly 50
        eps = 2.0 ** -16
        assert direct_rz_cost(eps, NO_RUS) == 50
        assert rz_cost(eps, CostModel()) == 20
        over = rz_overhead(eps, CostModel())
        assert over.t_count == 20 and over.cnot_count <= 51

    def test_no_rus_overhead(self):
        assert rz_overhead(2.0 ** -16, NO_RUS).cnot_count == 0

    @given(st.floats(1e-15, 0.9))
    def test_monotone_in_eps(self, eps):
        assert rz_cost(eps, NO_RUS) >= rz_cost(min(0.99, eps * 2), NO_RUS)
        assert rz_cost(eps, CostModel()) <= rz_cost(eps, NO_RUS)

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            rz_cost(0.0, NO_RUS)


class TestCostModel:
    def test_validation(self):
        with pytest.raises(CostModelError):
            CostModel(p_mixing=0.0)
        with pytest.raises(CostModelError):
            CostModel(rus_factor=0.5)

    def test_exponent(self):
        assert CostModel().budget_exponent == 0.665
        assert CostModel(mixing_enabled=False).budget_exponent == 0.875

    def test_overrides(self):
        m = parse_cost_overrides("# tuned\ngrid_A = 2.5\nrus_enabled=false  # off\n")
        assert m.grid_A == 2.5 and not m.rus_enabled and m.p_mixing == 0.665

    @pytest.mark.parametrize("text", ["grid_A", "nope=1", "grid_A=x", "rus_enabled=maybe"])
    def test_override_errors(self, text):
        with pytest.raises(CostModelError):
            parse_cost_overrides(text)


class TestWeightTrick:
    def test_m35(self):
        p = weight_trick_plan(35)
        assert (p.adders, p.t_cost, p.rz_applications) == (32, 128, 6)

    def test_m1(self):
        p = weight_trick_plan(1)
        assert (p.adders, p.t_cost, p.rz_applications) == (0, 0, 1)

    @pytest.mark.parametrize("j", range(1, 12))
    def test_powers_of_two(self, j):
        assert weight_trick_plan(2**j).adders == 2**j - 1

    def test_popcount_oracle(self):
        m = np.arange(1, 10**6 + 1, dtype=np.int64)
        pop = np.zeros_like(m)
        x = m.copy()
        while x.any():
            pop += x & 1
            x >>= 1
        ours = np.array([weight(int(v)) for v in m[:: 997]])
        assert (ours == pop[:: 997]).all()
        # the closed form, checked over the whole range
        assert all(weight_trick_plan(int(v)).t_cost == 4 * (int(v) - int(p)) for v, p in zip(m[::4999], pop[::4999]))
        assert (4 * (m - pop) >= 0).all()

    def test_beats_direct(self):
        cost = 50
        for m in range(3, 1001):
            p = weight_trick_plan(m)
            assert p.t_cost + p.rz_applications * cost < m * cost
        # m = 2 is the one exception: a half adder buys nothing at 2 rotations
        p = weight_trick_plan(2)
        assert p.t_cost + p.rz_applications * cost == 2 * cost + 4

    @pytest.mark.parametrize("m", range(2, 8))
    def test_circuit_equivalence(self, m, rng):
        for theta in rng.uniform(-math.pi, math.pi, 20):
            c = weight_trick_circuit(m, theta)
            target = kron_all([rz_oracle(theta)] * m)
            assert spectral_distance(unitary_of(c), target, phase_invariant=True) <= 1e-9

    def test_circuit_t_census(self):
        for m in range(2, 8):
            c = weight_trick_circuit(m, 0.3)
            r = count_resources(c)
            assert r.t_count == weight_trick_plan(m).t_cost
            assert r.rz_count == weight_trick_plan(m).rz_applications

    def test_zero_angle(self):
        c = weight_trick_circuit(2, 0.0)
        assert spectral_distance(unitary_of(c), np.eye(4), phase_invariant=True) <= 1e-12

    def test_bad_m(self):
        with pytest.raises(ValueError):
            weight_trick_plan(0)


class TestFits:
    def test_exact_power_law(self):
        f = fit_power_law([(n, 5 * n**0.5) for n in (4, 9, 16, 25)])
        assert (f.c, f.alpha) == (pytest.approx(5), pytest.approx(0.5))
        assert f.residual <= 1e-12

    def test_recovers_table_entry(self):
        f = fit_power_law([(n, 116.3 * n**0.169) for n in (8, 10, 12)])
        assert abs(f.c - 116.3) <= 1e-6 * 116.3 and abs(f.alpha - 0.169) <= 1e-6

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_power_law([(4, 1.0), (8, 2.0)])

    def test_r_from_fit(self):
        assert r_from_fit(3, 70, 4, "preft") == math.ceil(116.3 * 70**0.169)
        assert r_from_fit(3, 70, 4, "ft") == math.ceil(126 * 70**0.215)
        assert len(FIT_TABLE) == 14

    def test_missing_fit(self):
        with pytest.raises(MissingFitError):
            r_from_fit(6, 20, 4, "preft")


class TestTally:
    def test_k4_block(self):
        h = DisorderedHeisenberg.random(complete(4), 0, t=1.0)
        tl = tally_rotations(build_pf_block(h, 2, 1, lower_gates=False))
        assert tl.heis == 12 and tl.single_rz == 8
        assert sorted(tl.batches) == [2] * 6


class TestEstimate:
    def disorders(self, g, seed=0):
        return DisorderedHeisenberg.random(g, seed, t=1.0).disorders

    def test_k4_unoptimized(self):
        g = complete(4)
        rep = estimate(g, self.disorders(g), 4, r=1, t=1.0, use_optimizer=False)
        assert rep.cnot == 180
        assert 90 <= rep.depth2q <= 120

    def test_optimizer_helps(self):
        g = random_regular(10, 3, 2)
        a = estimate(g, self.disorders(g), 4, r=5, t=1.0)
        assert a.cnot < a.cnot_unoptimized

    def test_extrapolation_matches_exact(self):
        g = cycle(6)
        d = self.disorders(g)
        approx = estimate(g, d, 4, r=4, t=1.0)
        full = estimate(g, d, 4, r=4, t=1.0, exact=True)
        assert (approx.cnot, approx.depth2q) == (full.cnot, full.depth2q)
        fa = estimate(g, d, 4, r=4, t=1.0, mode="ft")
        ff = estimate(g, d, 4, r=4, t=1.0, mode="ft", exact=True)
        assert fa.t_count == ff.t_count

    @pytest.mark.parametrize("mode,field", [("preft", "cnot"), ("ft", "t_count")])
    def test_monotone_in_r(self, mode, field):
        g = random_regular(8, 3, 3)
        d = self.disorders(g)
        vals = [getattr(estimate(g, d, 4, r=r, t=1.0, mode=mode), field) for r in (1, 2, 5, 20)]
        assert vals == sorted(vals)

    def test_monotone_in_edges(self):
        d = [0.1] * 8
        small = estimate(cycle(8), d, 4, r=3, t=1.0, mode="ft")
        big = estimate(random_regular(8, 3, 1), d, 4, r=3, t=1.0, mode="ft")
        assert big.t_count > small.t_count

    def test_flags_reduce_cost(self):
        g = random_regular(8, 3, 3)
        d = self.disorders(g)
        full = estimate(g, d, 4, r=10, t=1.0, mode="ft")
        plain = estimate(g, d, 4, r=10, t=1.0, mode="ft",
                         model=CostModel(rus_enabled=False, weight_trick_enabled=False))
        assert full.t_count < plain.t_count
        assert plain.savings["t_count_baseline"] == plain.t_count

    def test_from_fit_requires_table_entry(self):
        g = random_regular(8, 6, 0)
        with pytest.raises(MissingFitError):
            estimate(g, [0.0] * 8, 4)

    def test_bad_r(self):
        with pytest.raises(ValueError):
            estimate(complete(4), [0.0] * 4, 4, r=0)
