import numpy as np
import pytest

from qkinetic.cumulants import (
    ClusterArgument, declustered_scattering_cumulant, duhamel_quadrature, duhamel_residual,
    partition_cumulant, reduced_cumulant, reduced_cumulant_array, reduced_scattering_cumulant,
    second_order_integrand, v2_duhamel_residual, v_direct_array, v_operator_direct,
    v_operator_recursive, v_recursive_array,
)
from qkinetic.model import (
    ModelSpec, group_array, interaction_array, scattering_array,
)
from qkinetic.operators import DimensionError, ManyBodyOperator, max_abs, random_hermitian


def rand_op(rng, total, d=2):
    return ManyBodyOperator(random_hermitian(d**total, rng), d)


def A_hat(m, t, i, X, f, total):
    """Reduced scattering cumulant on cluster ``i`` (0-based) plus labels ``X``."""
    return reduced_cumulant_array(m, t, "scattering", tuple(i), tuple(X), f, total)


def v3_by_hand(m, t, s, f):
    """``V_3({Y}, s+1, s+2)`` written out term by term from its low-order form."""
    tot = s + 2
    Y = range(s)
    p1, p2 = s, s + 1
    out = A_hat(m, t, Y, (p1, p2), f, tot)
    inner = sum(A_hat(m, t, (i,), (p2,), f, tot) for i in range(s + 1))
    out = out - 2 * A_hat(m, t, Y, (p1,), inner, tot)
    bracket = sum(A_hat(m, t, (i,), (p1, p2), f, tot) for i in range(s))
    nested = np.zeros_like(f)
    for i1 in range(s):
        for i2 in range(s + 1):
            nested += A_hat(m, t, (i1,), (p1,), A_hat(m, t, (i2,), (p2,), f, tot), tot)
    bracket = bracket - 2 * nested
    for i1 in range(s):
        for i2 in range(s):
            if i1 != i2:
                bracket = bracket + A_hat(m, t, (i1,), (p1,),
                                          A_hat(m, t, (i2,), (p2,), f, tot), tot)
    return out - A_hat(m, t, Y, (), bracket, tot)


def v2_by_hand(m, t, s, f):
    tot = s + 1
    inner = sum(A_hat(m, t, (i,), (s,), f, tot) for i in range(s))
    return A_hat(m, t, range(s), (s,), f, tot) - A_hat(m, t, range(s), (), inner, tot)


class TestClusterArgument:
    def test_fields(self):
        arg = ClusterArgument(2, 3)
        assert arg.total == 5

    @pytest.mark.parametrize("s,n", [(0, 1), (1, -1)])
    def test_invalid(self, s, n):
        with pytest.raises(ValueError):
            ClusterArgument(s, n)

    def test_size_mismatch(self, model, rng):
        with pytest.raises(DimensionError):
            v_operator_recursive(model, 0.1, ClusterArgument(1, 1), rand_op(rng, 3))


class TestGroupCumulants:
    def test_partition_n0(self, model, rng):
        f = rand_op(rng, 2)
        out = partition_cumulant(model, 0.4, ClusterArgument(2, 0), f).entries
        np.testing.assert_allclose(out, group_array(model, 0.4, f.entries, (0, 1), 2),
                                   atol=1e-15)

    def test_partition_n1_two_terms(self, model, rng):
        f = rand_op(rng, 3)
        t = 0.4
        out = partition_cumulant(model, t, ClusterArgument(2, 1), f).entries
        joint = group_array(model, t, f.entries, (0, 1, 2), 3)
        split = group_array(model, t, group_array(model, t, f.entries, (2,), 3), (0, 1), 3)
        np.testing.assert_allclose(out, joint - split, atol=1e-14)

    def test_partition_free_vanishes(self, free_model, rng):
        for n in (1, 2):
            out = partition_cumulant(free_model, 0.7, ClusterArgument(1, n), rand_op(rng, 1 + n))
            assert max_abs(out) < 1e-13

    def test_reduced_n1(self, model, rng):
        f = rand_op(rng, 3)
        t = 0.3
        out = reduced_cumulant(model, t, ClusterArgument(2, 1), f).entries
        expect = (group_array(model, t, f.entries, (0, 1, 2), 3)
                  - group_array(model, t, f.entries, (0, 1), 3))
        np.testing.assert_allclose(out, expect, atol=1e-14)


class TestScatteringCumulants:
    @pytest.mark.parametrize("n", [1, 2])
    def test_free_and_t0_vanish(self, model, free_model, rng, n):
        f = rand_op(rng, 1 + n)
        arg = ClusterArgument(1, n)
        assert max_abs(reduced_scattering_cumulant(free_model, 0.8, arg, f)) < 1e-13
        assert max_abs(reduced_scattering_cumulant(model, 0.0, arg, f)) == 0

    def test_n0_identity_when_free(self, free_model, rng):
        f = rand_op(rng, 2)
        out = reduced_scattering_cumulant(free_model, 0.8, ClusterArgument(2, 0), f)
        assert max_abs(out.entries - f.entries) < 1e-13

    def test_n1_s1_dense_oracle(self, model, rng):
        f = rand_op(rng, 2)
        t = 0.6
        u2 = model.wave_operator(2, t)
        expect = u2 @ f.entries @ u2.conj().T - f.entries
        out = reduced_scattering_cumulant(model, t, ClusterArgument(1, 1), f).entries
        np.testing.assert_allclose(out, expect, atol=1e-14)

    def test_declustered_pair(self, model, rng):
        f = rand_op(rng, 2)
        out = declustered_scattering_cumulant(model, 0.5, ClusterArgument(2, 0), f).entries
        expect = scattering_array(model, 0.5, f.entries, (0, 1), 2) - f.entries
        np.testing.assert_allclose(out, expect, atol=1e-15)


class TestEvolutionOperators:
    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("eps", [0.0, 0.5, 1.0])
    def test_direct_equals_recursive(self, model, rng, t, eps):
        m = model.with_coupling(eps)
        for s in range(1, 5):
            for n in range(0, 5 - s):
                f = rand_op(rng, s + n)
                arg = ClusterArgument(s, n)
                a = v_operator_direct(m, t, arg, f).entries
                b = v_operator_recursive(m, t, arg, f).entries
                assert max_abs(a - b) < 1e-10, (s, n)

    def test_declustered_direct_equals_recursive(self, model, rng):
        for s, n in ((2, 1), (2, 2), (3, 1)):
            f = random_hermitian(2 ** (s + n), rng)
            a = v_direct_array(model, 0.5, s, n, f, s + n, declustered=True)
            b = v_recursive_array(model, 0.5, s, n, f, s + n, declustered=True)
            assert max_abs(a - b) < 1e-10

    def test_order_zero(self, model, rng):
        f = rand_op(rng, 2)
        out = v_operator_direct(model, 0.7, ClusterArgument(2, 0), f).entries
        np.testing.assert_allclose(out, scattering_array(model, 0.7, f.entries, (0, 1), 2),
                                   atol=1e-15)

    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_second_order_by_hand(self, model, rng, s):
        f = random_hermitian(2 ** (s + 1), rng)
        hand = v2_by_hand(model, 0.4, s, f)
        assert max_abs(v_direct_array(model, 0.4, s, 1, f, s + 1) - hand) < 1e-12
        assert max_abs(v_recursive_array(model, 0.4, s, 1, f, s + 1) - hand) < 1e-12

    @pytest.mark.parametrize("s", [1, 2])
    def test_third_order_by_hand(self, model, rng, s):
        f = random_hermitian(2 ** (s + 2), rng)
        hand = v3_by_hand(model, 0.4, s, f)
        assert max_abs(v_direct_array(model, 0.4, s, 2, f, s + 2) - hand) < 1e-12
        assert max_abs(v_recursive_array(model, 0.4, s, 2, f, s + 2) - hand) < 1e-12

    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_scattering_closed_form(self, model, rng, s):
        f = random_hermitian(2 ** (s + 1), rng)
        t, tot = 0.8, s + 1
        full = scattering_array(model, t, f, tuple(range(tot)), tot)
        pairs = sum(scattering_array(model, t, f, (i, s), tot) for i in range(s))
        cluster = lambda g: scattering_array(model, t, g, tuple(range(s)), tot)
        expect = full - cluster(pairs) + (s - 1) * cluster(f)
        assert max_abs(v_recursive_array(model, t, s, 1, f, tot) - expect) < 1e-12

    def test_declustered_second_order_by_hand(self, model, rng):
        s, t = 2, 0.6
        f = random_hermitian(8, rng)
        from qkinetic.cumulants import partition_cumulant_array
        inner = sum(A_hat(model, t, (i,), (s,), f, 3) for i in range(s))
        singles = [(0,), (1,), (2,)]
        expect = (partition_cumulant_array(model, t, "scattering", singles, f, 3)
                  - partition_cumulant_array(model, t, "scattering", singles[:2], inner, 3))
        out = v_recursive_array(model, t, s, 1, f, 3, declustered=True)
        assert max_abs(out - expect) < 1e-12

    @pytest.mark.parametrize("s,n", [(1, 0), (2, 0), (1, 1), (2, 1), (1, 2), (2, 2), (1, 3)])
    def test_collapse_laws(self, model, free_model, rng, s, n):
        f = rand_op(rng, s + n)
        expect = f.entries if n == 0 else np.zeros_like(f.entries)
        arg = ClusterArgument(s, n)
        for method in (v_operator_direct, v_operator_recursive):
            assert max_abs(method(free_model, 0.9, arg, f).entries - expect) < 1e-12
            assert max_abs(method(model, 0.0, arg, f).entries - expect) < 1e-12

    def test_first_order_generator(self, model, rng):
        """(V_1(t) - I)/t tends to the summed pair interaction, first order in t."""
        s = 3
        f = random_hermitian(8, rng)
        target = np.zeros_like(f)
        for i in range(s):
            for j in range(i + 1, s):
                target -= interaction_array(model, i, j, f, s)
        errs = []
        for t in (1e-2, 1e-3, 1e-4):
            v = v_recursive_array(model, t, s, 0, f, s)
            errs.append(max_abs((v - f) / t - target))
        assert errs[0] > errs[1] > errs[2]
        assert 8 < errs[0] / errs[1] < 12 and 8 < errs[1] / errs[2] < 12

    @pytest.mark.parametrize("s", [2, 3])
    def test_higher_orders_vanish_faster_than_t(self, model, rng, s):
        f = random_hermitian(2 ** (s + 1), rng)
        norms = [max_abs(v_recursive_array(model, t, s, 1, f, s + 1)) / t
                 for t in (1e-1, 1e-2, 1e-3)]
        assert norms[0] > norms[1] > norms[2]


class TestDuhamel:
    def test_free(self, free_model, rng):
        assert duhamel_residual(free_model, 0.5, 1, rand_op(rng, 2)) < 1e-14

    def test_t0(self, model, rng):
        assert duhamel_residual(model, 0.0, 2, rand_op(rng, 3)) == 0.0

    @pytest.mark.parametrize("s", [1, 2])
    def test_converged(self, model, rng, s):
        assert duhamel_residual(model, 0.5, s, rand_op(rng, s + 1), 32) < 1e-8

    def test_refinement(self, model, rng):
        stiff = ModelSpec(5 * model.one_body, 5 * model.pair_potential, coupling=0.5)
        f = rand_op(rng, 3)
        coarse = duhamel_residual(stiff, 0.5, 2, f, 8)
        fine = duhamel_residual(stiff, 0.5, 2, f, 32)
        assert fine < 1e-8 and coarse / fine > 1e2

    def test_reversed_inner_time_does_not_hold(self, model, rng):
        """With G^(tau - t) in the integrand the identity fails at O(1)."""
        f = rand_op(rng, 2)
        lhs = reduced_scattering_cumulant(model, 0.5, ClusterArgument(1, 1), f).entries

        def reversed_integrand(m, t, tau, s, g):
            return second_order_integrand(m, 2 * tau - t, tau, s, g)

        rhs = duhamel_quadrature(model, 0.5, 1, f.entries, 32, reversed_integrand)
        assert max_abs(lhs - rhs) > 1e-3

    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_second_order_evolution_operator(self, model, rng, s):
        assert v2_duhamel_residual(model, 0.5, s, rand_op(rng, s + 1), 32) < 1e-8
