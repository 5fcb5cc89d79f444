import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkinetic.operators import (
    DimensionError, ManyBodyOperator, MarginalState, embed, full_trace, hermitian_exponential,
    partial_trace, random_hermitian, tensor, trace_norm,
)


def op(a, d=2, **kw):
    return ManyBodyOperator(np.asarray(a, dtype=complex), d, **kw)


def rand_op(rng, d, s):
    return op(random_hermitian(d**s, rng), d)


class TestManyBodyOperator:
    def test_particle_count_inferred(self):
        assert op(np.eye(8)).particle_count == 3
        assert op(np.eye(9), d=3).particle_count == 2

    def test_side_must_be_power_of_dim(self):
        with pytest.raises(DimensionError):
            op(np.eye(6))

    def test_hermitian_flag_checked(self):
        with pytest.raises(ValueError):
            op([[0, 1], [0, 0]], hermitian=True)

    def test_marginal_state_shapes(self, rng):
        f1 = rand_op(rng, 2, 1)
        f2 = rand_op(rng, 2, 2)
        state = MarginalState(0.0, [f1, f2])
        assert state.s_max == 2 and state[2] is f2
        with pytest.raises(DimensionError):
            MarginalState(0.0, [f2])
        with pytest.raises(KeyError):
            state[3]


class TestTensor:
    def test_identity(self):
        i1 = ManyBodyOperator.identity(2)
        np.testing.assert_array_equal(tensor(i1, i1).entries, np.eye(4))

    def test_trace_multiplicative(self, rng):
        a, b = rand_op(rng, 2, 1), rand_op(rng, 2, 1)
        assert abs(tensor(a, b).trace() - a.trace() * b.trace()) < 1e-13

    def test_index_expansion(self):
        out = tensor(op(np.diag([1, 0])), op(np.diag([0, 1]))).entries
        expect = np.zeros((4, 4))
        expect[0b01, 0b01] = 1  # particle 1 in state 0, particle 2 in state 1
        np.testing.assert_array_equal(out, expect)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            tensor(op(np.eye(2)), op(np.eye(3), d=3))

    def test_associative_bitwise(self, rng):
        # integer entries make every product exact, so only index arithmetic is tested
        a, b, c = (op(rng.integers(-9, 9, (2, 2)) + 1j * rng.integers(-9, 9, (2, 2)))
                   for _ in range(3))
        left = tensor(tensor(a, b), c).entries
        right = tensor(a, tensor(b, c)).entries
        assert np.array_equal(left, right)


class TestPartialTrace:
    def test_product_factorisation(self, rng):
        a, b = rand_op(rng, 2, 1), rand_op(rng, 2, 1)
        out = partial_trace(tensor(a, b), {2}).entries
        np.testing.assert_allclose(out, a.entries * b.trace(), atol=1e-14)

    def test_full_trace_scalar_variant(self, rng):
        a = rand_op(rng, 2, 2)
        assert full_trace(a) == a.trace()
        with pytest.raises(DimensionError):
            partial_trace(a, {1, 2})

    def test_index_oracle(self, rng):
        a = random_hermitian(4, rng)
        out = partial_trace(op(a), {1}).entries
        expect = np.array([[sum(a[2 * k + i, 2 * k + j] for k in range(2)) for j in range(2)]
                           for i in range(2)])
        np.testing.assert_allclose(out, expect, atol=1e-14)

    def test_trace_preserved(self, rng):
        a = rand_op(rng, 3, 2)
        assert abs(partial_trace(a, {1}).trace() - a.trace()) < 1e-12

    def test_label_out_of_range(self, rng):
        with pytest.raises(DimensionError):
            partial_trace(rand_op(rng, 2, 2), {3})

    @pytest.mark.parametrize("d,s", [(2, 3), (2, 4), (3, 3)])
    def test_composes(self, rng, d, s):
        a = rand_op(rng, d, s)
        stepwise = partial_trace(partial_trace(a, {2}), {2})
        once = partial_trace(a, {2, 3})
        assert np.max(np.abs(stepwise.entries - once.entries)) < 1e-12


class TestTraceNorm:
    def test_identity(self):
        assert trace_norm(ManyBodyOperator.identity(2)) == pytest.approx(2.0)

    def test_homogeneous(self, rng):
        a = rand_op(rng, 2, 2)
        assert trace_norm(-2.5 * a) == pytest.approx(2.5 * trace_norm(a), rel=1e-12)

    def test_eigenvalue_oracle(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        a = q @ np.diag([0.3, -0.1]) @ q.conj().T
        assert trace_norm(op(a)) == pytest.approx(0.4, abs=1e-14)

    def test_non_hermitian_uses_singular_values(self):
        assert trace_norm(op([[0, 2], [0, 0]])) == pytest.approx(2.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rand_op(rng, 2, 2), rand_op(rng, 2, 2)
        assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-12


class TestEmbed:
    def test_trivial(self, rng):
        a = rand_op(rng, 2, 1)
        np.testing.assert_array_equal(embed(a, [1], 1).entries, a.entries)
        np.testing.assert_allclose(embed(a, [2], 2).entries, np.kron(np.eye(2), a.entries))

    def test_permutation_oracle(self, rng):
        phi = random_hermitian(4, rng)
        # permutation matrix sending basis |x1 x2 x3> to |x1 x3 x2>
        p = np.zeros((8, 8))
        for x in itertools.product(range(2), repeat=3):
            src = 4 * x[0] + 2 * x[1] + x[2]
            dst = 4 * x[0] + 2 * x[2] + x[1]
            p[dst, src] = 1
        expect = p @ np.kron(phi, np.eye(2)) @ p.T
        np.testing.assert_allclose(embed(op(phi), [1, 3], 3).entries, expect, atol=1e-14)

    def test_label_order_matters(self, rng):
        a, b = rand_op(rng, 2, 1), rand_op(rng, 2, 1)
        ab = tensor(a, b)
        np.testing.assert_allclose(embed(ab, [2, 1], 2).entries, tensor(b, a).entries)

    @pytest.mark.parametrize("labels", [[1, 1], [0, 2], [1, 4]])
    def test_bad_labels(self, rng, labels):
        with pytest.raises(DimensionError):
            embed(rand_op(rng, 2, 2), labels, 3)


class TestHermitianExponential:
    def test_zero_scale(self, rng):
        np.testing.assert_allclose(hermitian_exponential(rand_op(rng, 2, 1), 0).entries,
                                   np.eye(2), atol=1e-14)

    def test_diagonal(self):
        a, b, t = 0.3, -1.1, 0.7
        out = hermitian_exponential(op(np.diag([a, b])), -1j * t).entries
        np.testing.assert_allclose(out, np.diag(np.exp(-1j * t * np.array([a, b]))),
                                   atol=1e-15)

    def test_inverse_composition(self, rng):
        h = rand_op(rng, 2, 2)
        u = hermitian_exponential(h, -0.8j).entries
        v = hermitian_exponential(h, 0.8j).entries
        assert np.max(np.abs(u @ v - np.eye(4))) < 1e-12

    def test_conjugation_keeps_hermiticity(self, rng):
        u = hermitian_exponential(rand_op(rng, 2, 2), -1.3j).entries
        a = random_hermitian(4, rng)
        b = u @ a @ u.conj().T
        assert np.max(np.abs(b - b.conj().T)) < 1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_exponential(op([[0, 1], [0, 0]]), 1j)
