import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyde.errors import DegenerateInputError, DimensionError
from tinyde.tensor import ezip, matmul, reduce, tensor

from oracles import loop_broadcast, naive_matmul


class TestMatmul:
    def test_identity(self):
        b = tensor([[5.0, 6.0], [7.0, 8.0]])
        assert np.array_equal(matmul(np.eye(2), b), b)

    def test_small_product_matches_naive_oracle(self):
        a = tensor([[1.0, 2.0], [3.0, 4.0]])
        b = tensor([[5.0], [6.0]])
        expected = naive_matmul(a, b)
        assert np.array_equal(expected, [[17.0], [39.0]])
        assert np.array_equal(matmul(a, b), expected)

    def test_zeros_annihilate(self):
        rng = np.random.default_rng(0)
        out = matmul(np.zeros((2, 3)), rng.normal(size=(3, 4)))
        assert np.array_equal(out, np.zeros((2, 4)))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((4, 2)))


class TestReduce:
    def test_mean(self):
        assert reduce(tensor([1.0, 2.0, 3.0]), 0, "mean") == 2.0

    def test_population_variance(self):
        # direct formula: mean 2, ((1-2)^2 + (3-2)^2)/2 = 1
        assert reduce(tensor([1.0, 3.0]), 0, "variance") == 1.0

    def test_max_rows(self):
        t = tensor([[0.1, 0.9], [0.4, 0.2]])
        assert np.array_equal(reduce(t, 1, "max"), [0.9, 0.4])

    def test_empty_extent_rejected(self):
        with pytest.raises(DegenerateInputError):
            reduce(np.zeros((0, 3)), 0, "mean")

    def test_bad_axis(self):
        with pytest.raises(DimensionError):
            reduce(tensor([1.0]), 3, "sum")


class TestZip:
    def test_absdiff(self):
        out = ezip(tensor([0.9, 0.1]), tensor([0.5, 0.5]), "absdiff")
        assert np.allclose(out, [0.4, 0.4])

    def test_add_zeros_is_identity(self):
        x = tensor([[1.5, -2.0], [0.0, 3.0]])
        assert np.array_equal(ezip(x, np.zeros_like(x), "add"), x)

    def test_broadcast_matches_loop_oracle(self):
        a = tensor([[3.0], [5.0]])
        b = tensor([[10.0, 100.0]])
        expected = loop_broadcast(a, b, lambda x, y: x * y)
        assert np.array_equal(expected, [[30.0, 300.0], [50.0, 500.0]])
        assert np.array_equal(ezip(a, b, "mul"), expected)

    def test_incompatible_shapes(self):
        with pytest.raises(DimensionError):
            ezip(np.zeros((2, 3)), np.zeros((2, 4)), "add")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 5), st.integers(1, 5),
       st.integers(1, 5), st.integers(1, 5))
def test_matmul_associativity(seed, r, k1, k2, c):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, size=(r, k1))
    b = rng.uniform(-1, 1, size=(k1, k2))
    c_ = rng.uniform(-1, 1, size=(k2, c))
    lhs = matmul(matmul(a, b), c_)
    rhs = matmul(a, matmul(b, c_))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 8), st.integers(1, 6))
def test_mean_subtraction_recenters(seed, b, f):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(b, f))
    centered = ezip(x, reduce(x, 0, "mean"), "sub")
    assert np.max(np.abs(reduce(centered, 0, "mean"))) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4), st.integers(1, 4))
def test_reshape_round_trip(seed, a, b):
    rng = np.random.default_rng(seed)
    x = tensor(rng.normal(size=(a, b)))
    assert np.array_equal(x.reshape(-1).reshape(a, b), x)
    # reshape reinterprets, never reorders
    assert np.array_equal(x.reshape(-1), x.ravel(order="C"))
