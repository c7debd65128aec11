from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgaudit.operators import (
    CouplingVector,
    OperatorId,
    all_states,
    basis_size,
    couplings_from_distribution,
    distribution_from_couplings,
    enumerate_basis,
    evaluate,
)


def test_evaluate_examples():
    # node indices are 0-based here; the masks {1} and {1,2} are (0,) and (0, 1)
    assert evaluate(OperatorId((0,)), [1, 0]) == 1
    assert evaluate(OperatorId((0, 1)), [1, 0]) == -1
    assert evaluate(OperatorId((1,)), [1, 0]) == -1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=10), st.data())
def test_evaluate_parity(h, data):
    n = len(h)
    mask = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    zeros = sum(1 - h[i] for i in mask)
    assert evaluate(OperatorId(tuple(mask)), h) == (-1) ** zeros


def test_evaluate_out_of_range():
    with pytest.raises(IndexError):
        evaluate(OperatorId((3,)), [1, 0])


def test_operator_id_rejects_identity_and_unsorted():
    with pytest.raises(ValueError):
        OperatorId(())
    with pytest.raises(ValueError):
        OperatorId((1, 0))


@pytest.mark.parametrize("n,d,size", [(2, 2, 3), (4, 1, 4), (4, 4, 15), (5, 2, 15)])
def test_enumerate_basis_counts(n, d, size):
    b = enumerate_basis(n, d)
    assert len(b) == size == basis_size(n, d) == sum(comb(n, k) for k in range(1, d + 1))


def test_enumerate_basis_order_and_canonical():
    b = enumerate_basis(2, 2)
    assert b.masks() == [[0], [1], [0, 1]]
    b3 = enumerate_basis(3, 3)
    assert b3.masks() == [[0], [1], [2], [0, 1], [0, 2], [1, 2], [0, 1, 2]]
    assert enumerate_basis(6, 3).operators == enumerate_basis(6, 3).operators


@pytest.mark.parametrize("n,d", [(3, 0), (3, 4), (0, 1)])
def test_enumerate_basis_invalid(n, d):
    with pytest.raises(ValueError):
        enumerate_basis(n, d)


def test_values_match_evaluate(rng):
    b = enumerate_basis(4, 3)
    H = rng.integers(0, 2, (20, 4)).astype(np.uint8)
    V = b.values(H)
    for i, h in enumerate(H):
        assert [evaluate(op, h) for op in b.operators] == V[i].tolist()


@pytest.mark.parametrize("n", [1, 3, 6, 9])
def test_orthogonality(n):
    O = enumerate_basis(n).values(all_states(n))
    np.testing.assert_array_equal(O.T @ O / 2**n, np.eye(2**n - 1))


def test_uniform_distribution_has_zero_couplings():
    g = couplings_from_distribution(np.full(8, 1 / 8), enumerate_basis(3))
    np.testing.assert_allclose(g.values, 0, atol=1e-15)


def test_single_spin_closed_form():
    # dist proportional to exp(a * s) with s = -1, +1 for h = 0, 1
    a = 0.5
    p = np.exp(a * np.array([-1.0, 1.0]))
    p /= p.sum()
    g = couplings_from_distribution(p, enumerate_basis(1))
    assert g.values[0] == pytest.approx(-0.5, abs=1e-14)


def test_round_trip_random_3_nodes(rng):
    p = rng.random(8) + 0.01
    p /= p.sum()
    back = distribution_from_couplings(couplings_from_distribution(p, enumerate_basis(3)))
    assert 0.5 * np.abs(back - p).sum() <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_couplings_inverse_identity(n, seed):
    basis = enumerate_basis(n)
    # keep the energy spread moderate so no probability reaches the floor
    g = np.random.default_rng(seed).normal(0, 1, len(basis)) / np.sqrt(len(basis))
    back = couplings_from_distribution(distribution_from_couplings(CouplingVector(basis, g)), basis)
    np.testing.assert_allclose(back.values, g, atol=1e-10)


def test_truncated_basis_projects():
    # a pure pair coupling projects to zero on single-spin operators
    full = enumerate_basis(2)
    p = distribution_from_couplings(CouplingVector(full, [0.0, 0.0, 0.7]))
    g = couplings_from_distribution(p, enumerate_basis(2, 1))
    np.testing.assert_allclose(g.values, 0, atol=1e-14)


def test_zero_probability_needs_floor():
    p = np.array([0.5, 0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        couplings_from_distribution(p, enumerate_basis(2), floor=None)
    g = couplings_from_distribution(p, enumerate_basis(2))
    assert np.all(np.isfinite(g.values))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        couplings_from_distribution(np.full(4, 0.25), enumerate_basis(3))
    with pytest.raises(ValueError):
        CouplingVector(enumerate_basis(2), [1.0, 2.0])


def test_all_states_bit_order():
    S = all_states(3)
    assert S.shape == (8, 3)
    for s, row in enumerate(S):
        assert sum(int(b) << i for i, b in enumerate(row)) == s
    assert {tuple(r) for r in S} == set(product([0, 1], repeat=3))
