from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from rgaudit.exact import (
    EnumerationLimitError,
    exact_cross_moments,
    exact_expectations,
    exact_kl,
    exact_layer_distribution,
    exact_rg_step,
    exact_second_moments,
    fim_fd,
    jacobian_fd,
    layer_couplings,
    output_distribution,
    transition_matrix,
)
from rgaudit.nets import identity_stack, random_stack
from rgaudit.operators import CouplingVector, enumerate_basis
from rgaudit.rbm import DeepStack, RbmLayer

from conftest import random_layer


def brute_layer_distribution(stack, x, k):
    """Sum over every path of hidden states; no matrix tricks."""
    sizes = stack.sizes[1 : k + 1]
    probs = {}
    for path in product(*[list(product([0, 1], repeat=n)) for n in sizes]):
        v = np.asarray(x, dtype=float)
        p = 1.0
        for layer, h in zip(stack.layers, path):
            q = expit(layer.weights @ v + layer.hidden_bias)
            p *= np.prod(np.where(np.array(h) == 1, q, 1 - q))
            v = np.array(h, dtype=float)
        probs[path[-1]] = probs.get(path[-1], 0.0) + p
    out = np.zeros(2 ** sizes[-1])
    for h, p in probs.items():
        out[sum(b << i for i, b in enumerate(h))] = p
    return out


def test_distribution_matches_path_sum():
    stack = random_stack([2, 3, 2, 2], np.random.default_rng(4))
    x = [0.25, 0.9]
    for k in (1, 2, 3):
        np.testing.assert_allclose(exact_layer_distribution(stack, x, k).probabilities,
                                   brute_layer_distribution(stack, x, k), atol=1e-14)


def test_zero_weights_uniform():
    stack = DeepStack((RbmLayer.zeros(3, 2), RbmLayer.zeros(2, 3)))
    np.testing.assert_allclose(exact_layer_distribution(stack, [0.4, 0.1], 2).probabilities, 0.25)


def test_saturated_point_mass():
    layer = RbmLayer(np.zeros((2, 2)), [50.0, -50.0], np.zeros(2))
    p = exact_layer_distribution(DeepStack((layer,)), [0, 0], 1).probabilities
    assert p[0b01] == pytest.approx(1.0, abs=1e-15)


def test_transition_rows_stochastic(rng):
    M = transition_matrix(random_layer(rng, 4, 3))
    assert M.shape == (8, 16)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-14)


def test_enumeration_limit_names_layer():
    stack = DeepStack((RbmLayer.zeros(3, 2), RbmLayer.zeros(15, 3)))
    with pytest.raises(EnumerationLimitError, match="layer 2"):
        exact_layer_distribution(stack, [0.5, 0.5], 2)


def test_expectations_uniform_and_point_mass():
    b = enumerate_basis(3)
    np.testing.assert_allclose(exact_expectations(np.full(8, 1 / 8), b), 0, atol=1e-15)
    np.testing.assert_array_equal(exact_second_moments(np.full(8, 1 / 8), b), np.eye(7))
    p = np.zeros(8)
    p[0b101] = 1.0
    m = exact_expectations(p, b)
    # h = (1, 0, 1): spins (+1, -1, +1)
    np.testing.assert_array_equal(m, [1, -1, 1, -1, 1, -1, -1])


def test_single_node_tanh():
    p1 = expit(1.0)
    m = exact_expectations(np.array([1 - p1, p1]), enumerate_basis(1))
    assert m[0] == pytest.approx(np.tanh(0.5), abs=1e-12)
    assert m[0] == pytest.approx(0.462117, abs=1e-6)


def test_cross_moments_identity_kernel(rng):
    p = rng.dirichlet(np.ones(8))
    b = enumerate_basis(3)
    np.testing.assert_allclose(exact_cross_moments(p, RbmLayer.identity(3), b, b),
                               exact_second_moments(p, b), atol=1e-12)


def test_rg_step_identity_kernel(rng):
    g = CouplingVector(enumerate_basis(3), 0.3 * rng.standard_normal(7))
    np.testing.assert_allclose(exact_rg_step(g, RbmLayer.identity(3)).values, g.values, atol=1e-8)


def test_rg_step_input_independent_kernel(rng):
    a = rng.standard_normal(3)
    kernel = RbmLayer(np.zeros((3, 2)), a, np.zeros(2))
    g = CouplingVector(enumerate_basis(2), rng.standard_normal(3))
    out = exact_rg_step(g, kernel).values
    # independent Bernoulli(sigmoid(a)) nodes: single-spin coupling -a/2, no interactions
    np.testing.assert_allclose(out[:3], -a / 2, atol=1e-12)
    np.testing.assert_allclose(out[3:], 0, atol=1e-12)


def test_rg_step_agrees_with_stack():
    stack = random_stack([3, 3, 3], np.random.default_rng(9))
    x = [0.1, 0.6, 0.7]
    stepped = exact_rg_step(layer_couplings(stack, x, 1), stack.layers[1])
    np.testing.assert_allclose(stepped.values, layer_couplings(stack, x, 2).values, atol=1e-10)


def test_rg_step_refuses_truncated_basis():
    with pytest.raises(ValueError):
        exact_rg_step(CouplingVector(enumerate_basis(3, 2), np.zeros(6)), RbmLayer.identity(3))


def test_jacobian_identity_and_constant(rng):
    g = CouplingVector(enumerate_basis(2), 0.2 * rng.standard_normal(3))
    np.testing.assert_allclose(jacobian_fd(RbmLayer.identity(2), g), np.eye(3), atol=1e-6)
    const = RbmLayer(np.zeros((2, 2)), rng.standard_normal(2), np.zeros(2))
    np.testing.assert_allclose(jacobian_fd(const, g), 0, atol=1e-10)


def test_jacobian_step_stable(rng):
    kernel = random_layer(rng, 3, 3)
    g = CouplingVector(enumerate_basis(3), 0.5 * rng.standard_normal(7))
    J1 = jacobian_fd(kernel, g, 1e-4)
    J2 = jacobian_fd(kernel, g, 5e-5)
    assert np.abs(J1 - J2).max() <= 1e-4 * np.abs(J1).max()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.floats(0.2, 4.0))
def test_full_basis_spectral_radius_at_most_one(n, seed, scale):
    # conditional expectation cannot amplify a log-probability perturbation
    rng = np.random.default_rng(seed)
    kernel = random_layer(rng, n, n, scale)
    g = CouplingVector(enumerate_basis(n), rng.standard_normal(2**n - 1))
    rho = np.abs(np.linalg.eigvals(jacobian_fd(kernel, g))).max()
    assert rho <= 1.0 + 1e-6


def test_kl_examples():
    assert exact_kl([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert exact_kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.5 * np.log(2) + 0.5 * np.log(2 / 3), abs=1e-15)
    assert exact_kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.143841, abs=1e-6)
    assert exact_kl([0.5, 0.5], [0.8, 0.2]) == pytest.approx(0.223144, abs=1e-6)
    assert exact_kl([0.8, 0.2], [0.5, 0.5]) == pytest.approx(0.192745, abs=1e-6)
    assert exact_kl([0.6, 0.4], [0.4, 0.6]) == pytest.approx(0.081093, abs=1e-6)
    with pytest.raises(ValueError):
        exact_kl([0.5, 0.5], [0.2, 0.3, 0.5])


def test_kl_asymmetric_and_floored():
    a, b = np.array([0.9, 0.1]), np.array([0.5, 0.5])
    assert exact_kl(a, b) != pytest.approx(exact_kl(b, a))
    assert np.isfinite(exact_kl([0.5, 0.5], [1.0, 0.0]))


def test_fim_fd_zero_first_layer():
    stack = DeepStack((RbmLayer.zeros(2, 3), RbmLayer(np.ones((2, 2)), np.zeros(2), np.zeros(2))))
    np.testing.assert_allclose(fim_fd(stack, [0.3, 0.5, 0.7]), 0, atol=1e-12)


def test_fim_fd_symmetric_psd_and_swap_invariant(rng):
    W = rng.standard_normal((3, 3))
    W[:, 1] = W[:, 0]
    stack = DeepStack((RbmLayer(W, rng.standard_normal(3), np.zeros(3)), random_layer(rng, 2, 3)))
    x = np.array([0.4, 0.4, 0.7])
    F = fim_fd(stack, x)
    np.testing.assert_allclose(F, F.T, atol=1e-14)
    assert np.linalg.eigvalsh(F).min() >= -1e-6
    P = np.eye(3)[[1, 0, 2]]
    np.testing.assert_allclose(P @ F @ P, F, atol=1e-7)


def test_fim_fd_warns_at_boundary(tiny_stack):
    with pytest.warns(RuntimeWarning):
        fim_fd(tiny_stack, [0.0, 0.5, 1.0])


def test_output_distribution_matches_last_layer(tiny_stack, x3):
    np.testing.assert_allclose(output_distribution(tiny_stack, x3),
                               exact_layer_distribution(tiny_stack, x3, 2).probabilities, atol=1e-15)


def test_identity_stack_preserves_couplings():
    stack = identity_stack(3, 4, RbmLayer([[1.0, -2, 0], [0.5, 0, 1], [0, 2, -1]], [0.1, -0.3, 0.2], np.zeros(3)))
    x = [0.2, 0.8, 0.5]
    g1 = layer_couplings(stack, x, 1).values
    for k in (2, 3, 4):
        np.testing.assert_allclose(layer_couplings(stack, x, k).values, g1, atol=1e-8)
