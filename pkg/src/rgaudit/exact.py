"""Brute-force enumeration oracle for small layers.

Everything here is dense over ``2^n`` states and exists to check the sampled
estimators in :mod:`rgaudit.mcrg` and :mod:`rgaudit.fim`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_expit

from .operators import (
    PROB_FLOOR,
    CouplingVector,
    OperatorBasis,
    all_states,
    couplings_from_distribution,
    distribution_from_couplings,
    enumerate_basis,
)
from .rbm import DeepStack, RbmLayer, check_input

ENUMERATION_LIMIT = 14


class EnumerationLimitError(ValueError):
    pass


@dataclass(frozen=True)
class ExactDistribution:
    layer_index: int
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12 * max(1.0, p.size / 1e3):
            raise ValueError("not a probability vector")
        object.__setattr__(self, "probabilities", p)

    @property
    def n_nodes(self) -> int:
        return int(self.probabilities.size).bit_length() - 1


def _check_limit(n: int, limit: int, what: str):
    if n > limit:
        raise EnumerationLimitError(
            f"{what} has {n} nodes, above the enumeration limit of {limit}"
        )


def _log_bernoulli(logits: np.ndarray, n_out: int) -> np.ndarray:
    """log prod_j p_j^{h_j} (1-p_j)^{1-h_j} for each row of logits and each state h."""
    H = all_states(n_out).astype(float)
    return log_expit(logits) @ H.T + log_expit(-logits) @ (1.0 - H).T


def first_layer_distribution(layer: RbmLayer, x: np.ndarray) -> np.ndarray:
    """t_1(h | x) over all states, for real-valued ``x``."""
    logits = layer.weights @ np.asarray(x, dtype=float) + layer.hidden_bias
    return np.exp(_log_bernoulli(logits[None, :], layer.n_out)[0])


def transition_matrix(layer: RbmLayer, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """Row-stochastic ``M[s', s] = t(h = s | h' = s')``."""
    _check_limit(layer.n_in, limit, "kernel input")
    _check_limit(layer.n_out, limit, "kernel output")
    V = all_states(layer.n_in).astype(float)
    return np.exp(_log_bernoulli(V @ layer.weights.T + layer.hidden_bias, layer.n_out))


def exact_layer_distribution(
    stack: DeepStack, x: Sequence[float], k: int, limit: int = ENUMERATION_LIMIT
) -> ExactDistribution:
    """q_k(. | x) obtained by pushing the clamped input through layers 1..k."""
    if not 1 <= k <= len(stack):
        raise ValueError(f"layer index {k} outside 1..{len(stack)}")
    for j in range(k):
        if stack.layers[j].n_out > limit:
            raise EnumerationLimitError(
                f"layer {j + 1} has {stack.layers[j].n_out} nodes, above the "
                f"enumeration limit of {limit}"
            )
    x = check_input(x, stack.n_in)
    q = first_layer_distribution(stack.layers[0], x)
    for layer in stack.layers[1:k]:
        q = q @ transition_matrix(layer, limit)
    return ExactDistribution(k, q / q.sum())


def exact_expectations(dist: ExactDistribution | np.ndarray, basis: OperatorBasis) -> np.ndarray:
    p = _probs(dist)
    return basis.values(all_states(basis.dimension)).T @ p


def exact_second_moments(dist: ExactDistribution | np.ndarray, basis: OperatorBasis) -> np.ndarray:
    p = _probs(dist)
    O = basis.values(all_states(basis.dimension))
    S = O.T @ (O * p[:, None])
    return (S + S.T) / 2


def exact_cross_moments(
    prev: ExactDistribution | np.ndarray,
    kernel: RbmLayer,
    basis: OperatorBasis,
    prev_basis: OperatorBasis,
) -> np.ndarray:
    """<O_g(h) O_b(h')> over the joint q(h') t(h | h'); rows index ``basis``."""
    p = _probs(prev)
    M = transition_matrix(kernel)
    O_prev = prev_basis.values(all_states(prev_basis.dimension))
    O_next = basis.values(all_states(basis.dimension))
    return O_next.T @ (M.T @ (O_prev * p[:, None]))


def _probs(dist) -> np.ndarray:
    return dist.probabilities if isinstance(dist, ExactDistribution) else np.asarray(dist, dtype=float)


def exact_rg_step(couplings: CouplingVector, kernel: RbmLayer) -> CouplingVector:
    """Couplings of the layer produced by ``kernel`` from a layer with ``couplings``."""
    basis = couplings.basis
    if not basis.is_full:
        raise ValueError("exact RG step needs the full operator basis")
    if basis.dimension != kernel.n_in:
        raise ValueError(f"couplings over {basis.dimension} nodes, kernel takes {kernel.n_in}")
    q = distribution_from_couplings(couplings) @ transition_matrix(kernel)
    return couplings_from_distribution(q / q.sum(), enumerate_basis(kernel.n_out))


def jacobian_fd(kernel: RbmLayer, at: CouplingVector, step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian d g'_a / d g_b of :func:`exact_rg_step`."""
    if step <= 0:
        raise ValueError("step must be positive")
    g = at.values
    cols = []
    for b in range(g.size):
        e = np.zeros_like(g)
        e[b] = step
        up = exact_rg_step(CouplingVector(at.basis, g + e), kernel).values
        dn = exact_rg_step(CouplingVector(at.basis, g - e), kernel).values
        cols.append((up - dn) / (2 * step))
    return np.column_stack(cols)


def exact_kl(p1, p2, floor: float = PROB_FLOOR) -> float:
    """D_KL(p1 || p2) in nats; zeros of ``p2`` are floored."""
    a, b = _probs(p1), _probs(p2)
    if a.shape != b.shape:
        raise ValueError(f"distributions of shapes {a.shape} and {b.shape}")
    b = np.maximum(b, floor)
    nz = a > 0
    return float(max(np.sum(a[nz] * (np.log(a[nz]) - np.log(b[nz]))), 0.0))


def output_distribution(stack: DeepStack, x, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    # fim_fd probes may leave [0, 1]; the layer-1 conditional is defined for any real x
    q = first_layer_distribution(stack.layers[0], np.asarray(x, dtype=float))
    for layer in stack.layers[1:]:
        q = q @ transition_matrix(layer, limit)
    return q / q.sum()


def fim_fd(stack: DeepStack, x: Sequence[float], step: float = 1e-3,
           limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """Hessian of x' -> KL(q_N(.|x) || q_N(.|x')) at x' = x by central differences.

    Probes that leave the unit cube are evaluated anyway (the conditional is
    smooth in x) and a warning is issued.
    """
    for j, layer in enumerate(stack.layers):
        _check_limit(layer.n_out, limit, f"layer {j + 1}")
    x = check_input(x, stack.n_in)
    if np.any(x - step < 0) or np.any(x + step > 1):
        warnings.warn("finite-difference probes leave [0, 1]^n", RuntimeWarning, stacklevel=2)
    base = output_distribution(stack, x, limit)
    n = x.size

    def D(dx):
        return exact_kl(base, output_distribution(stack, x + dx, limit), floor=0.0)

    E = step * np.eye(n)
    F = np.empty((n, n))
    for i in range(n):
        F[i, i] = (D(E[i]) + D(-E[i])) / step**2
        for j in range(i):
            F[i, j] = F[j, i] = (
                D(E[i] + E[j]) - D(E[i] - E[j]) - D(-E[i] + E[j]) + D(-E[i] - E[j])
            ) / (4 * step**2)
    return F


def layer_couplings(stack: DeepStack, x, k: int, limit: int = ENUMERATION_LIMIT) -> CouplingVector:
    """Full-basis couplings of layer ``k`` at input ``x`` (exact)."""
    dist = exact_layer_distribution(stack, x, k, limit)
    return couplings_from_distribution(dist.probabilities, enumerate_basis(stack.layers[k - 1].n_out))
