"""Spin-product operators and exact coupling extraction.

Configurations are {0,1} bit-vectors at the RBM interface. Operators act on
the spin image ``s = 2h - 1`` so that every operator takes values in {-1,+1}
and the full set of masks is orthogonal under the uniform measure. State
``s`` of an ``n``-node layer is the integer whose bit ``i`` is ``h_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12


@dataclass(frozen=True, order=True)
class OperatorId:
    """Product of spins over ``mask`` (sorted node indices, non-empty)."""

    mask: tuple[int, ...]

    def __post_init__(self):
        if len(self.mask) == 0:
            raise ValueError("identity operator is not part of the basis")
        if tuple(sorted(set(self.mask))) != tuple(self.mask):
            raise ValueError(f"mask must be sorted and distinct: {self.mask}")
        if self.mask[0] < 0:
            raise ValueError(f"negative node index in {self.mask}")

    @property
    def degree(self) -> int:
        return len(self.mask)


def evaluate(op: OperatorId, h: Sequence[int]) -> int:
    """Value of ``op`` on configuration ``h``: product of ``2 h_i - 1``."""
    h = np.asarray(h)
    if op.mask[-1] >= h.shape[-1]:
        raise IndexError(f"operator {op.mask} out of range for dimension {h.shape[-1]}")
    zeros = int(np.sum(1 - h[list(op.mask)]))
    return -1 if zeros % 2 else 1


@dataclass(frozen=True)
class OperatorBasis:
    dimension: int
    max_degree: int
    operators: tuple[OperatorId, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def is_full(self) -> bool:
        return self.max_degree == self.dimension

    @property
    def degrees(self) -> np.ndarray:
        return np.array([op.degree for op in self.operators])

    def index(self, mask: Sequence[int]) -> int:
        return self.operators.index(OperatorId(tuple(mask)))

    def masks(self) -> list[list[int]]:
        """Report form, e.g. ``[[0], [1], [0, 1]]``."""
        return [list(op.mask) for op in self.operators]

    def values(self, h: np.ndarray) -> np.ndarray:
        """Operator values for a batch of configurations.

        Parameters
        ----------
        h : array of shape (n_samples, dimension) with entries in {0, 1}

        Returns
        -------
        array of shape (n_samples, len(basis)) with entries +-1.0
        """
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[1] != self.dimension:
            raise ValueError(f"expected configurations of width {self.dimension}, got {h.shape}")
        zeros = (1 - h).astype(np.int8)
        out = np.empty((h.shape[0], len(self.operators)))
        for col, op in enumerate(self.operators):
            parity = zeros[:, op.mask].sum(axis=1) & 1
            out[:, col] = 1.0 - 2.0 * parity
        return out


def enumerate_basis(dimension: int, max_degree: int | None = None) -> OperatorBasis:
    """All masks of size 1..max_degree, ordered by degree then lexicographically."""
    if max_degree is None:
        max_degree = dimension
    if dimension < 1 or not 1 <= max_degree <= dimension:
        raise ValueError(f"need 1 <= max_degree <= dimension, got {max_degree}, {dimension}")
    ops = tuple(
        OperatorId(mask)
        for d in range(1, max_degree + 1)
        for mask in combinations(range(dimension), d)
    )
    return OperatorBasis(dimension, max_degree, ops)


def basis_size(dimension: int, max_degree: int) -> int:
    return sum(comb(dimension, d) for d in range(1, max_degree + 1))


def basis_from_masks(dimension: int, masks: Sequence[Sequence[int]]) -> OperatorBasis:
    ops = tuple(OperatorId(tuple(m)) for m in masks)
    return OperatorBasis(dimension, max(op.degree for op in ops), ops)


def all_states(n: int) -> np.ndarray:
    """Every configuration of ``n`` bits, row ``s`` holding the bits of ``s``."""
    s = np.arange(2**n)
    return ((s[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def state_index(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.int64)
    return h @ (1 << np.arange(h.shape[-1]))


@dataclass(frozen=True)
class CouplingVector:
    basis: OperatorBasis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.basis),):
            raise ValueError(f"coupling vector of length {v.shape} for basis of {len(self.basis)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("couplings must be finite")
        object.__setattr__(self, "values", v)

    def energies(self) -> np.ndarray:
        """H(h) = sum_a g_a O_a(h) over all 2^n states."""
        return self.basis.values(all_states(self.basis.dimension)) @ self.values


def couplings_from_distribution(
    dist: np.ndarray, basis: OperatorBasis, floor: float | None = PROB_FLOOR
) -> CouplingVector:
    """Project ``-log dist`` onto the spin-product basis.

    ``g_a = -2^{-n} sum_h log dist(h) O_a(h)``; the constant mode is the
    normalisation and is dropped. Exact for the full basis, a projection
    otherwise.
    """
    dist = np.asarray(dist, dtype=float)
    n = basis.dimension
    if dist.shape != (2**n,):
        raise ValueError(f"distribution of length {dist.shape[0]} for a {n}-node basis")
    if abs(dist.sum() - 1.0) > 1e-12 * max(1.0, dist.size / 1e3):
        raise ValueError(f"distribution sums to {dist.sum()!r}")
    if floor is None:
        if np.any(dist <= 0):
            raise ValueError("zero probability without a floor")
    else:
        dist = np.maximum(dist, floor)
    logp = np.log(dist)
    ops = basis.values(all_states(n))
    return CouplingVector(basis, -(ops.T @ logp) / 2**n)


def distribution_from_couplings(couplings: CouplingVector) -> np.ndarray:
    """exp(-H)/Z over all states of the basis' layer."""
    e = -couplings.energies()
    e -= e.max()
    p = np.exp(e)
    return p / p.sum()
