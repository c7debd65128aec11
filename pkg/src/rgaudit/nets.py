"""Small hand-built networks with known stability behaviour."""

from __future__ import annotations

import numpy as np

from .rbm import DeepStack, RbmLayer


def identity_stack(n: int, depth: int, first: RbmLayer | None = None) -> DeepStack:
    """``first`` (random-free default: zero weights) followed by ``depth - 1`` copy kernels."""
    first = first if first is not None else RbmLayer(np.zeros((n, n)), np.zeros(n), np.zeros(n))
    return DeepStack((first,) + tuple(RbmLayer.identity(n) for _ in range(depth - 1)),
                     {"name": "identity"})


EXPANDING_INPUT = np.full(3, 0.5)


def expanding_stack() -> DeepStack:
    """Three-node, two-layer net whose 1->2 transition expands in the degree-2 basis.

    At input ``EXPANDING_INPUT`` the stability matrix of the pair-truncated
    basis (six operators), computed from enumerated moments, has a real
    leading eigenvalue of about 1.81 and a moment-matrix condition number
    near 39, so a million chains resolve it cleanly. The weights came from a
    Nelder-Mead search maximising that eigenvalue, rounded to one decimal.
    """
    layer1 = RbmLayer(
        [[0.3, -0.9, 11.9], [-8.0, 0.9, 5.4], [0.1, 4.3, 0.3]],
        [-1.4, -0.7, -1.5],
        np.zeros(3),
    )
    kernel = RbmLayer(
        [[1.4, 6.8, -4.0], [2.3, -7.1, 4.3], [-2.6, 11.0, -1.0]],
        [-4.3, 0.5, 0.3],
        np.zeros(3),
    )
    return DeepStack((layer1, kernel), {"name": "expanding", "n_classes": 3})


def random_stack(sizes, rng: np.random.Generator, scale: float = 1.0) -> DeepStack:
    layers = tuple(
        RbmLayer(scale * rng.standard_normal((sizes[k + 1], sizes[k])),
                 scale * rng.standard_normal(sizes[k + 1]), np.zeros(sizes[k]))
        for k in range(len(sizes) - 1)
    )
    return DeepStack(layers, {"name": "random"})
