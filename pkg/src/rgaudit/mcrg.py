"""Monte Carlo RG estimation of layer-to-layer stability matrices.

For a transition k -> k+1 the stability matrix solves, for every pair of
probe ``g`` and source ``b``,

    sum_a T[a, b] (<O_g><O_a> - <O_g O_a>)^(k+1) = <O_g>^(k+1) <O_b>^(k) - <O_g t O_b>^(k)

where the last term is the between-layer moment over parent/child sample
pairs. Probes are the whole analysis basis, so the system is square in the
probe index and is solved by SVD with an optional ridge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import exact
from .operators import OperatorBasis, enumerate_basis
from .rbm import DeepStack, LayerEnsemble, propagate
from .rng import substream

DEFAULT_BLOCKS = 250
MIN_SAMPLES = 100


class SingularSystemError(np.linalg.LinAlgError):
    pass


class EigenDecompositionError(np.linalg.LinAlgError):
    pass


@dataclass
class ExpectationSet:
    """Moments of layer ``layer_index`` plus its cross moments with the layer below.

    ``cross_moments[g, b] = <O_g(h_k) O_b(h_{k-1})>`` with ``g`` over ``basis``
    and ``b`` over ``prev_basis``. Block arrays hold per-block means over
    contiguous chain ranges (chains are i.i.d.) and drive the bootstrap; they
    are ``None`` for moments computed by enumeration.
    """

    layer_index: int
    basis: OperatorBasis
    first_moments: np.ndarray
    second_moments: np.ndarray
    cross_moments: np.ndarray | None = None
    prev_basis: OperatorBasis | None = None
    sample_count: int | None = None
    block_weights: np.ndarray | None = field(default=None, repr=False)
    block_first: np.ndarray | None = field(default=None, repr=False)
    block_second: np.ndarray | None = field(default=None, repr=False)
    block_cross: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_sampled(self) -> bool:
        return self.block_weights is not None

    def covariance(self) -> np.ndarray:
        m = self.first_moments
        return self.second_moments - np.outer(m, m)

    def first_stderr(self) -> np.ndarray:
        """Standard error of the first moments from the spread of block means."""
        if not self.is_sampled:
            return np.zeros_like(self.first_moments)
        return self.block_first.std(axis=0, ddof=1) / np.sqrt(len(self.block_weights))

    def resample(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        """Moments recomputed from the blocks selected by ``idx``."""
        w = self.block_weights[idx]
        tot = w.sum()
        first = np.tensordot(w, self.block_first[idx], axes=1) / tot
        second = np.tensordot(w, self.block_second[idx], axes=1) / tot
        cross = None
        if self.block_cross is not None:
            cross = np.tensordot(w, self.block_cross[idx], axes=1) / tot
        return first, second, cross


def _is_binary(a: np.ndarray) -> bool:
    return a.dtype == np.uint8 or bool(np.all((a == 0) | (a == 1)))


def estimate_expectations(
    ensemble: LayerEnsemble,
    basis: OperatorBasis,
    prev_basis: OperatorBasis | None = None,
    n_blocks: int = DEFAULT_BLOCKS,
) -> ExpectationSet:
    """Sample moments of one layer and, if ``prev_basis`` is given, its cross moments.

    Cross moments need binary parents, so for layer 1 they are only formed
    when the clamped input sits on a corner of the cube.
    """
    n = len(ensemble)
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if ensemble.samples.shape[1] != basis.dimension:
        raise ValueError("basis dimension does not match the ensemble")
    with_cross = prev_basis is not None
    if with_cross:
        if ensemble.paired_previous.shape[1] != prev_basis.dimension:
            raise ValueError("previous basis does not match the paired parents")
        if not _is_binary(ensemble.paired_previous):
            raise ValueError("cross moments need binary parent configurations (unpaired ensemble)")

    n_blocks = max(2, min(n_blocks, n))
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    B = len(basis)
    bw = np.diff(edges).astype(float)
    bf = np.empty((n_blocks, B))
    bs = np.empty((n_blocks, B, B))
    bc = np.empty((n_blocks, B, len(prev_basis))) if with_cross else None
    for i in range(n_blocks):
        sl = slice(edges[i], edges[i + 1])
        O = basis.values(ensemble.samples[sl])
        m = len(O)
        bf[i] = O.mean(axis=0)
        bs[i] = O.T @ O / m
        if with_cross:
            bc[i] = O.T @ prev_basis.values(ensemble.paired_previous[sl]) / m

    total = bw.sum()
    first = bw @ bf / total
    second = np.tensordot(bw, bs, axes=1) / total
    second = (second + second.T) / 2
    cross = np.tensordot(bw, bc, axes=1) / total if with_cross else None
    return ExpectationSet(
        ensemble.layer_index, basis, first, second, cross, prev_basis, n, bw, bf, bs, bc
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenMode:
    magnitude: float
    phase: float
    vector: np.ndarray
    relevant: bool
    stderr: float = 0.0

    @property
    def eigenvalue(self) -> complex:
        return self.magnitude * np.exp(1j * self.phase)

    @property
    def is_real(self) -> bool:
        return abs(np.sin(self.phase)) < 1e-12

    def to_dict(self) -> dict:
        v = self.vector
        d = {
            "magnitude": self.magnitude,
            "phase": self.phase,
            "stderr": self.stderr,
            "relevant": self.relevant,
            "vector_real": v.real.tolist(),
        }
        if np.any(v.imag != 0):
            d["vector_imag"] = v.imag.tolist()
        return d


def eigen_analysis(
    T: np.ndarray, margin: float = 0.05, stderr: Sequence[float] | None = None
) -> list[EigenMode]:
    """General eigen-decomposition of ``T`` sorted by descending ``|Lambda|``.

    A mode is relevant when ``|Lambda| > 1 + margin + stderr``. Eigenvectors
    have unit norm and are rotated so their largest component is real and
    positive.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"eigen-analysis needs a square matrix, got {T.shape}")
    if not np.all(np.isfinite(T)):
        raise EigenDecompositionError(f"non-finite stability matrix:\n{T!r}")
    try:
        vals, vecs = np.linalg.eig(T)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(f"eigensolver failed ({exc}) on\n{T!r}") from exc
    mags = np.abs(vals)
    phases = np.angle(vals)
    # ties broken by phase so conjugate pairs come out in a fixed order
    order = np.lexsort((-phases, -np.round(mags, 12)))
    if stderr is None:
        stderr = np.zeros(len(vals))
    modes = []
    for rank, i in enumerate(order):
        v = vecs[:, i]
        v = v / np.linalg.norm(v)
        j = int(np.argmax(np.abs(v)))
        v = v * np.conj(v[j]) / abs(v[j])
        if abs(vals[i].imag) <= 1e-12 * max(1.0, mags[i]):
            v = v.real.astype(complex)
            phase = 0.0 if vals[i].real >= 0 else float(np.pi)
        else:
            phase = float(phases[i])
        se = float(stderr[rank])
        modes.append(
            EigenMode(float(mags[i]), phase, v, bool(mags[i] > 1.0 + margin + se), se)
        )
    return modes


@dataclass
class StabilityEstimate:
    transition: tuple[int, int]
    matrix: np.ndarray
    condition_number: float
    regularization: float
    ridge: float
    eigenmodes: list[EigenMode]
    matrix_stderr: np.ndarray
    eigen_stderr: np.ndarray
    n_boot: int = 0

    @property
    def is_square(self) -> bool:
        return self.matrix.shape[0] == self.matrix.shape[1]

    @property
    def top_magnitude(self) -> float | None:
        return self.eigenmodes[0].magnitude if self.eigenmodes else None

    @property
    def has_relevant(self) -> bool:
        return any(m.relevant for m in self.eigenmodes)

    def to_dict(self) -> dict:
        return {
            "transition": list(self.transition),
            "matrix": self.matrix.tolist(),
            "matrix_stderr": self.matrix_stderr.tolist(),
            "condition_number": self.condition_number,
            "regularization": self.regularization,
            "ridge": self.ridge,
            "n_boot": self.n_boot,
            "eigenmodes": [m.to_dict() for m in self.eigenmodes],
        }


def _linear_system(first_k, first_k1, second_k1, cross_k1):
    A = np.outer(first_k1, first_k1) - second_k1
    rhs = np.outer(first_k1, first_k) - cross_k1
    return A, rhs


def ridge_solve(A: np.ndarray, rhs: np.ndarray, regularization: float) -> tuple[np.ndarray, float, float]:
    """Solve ``A X = rhs`` with Tikhonov ridge ``regularization * s_max``.

    Returns the solution, the condition number of ``A`` and the absolute ridge.
    """
    U, s, Vt = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    cond = float(smax / s[-1]) if s[-1] > 0 else float("inf")
    lam = regularization * smax
    if lam == 0 and (s[-1] <= smax * A.shape[0] * np.finfo(float).eps or smax == 0):
        raise SingularSystemError(
            f"moment matrix is numerically singular (condition {cond:.3g}); "
            "pass a positive regularization"
        )
    filt = s / (s**2 + lam**2)
    return Vt.T @ (filt[:, None] * (U.T @ rhs)), cond, float(lam)


def solve_stability(
    expect_k: ExpectationSet,
    expect_k1: ExpectationSet,
    regularization: float = 1e-6,
    margin: float = 0.05,
    n_boot: int = 200,
    rng: np.random.Generator | None = None,
) -> StabilityEstimate:
    """Stability matrix for the transition from ``expect_k`` to ``expect_k1``.

    ``T`` has shape (len(basis_{k+1}), len(basis_k)). When both sets were
    sampled from the same chains, error bars come from a joint bootstrap over
    chain blocks; exact moments give zero error bars.
    """
    if expect_k1.cross_moments is None or expect_k1.prev_basis is None:
        raise ValueError("layer k+1 expectations carry no cross moments")
    if expect_k1.prev_basis.masks() != expect_k.basis.masks():
        raise ValueError("mismatched bases: cross moments were taken in a different basis")

    A, rhs = _linear_system(
        expect_k.first_moments, expect_k1.first_moments, expect_k1.second_moments, expect_k1.cross_moments
    )
    T, cond, lam = ridge_solve(A, rhs, regularization)
    square = T.shape[0] == T.shape[1]

    se_T = np.zeros_like(T)
    se_eig = np.zeros(T.shape[0] if square else 0)
    boots = 0
    if n_boot > 0 and expect_k.is_sampled and expect_k1.is_sampled:
        rng = rng if rng is not None else np.random.default_rng(0)
        nb = len(expect_k1.block_weights)
        joint = len(expect_k.block_weights) == nb and np.array_equal(
            expect_k.block_weights, expect_k1.block_weights
        )
        reps, eig_reps = [], []
        for _ in range(n_boot):
            idx = rng.integers(0, nb, nb)
            idx_k = idx if joint else rng.integers(0, len(expect_k.block_weights), len(expect_k.block_weights))
            f_k, _, _ = expect_k.resample(idx_k)
            f1, s1, c1 = expect_k1.resample(idx)
            Ab, rb = _linear_system(f_k, f1, (s1 + s1.T) / 2, c1)
            try:
                Tb, _, _ = ridge_solve(Ab, rb, regularization)
            except SingularSystemError:
                continue
            reps.append(Tb)
            if square:
                eig_reps.append(np.sort(np.abs(np.linalg.eigvals(Tb)))[::-1])
        if len(reps) > 1:
            boots = len(reps)
            se_T = np.std(reps, axis=0, ddof=1)
            if square:
                se_eig = np.std(eig_reps, axis=0, ddof=1)

    modes = eigen_analysis(T, margin, se_eig) if square else []
    return StabilityEstimate(
        (expect_k.layer_index, expect_k1.layer_index), T, cond, regularization, lam,
        modes, se_T, se_eig, boots,
    )


# ---------------------------------------------------------------------------


def exact_expectation_set(stack: DeepStack, x, k: int, basis: OperatorBasis,
                          prev_basis: OperatorBasis | None = None) -> ExpectationSet:
    """Moments of layer ``k`` at input ``x`` by enumeration (no sampling noise)."""
    dist = exact.exact_layer_distribution(stack, x, k)
    cross = None
    if prev_basis is not None and k > 1:
        prev = exact.exact_layer_distribution(stack, x, k - 1)
        cross = exact.exact_cross_moments(prev, stack.layers[k - 1], basis, prev_basis)
    return ExpectationSet(
        k, basis, exact.exact_expectations(dist, basis), exact.exact_second_moments(dist, basis),
        cross, prev_basis if cross is not None else None,
    )


def analysis_bases(stack: DeepStack, max_degree: int) -> list[OperatorBasis]:
    """Basis for each layer 1..N, with the degree capped at the layer width."""
    return [enumerate_basis(L.n_out, min(max_degree, L.n_out)) for L in stack.layers]


@dataclass(frozen=True)
class FlowConfig:
    n_chains: int = 100_000
    max_degree: int = 2
    regularization: float = 1e-6
    margin: float = 0.05
    n_boot: int = 200
    n_blocks: int = DEFAULT_BLOCKS
    seed: int = 0


@dataclass
class FlowReport:
    label: int | None
    expectations: list[ExpectationSet]
    distances: list[float | None]
    transitions: list[StabilityEstimate]

    @property
    def top_eigenvalues(self) -> list[float | None]:
        return [t.top_magnitude for t in self.transitions]

    @property
    def has_relevant(self) -> bool:
        return any(t.has_relevant for t in self.transitions)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "bases": [e.basis.masks() for e in self.expectations],
            "expectations": [e.first_moments.tolist() for e in self.expectations],
            "expectation_stderr": [e.first_stderr().tolist() for e in self.expectations],
            "distances": self.distances,
            "top_eigenvalues": self.top_eigenvalues,
            "transitions": [t.to_dict() for t in self.transitions],
            "has_relevant": self.has_relevant,
        }


def flow_for_input(stack: DeepStack, x, config: FlowConfig = FlowConfig(),
                   label: int | None = None, index: int = 0) -> FlowReport:
    ens = propagate(stack, x, config.n_chains, substream(config.seed, "propagate", index))
    bases = analysis_bases(stack, config.max_degree)
    sets = [
        estimate_expectations(e, bases[k], bases[k - 1] if k else None, config.n_blocks)
        for k, e in enumerate(ens)
    ]
    boot = substream(config.seed, "bootstrap", index)
    transitions = [
        solve_stability(sets[k], sets[k + 1], config.regularization, config.margin, config.n_boot, boot)
        for k in range(len(sets) - 1)
    ]
    distances = []
    for k in range(len(sets) - 1):
        a, b = sets[k], sets[k + 1]
        same = a.basis.masks() == b.basis.masks()
        distances.append(float(np.linalg.norm(b.first_moments - a.first_moments)) if same else None)
    return FlowReport(label, sets, distances, transitions)


def flow_report(stack: DeepStack, inputs: Sequence, labels: Sequence[int | None] | None = None,
                config: FlowConfig = FlowConfig()) -> tuple[list[FlowReport], dict]:
    """Per-input flow reports and a class-conditioned summary of the deepest layer.

    The summary compares mean pairwise distances of deepest-layer expectation
    vectors within and across labels.
    """
    if len(inputs) == 0:
        raise ValueError("flow_report needs at least one input")
    labels = list(labels) if labels is not None else [None] * len(inputs)
    reports = [flow_for_input(stack, x, config, y, i) for i, (x, y) in enumerate(zip(inputs, labels))]
    return reports, class_summary(reports)


def class_summary(reports: Sequence[FlowReport]) -> dict:
    deep = [r.expectations[-1].first_moments for r in reports]
    within, across = [], []
    for i, j in combinations(range(len(reports)), 2):
        if reports[i].label is None or reports[j].label is None:
            continue
        d = float(np.linalg.norm(deep[i] - deep[j]))
        (within if reports[i].label == reports[j].label else across).append(d)
    return {
        "within_class_mean_distance": float(np.mean(within)) if within else None,
        "across_class_mean_distance": float(np.mean(across)) if across else None,
        "n_within_pairs": len(within),
        "n_across_pairs": len(across),
    }
