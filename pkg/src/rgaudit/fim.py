"""Fisher information over input space and perturbation along its stiff directions.

The FIM of the output distribution is assembled by the chain rule: the
first layer maps the input to couplings, each transition's stability matrix
carries coupling perturbations one layer up, and the output layer's operator
covariance turns coupling sensitivities into a metric on inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exact
from .exact import ENUMERATION_LIMIT, EnumerationLimitError
from .mcrg import ExpectationSet, StabilityEstimate, exact_expectation_set, ridge_solve, solve_stability
from .operators import PROB_FLOOR, OperatorBasis, all_states, enumerate_basis
from .rbm import DeepStack, RbmLayer, block_means, check_input, hidden_given_visible, propagate


@dataclass(frozen=True)
class FirstLayerJacobian:
    """d g^(1)_b / d x_i, shape (len(basis), n_in)."""

    matrix: np.ndarray
    method: str
    basis: OperatorBasis | None = None


def first_layer_jacobian(
    layer1: RbmLayer,
    basis: OperatorBasis,
    x: Sequence[float],
    method: str = "analytic",
    samples: np.ndarray | None = None,
    regularization: float = 0.0,
) -> FirstLayerJacobian:
    """Sensitivity of the first-layer couplings to the input.

    ``"analytic"``: the layer-1 Hamiltonian is ``-sum_j s_j (W x + a)_j / 2``
    in spins, so only single-node rows are non-zero, equal to ``-W/2``.

    ``"linear-solve"``: solves ``sum_a J[a, i] (<O_g><O_a> - <O_g O_a>) =
    d<O_g>/dx_i`` using exact layer-1 moments, or moments of ``samples``
    (layer-1 configurations drawn at ``x``) when given.
    """
    if basis.dimension != layer1.n_out:
        raise ValueError(f"basis over {basis.dimension} nodes, layer 1 has {layer1.n_out}")
    x = check_input(x, layer1.n_in)
    W = layer1.weights
    if method == "analytic":
        J = np.zeros((len(basis), layer1.n_in))
        for r, op in enumerate(basis.operators):
            if op.degree == 1:
                J[r] = -0.5 * W[op.mask[0]]
        return FirstLayerJacobian(J, method, basis)
    if method != "linear-solve":
        raise ValueError(f"unknown method {method!r}")

    p = hidden_given_visible(layer1, x)
    if samples is None:
        H = all_states(layer1.n_out).astype(float)
        w = exact.first_layer_distribution(layer1, x)
    else:
        H = np.asarray(samples, dtype=float)
        w = np.full(len(H), 1.0 / len(H))
    O = basis.values(H.astype(np.uint8))
    m = O.T @ w
    S = O.T @ (O * w[:, None])
    # d t_1(h|x)/dx_i = t_1(h|x) sum_j (h_j - p_j) W_ji
    score = (H - p) @ W
    rhs = O.T @ (score * w[:, None])
    A = np.outer(m, m) - S
    J, _, _ = ridge_solve(A, rhs, regularization)
    return FirstLayerJacobian(J, method, basis)


def chain_jacobian(
    first: FirstLayerJacobian | np.ndarray,
    transitions: Sequence[StabilityEstimate | np.ndarray],
) -> np.ndarray:
    """d g^(N) / d x = T^(N) ... T^(2) J^(1)."""
    J = np.asarray(first.matrix if isinstance(first, FirstLayerJacobian) else first, dtype=float)
    for k, t in enumerate(transitions):
        T = t.matrix if isinstance(t, StabilityEstimate) else np.asarray(t, dtype=float)
        if isinstance(t, StabilityEstimate) and t.transition != (k + 1, k + 2):
            raise ValueError(f"transition {t.transition} out of order (expected {(k + 1, k + 2)})")
        if T.shape[1] != J.shape[0]:
            raise ValueError(
                f"basis mismatch at transition {k + 1}->{k + 2}: T is {T.shape}, "
                f"incoming sensitivity has {J.shape[0]} rows"
            )
        J = T @ J
    return J


@dataclass(frozen=True)
class FimMatrix:
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and matching eigenvectors as columns."""
        vals, vecs = np.linalg.eigh(self.matrix)
        order = np.argsort(vals)[::-1]
        vecs = vecs[:, order]
        for c in range(vecs.shape[1]):
            vecs[:, c] = _fix_sign(vecs[:, c])
        return vals[order], vecs


def assemble_fim(chain: np.ndarray, output_moments: ExpectationSet, meta: dict | None = None) -> FimMatrix:
    """F = J^T Cov_N(O, O) J, symmetrised."""
    J = np.asarray(chain, dtype=float)
    C = output_moments.covariance()
    if J.shape[0] != C.shape[0]:
        raise ValueError(f"chain has {J.shape[0]} coupling rows, output basis has {C.shape[0]}")
    C = (C + C.T) / 2
    F = J.T @ C @ J
    info = {"basis": output_moments.basis.masks(), "layer": output_moments.layer_index}
    info.update(meta or {})
    return FimMatrix((F + F.T) / 2, info)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def top_mode(F: FimMatrix | np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenpair; the eigenvector's largest component is positive."""
    M = F.matrix if isinstance(F, FimMatrix) else np.asarray(F, dtype=float)
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    return float(vals[-1]), _fix_sign(vecs[:, -1])


def bottom_mode(F: FimMatrix | np.ndarray) -> tuple[float, np.ndarray]:
    M = F.matrix if isinstance(F, FimMatrix) else np.asarray(F, dtype=float)
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    return float(vals[0]), _fix_sign(vecs[:, 0])


def exact_fim(stack: DeepStack, x, limit: int = ENUMERATION_LIMIT) -> FimMatrix:
    """Chain-rule FIM in the full basis with enumerated moments (no sampling)."""
    bases = [enumerate_basis(L.n_out) for L in stack.layers]
    for j, L in enumerate(stack.layers):
        if L.n_out > limit:
            raise EnumerationLimitError(f"layer {j + 1} has {L.n_out} nodes, above the enumeration limit of {limit}")
    sets = [exact_expectation_set(stack, x, k + 1, bases[k], bases[k - 1] if k else None)
            for k in range(len(stack))]
    Ts = [solve_stability(sets[k], sets[k + 1], 0.0, n_boot=0) for k in range(len(sets) - 1)]
    J1 = first_layer_jacobian(stack.layers[0], bases[0], x)
    return assemble_fim(chain_jacobian(J1, Ts), sets[-1], {"mode": "exact"})


# ---------------------------------------------------------------------------
# attack evaluation


def class_distribution(stack: DeepStack, states: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Distribution over classes from output configurations.

    Each configuration votes for the class block(s) with the highest mean
    activity; ties split the vote evenly.
    """
    states = np.asarray(states, dtype=float)
    bm = block_means(stack, states)
    top = bm == bm.max(axis=1, keepdims=True)
    votes = top / top.sum(axis=1, keepdims=True)
    if weights is None:
        return votes.mean(axis=0)
    return np.asarray(weights) @ votes


def _enumerable(stack: DeepStack, limit: int) -> bool:
    return all(L.n_out <= limit for L in stack.layers)


@dataclass
class OutputState:
    """What the attack needs about q_N(.|x): full distribution or samples."""

    marginals: np.ndarray
    block: np.ndarray
    classes: np.ndarray
    full: np.ndarray | None = None
    votes: np.ndarray | None = None

    @property
    def readout(self) -> int:
        return int(np.argmax(self.block))


def output_state(stack: DeepStack, x, mode: str, n_samples: int, rng, limit: int) -> OutputState:
    if mode == "exact":
        q = exact.output_distribution(stack, x, limit)
        H = all_states(stack.layers[-1].n_out)
        marg = q @ H
        return OutputState(marg, block_means(stack, marg), class_distribution(stack, H, q), full=q)
    ens = propagate(stack, x, n_samples, rng)
    prev = ens[-1].paired_previous
    marg = hidden_given_visible(stack.layers[-1], prev).mean(axis=0)
    bm = block_means(stack, ens[-1].samples.astype(float))
    top = bm == bm.max(axis=1, keepdims=True)
    votes = top / top.sum(axis=1, keepdims=True)
    return OutputState(marg, block_means(stack, marg), votes.mean(axis=0), votes=votes)


def _smoothed(p: np.ndarray, n: int) -> np.ndarray:
    p = p + 1.0 / (2 * n)
    return p / p.sum()


def _kl_between(a: OutputState, b: OutputState, n: int, rng, n_boot: int = 100) -> tuple[float, float]:
    if a.full is not None:
        return exact.exact_kl(a.full, b.full), 0.0
    kl = exact.exact_kl(_smoothed(a.classes, n), _smoothed(b.classes, n))
    reps = []
    for _ in range(n_boot):
        pa = a.votes[rng.integers(0, n, n)].mean(axis=0)
        pb = b.votes[rng.integers(0, n, n)].mean(axis=0)
        reps.append(exact.exact_kl(_smoothed(pa, n), _smoothed(pb, n)))
    return kl, float(np.std(reps, ddof=1))


@dataclass
class PerturbationRecord:
    epsilon: float
    direction: str
    x_perturbed: np.ndarray
    kl: float
    kl_stderr: float
    class_before: int
    class_after: int

    @property
    def flipped(self) -> bool:
        return self.class_before != self.class_after

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "direction": self.direction,
            "x_perturbed": self.x_perturbed.tolist(),
            "kl": self.kl,
            "kl_stderr": self.kl_stderr,
            "class_before": self.class_before,
            "class_after": self.class_after,
            "flipped": self.flipped,
        }


@dataclass
class AdversarialReport:
    x: np.ndarray
    spectrum: np.ndarray
    top_vector: np.ndarray
    records: list[PerturbationRecord]
    mode: str
    stiff: bool = True
    control_vector: np.ndarray | None = None
    bits_to_flip: list[int] | None = None

    def kl_curve(self, direction: str = "top") -> list[tuple[float, float]]:
        return [(r.epsilon, r.kl) for r in self.records if r.direction == direction]

    @property
    def sloppiness(self) -> dict:
        lam = np.asarray(self.spectrum, dtype=float)
        ratios = [float(lam[i + 1] / lam[i]) if lam[i] > 0 else None for i in range(len(lam) - 1)]
        return {
            "eigenvalues": lam.tolist(),
            "decay_ratios": ratios,
            "descending": bool(np.all(np.diff(lam) <= 1e-12 * max(1.0, abs(lam[0])))) if lam.size else True,
        }

    def dominates_control(self) -> bool | None:
        """Top-direction KL above control KL at the smallest swept epsilon."""
        top = [r for r in self.records if r.direction == "top"]
        ctl = [r for r in self.records if r.direction == "control"]
        if not top or not ctl:
            return None
        eps = min(r.epsilon for r in top)
        kt = next(r.kl for r in top if r.epsilon == eps)
        kc = next((r.kl for r in ctl if r.epsilon == eps), None)
        return None if kc is None else bool(kt > kc)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "mode": self.mode,
            "stiff_direction": self.stiff,
            "top_vector": self.top_vector.tolist(),
            "control_vector": None if self.control_vector is None else self.control_vector.tolist(),
            "bits_to_flip": self.bits_to_flip,
            "sloppiness": self.sloppiness,
            "dominates_control": self.dominates_control(),
            "perturbations": [r.to_dict() for r in self.records],
        }


def evaluate_attack(
    stack: DeepStack,
    x: Sequence[float],
    v: np.ndarray,
    epsilons: Sequence[float],
    *,
    fim: FimMatrix | None = None,
    control: np.ndarray | None = None,
    mode: str = "auto",
    n_samples: int = 20_000,
    rng: np.random.Generator | None = None,
    limit: int = ENUMERATION_LIMIT,
    n_bits: int = 3,
) -> AdversarialReport:
    """Move ``x`` along ``v`` by each epsilon and measure the output change.

    The control direction defaults to the FIM's least-stiff eigenvector when
    ``fim`` is given. KL is over full output configurations in exact mode
    and over smoothed class-vote distributions when sampled.
    """
    x = check_input(x, stack.n_in)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape or not np.isclose(np.linalg.norm(v), 1.0, atol=1e-8):
        raise ValueError("direction must be a unit vector of the input dimension")
    if any(e < 0 for e in epsilons):
        raise ValueError("epsilons must be non-negative")
    if mode == "auto":
        mode = "exact" if _enumerable(stack, limit) else "sampled"
    rng = rng if rng is not None else np.random.default_rng(0)

    spectrum = np.zeros(0)
    stiff = True
    if fim is not None:
        spectrum, vecs = fim.spectrum()
        stiff = bool(spectrum[0] > 1e-12)
        if control is None:
            control = vecs[:, -1]
    directions = [("top", v)] + ([("control", np.asarray(control, dtype=float))] if control is not None else [])

    base = output_state(stack, x, mode, n_samples, rng, limit)
    records = []
    for name, d in directions:
        for eps in sorted(epsilons):
            xp = np.clip(x + eps * d, 0.0, 1.0)
            st = output_state(stack, xp, mode, n_samples, rng, limit)
            kl, se = _kl_between(base, st, n_samples, rng)
            records.append(PerturbationRecord(float(eps), name, xp, kl, se, base.readout, st.readout))

    bits = None
    if np.all((x == 0) | (x == 1)):
        bits = [int(i) for i in np.argsort(-np.abs(v), kind="stable")[:n_bits]]
    return AdversarialReport(x, spectrum, v, records, mode, stiff, control, bits)


def kl_to_posterior(posterior: np.ndarray, stack: DeepStack, x, limit: int = ENUMERATION_LIMIT) -> float:
    """KL(p(.|x) || q_N(.|x)) with q_N the exact class-vote distribution."""
    st = output_state(stack, x, "exact", 0, None, limit)
    return exact.exact_kl(posterior, st.classes, PROB_FLOOR)
