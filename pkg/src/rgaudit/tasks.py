"""Prototype-plus-flip-noise classification task with a closed-form posterior."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .rng import substream


@dataclass(frozen=True)
class TaskSpec:
    """Class ``y`` emits its prototype with each bit flipped independently w.p. ``flip_noise``."""

    n_in: int
    n_classes: int
    prototypes: np.ndarray
    flip_noise: float
    priors: np.ndarray
    seed: int = 0

    def __post_init__(self):
        P = np.asarray(self.prototypes, dtype=np.uint8)
        pri = np.asarray(self.priors, dtype=float)
        if P.shape != (self.n_classes, self.n_in):
            raise ValueError(f"need {self.n_classes} prototypes of length {self.n_in}, got {P.shape}")
        if len({tuple(r) for r in P}) != len(P):
            raise ValueError("prototypes must be distinct")
        if not np.all((P == 0) | (P == 1)):
            raise ValueError("prototypes must be binary")
        if not 0 <= self.flip_noise < 0.5:
            raise ValueError("flip noise must lie in [0, 0.5)")
        if pri.shape != (self.n_classes,) or np.any(pri <= 0) or not np.isclose(pri.sum(), 1.0):
            raise ValueError("priors must be positive and sum to 1")
        object.__setattr__(self, "prototypes", P)
        object.__setattr__(self, "priors", pri)

    @classmethod
    def default(cls, n_in: int = 8, n_classes: int = 2, flip_noise: float = 0.1, seed: int = 0) -> "TaskSpec":
        return cls(n_in, n_classes, separated_prototypes(n_in, n_classes, seed), flip_noise,
                   np.full(n_classes, 1.0 / n_classes), seed)

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_classes": self.n_classes,
            "prototypes": self.prototypes.tolist(),
            "flip_noise": self.flip_noise,
            "priors": self.priors.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        if "prototypes" not in d:
            return cls.default(d.get("n_in", 8), d.get("n_classes", 2), d.get("flip_noise", 0.1), d.get("seed", 0))
        n_classes = d.get("n_classes", len(d["prototypes"]))
        priors = d.get("priors", [1.0 / n_classes] * n_classes)
        return cls(d.get("n_in", len(d["prototypes"][0])), n_classes, np.array(d["prototypes"]),
                   float(d["flip_noise"]), np.array(priors), int(d.get("seed", 0)))


def separated_prototypes(n_in: int, n_classes: int, seed: int = 0) -> np.ndarray:
    """Prototypes at pairwise Hamming distance >= n_in / 2.

    Two classes get an alternating pattern and its complement; more classes
    are drawn by rejection.
    """
    if n_classes == 1:
        return (np.arange(n_in) % 2).astype(np.uint8)[None, :]
    if n_classes == 2:
        p = (np.arange(n_in) % 2).astype(np.uint8)
        return np.stack([p, 1 - p])
    rng = substream(seed, "prototypes")
    for _ in range(10_000):
        P = rng.integers(0, 2, (n_classes, n_in), dtype=np.uint8)
        d = (P[:, None, :] != P[None, :, :]).sum(-1) + n_in * np.eye(n_classes)
        if d.min() >= n_in / 2:
            return P
    raise ValueError(f"could not place {n_classes} prototypes {n_in / 2} bits apart")


def posterior(task: TaskSpec, x: Sequence[float]) -> np.ndarray:
    """Exact p(y | x) proportional to prior * rho^d (1 - rho)^(n - d), d the Hamming distance."""
    x = np.asarray(x)
    d = (task.prototypes != x).sum(axis=1)
    rho = task.flip_noise
    if rho == 0:
        logl = np.where(d == 0, np.log(task.priors), -np.inf)
    else:
        logl = np.log(task.priors) + d * np.log(rho) + (task.n_in - d) * np.log1p(-rho)
    if np.all(np.isneginf(logl)):
        raise ValueError("input has zero likelihood under every class")
    return np.exp(logl - logsumexp(logl))


def sample_task(task: TaskSpec, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    y = rng.choice(task.n_classes, size=n_samples, p=task.priors)
    flips = rng.random((n_samples, task.n_in)) < task.flip_noise
    X = task.prototypes[y] ^ flips.astype(np.uint8)
    return X.astype(np.uint8), y


def task_sidecar(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".task.json")


def gen_data(task: TaskSpec, n_samples: int, path: Path | str) -> Path:
    """Write a JSON-lines dataset and a sidecar holding ``task``."""
    from .io import write_dataset, write_json

    X, y = sample_task(task, n_samples, substream(task.seed, "data"))
    path = Path(path)
    write_dataset(path, X, y)
    write_json(task_sidecar(path), task.to_dict())
    return path


def load_task(path: Path | str) -> TaskSpec:
    return TaskSpec.from_dict(json.loads(Path(path).read_text()))
