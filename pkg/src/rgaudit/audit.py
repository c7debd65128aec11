"""End-to-end audit of a trained stack and the report bundle it writes."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .exact import ENUMERATION_LIMIT
from .fim import (
    assemble_fim,
    chain_jacobian,
    evaluate_attack,
    first_layer_jacobian,
    kl_to_posterior,
    top_mode,
)
from .io import load_dataset, load_model, write_csv, write_json
from .mcrg import FlowConfig, class_summary, flow_for_input
from .rbm import DeepStack
from .rng import substream
from .tasks import TaskSpec, load_task, posterior, task_sidecar

log = logging.getLogger(__name__)

VERDICT_RULE = (
    "vulnerable iff, for some input, a transition has a relevant mode and the KL "
    "along the top FIM direction exceeds the control direction at the smallest epsilon"
)


@dataclass
class RunConfig:
    model: str | None = None
    inputs: str | None = None
    task: str | None = None
    hidden_sizes: list[int] = field(default_factory=lambda: [6])
    n_chains: int = 100_000
    max_degree: int = 2
    regularization: float = 1e-6
    margin: float = 0.05
    n_boot: int = 200
    n_blocks: int = 250
    epsilons: list[float] = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.2])
    attack_samples: int = 20_000
    max_inputs: int = 8
    seed: int = 0
    enumeration_limit: int = ENUMERATION_LIMIT
    out: str = "audit_out"

    def __post_init__(self):
        for name in ("n_chains", "max_degree", "attack_samples", "max_inputs", "n_blocks", "enumeration_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_boot < 0 or self.regularization < 0 or self.margin < 0:
            raise ValueError("n_boot, regularization and margin must be non-negative")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be a non-empty list of positive numbers")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def flow_config(self) -> FlowConfig:
        return FlowConfig(self.n_chains, self.max_degree, self.regularization, self.margin,
                          self.n_boot, self.n_blocks, self.seed)


def verdict(flow: dict, attack: dict) -> str:
    """Recompute the verdict from the ``flow.json`` and ``attack.json`` contents."""
    for fi, ai in zip(flow["inputs"], attack["inputs"]):
        relevant = any(m["relevant"] for t in fi["transitions"] for m in t["eigenmodes"])
        recs = ai["perturbations"]
        top = [r for r in recs if r["direction"] == "top"]
        ctl = [r for r in recs if r["direction"] == "control"]
        if not relevant or not top or not ctl:
            continue
        eps = min(r["epsilon"] for r in top)
        kt = [r["kl"] for r in top if r["epsilon"] == eps][0]
        kc = [r["kl"] for r in ctl if r["epsilon"] == eps]
        if kc and kt > kc[0]:
            return "vulnerable"
    return "robust"


def audit_inputs(stack: DeepStack, X: np.ndarray, y: Sequence[int] | None, config: RunConfig,
                 task: TaskSpec | None = None, docs: dict | None = None) -> dict:
    """Run every stage on each input and return the report documents.

    ``docs`` is filled in place, so a caller keeps finished stages when a
    later one raises.
    """
    fc = config.flow_config()
    y = list(y) if y is not None else [None] * len(X)
    flows, fims, attacks = [], [], []
    docs = docs if docs is not None else {}
    docs.update(flow=None, fim=None, attack=None)
    try:
        reports = []
        for i, x in enumerate(X):
            label = None if y[i] is None or y[i] < 0 else int(y[i])
            reports.append(flow_for_input(stack, x, fc, label, i))
            flows.append(dict(reports[-1].to_dict(), input=i, x=np.asarray(x).tolist()))
        docs["flow"] = {
            "config": asdict(fc),
            "inputs": flows,
            "class_summary": class_summary(reports),
        }

        for i, (x, rep) in enumerate(zip(X, reports)):
            J1 = first_layer_jacobian(stack.layers[0], rep.expectations[0].basis, x, "analytic")
            chain = chain_jacobian(J1, rep.transitions)
            F = assemble_fim(chain, rep.expectations[-1],
                             {"transitions": [list(t.transition) for t in rep.transitions], "mode": "sampled"})
            lam, v = top_mode(F)
            vals, _ = F.spectrum()
            fims.append({"input": i, "matrix": F.matrix.tolist(), "meta": F.meta,
                         "eigenvalues": vals.tolist(), "top_eigenvalue": lam, "top_vector": v.tolist(),
                         "first_layer_jacobian": J1.matrix.tolist(), "chain_jacobian": chain.tolist()})
            rep_attack = evaluate_attack(
                stack, x, v, config.epsilons, fim=F, n_samples=config.attack_samples,
                rng=substream(config.seed, "attack", i), limit=config.enumeration_limit,
            )
            entry = dict(rep_attack.to_dict(), input=i)
            if task is not None and all(L.n_out <= config.enumeration_limit for L in stack.layers):
                entry["kl_to_posterior"] = kl_to_posterior(posterior(task, x), stack, x, config.enumeration_limit)
            attacks.append(entry)
    finally:
        if docs["flow"] is not None:
            docs["fim"] = {"inputs": fims}
            docs["attack"] = {"inputs": attacks}
    docs["attack"]["verdict_rule"] = VERDICT_RULE
    docs["attack"]["verdict"] = verdict(docs["flow"], docs["attack"])
    return docs


def write_bundle(out: Path | str, docs: dict) -> dict[str, Path]:
    out = Path(out)
    paths = {}
    if docs.get("flow") is not None:
        paths["flow"] = write_json(out / "flow.json", docs["flow"])
        rows = []
        for f in docs["flow"]["inputs"]:
            for t in f["transitions"]:
                for rank, m in enumerate(t["eigenmodes"]):
                    rows.append((f["input"], t["transition"][1], rank, m["magnitude"], m["phase"],
                                 m["stderr"], m["relevant"]))
        paths["eigs_vs_depth"] = write_csv(
            out / "eigs_vs_depth.csv",
            ["input", "layer", "mode_rank", "eig_magnitude", "eig_phase", "stderr", "relevant"], rows)
    if docs.get("fim") is not None:
        paths["fim"] = write_json(out / "fim.json", docs["fim"])
        rows = [(f["input"], r, lam) for f in docs["fim"]["inputs"] for r, lam in enumerate(f["eigenvalues"])]
        paths["fim_spectrum"] = write_csv(out / "fim_spectrum.csv", ["input", "rank", "eigenvalue"], rows)
    if docs.get("attack") is not None:
        paths["attack"] = write_json(out / "attack.json", docs["attack"])
        rows = [(a["input"], r["direction"], r["epsilon"], r["kl"], r["kl_stderr"], r["flipped"])
                for a in docs["attack"]["inputs"] for r in a["perturbations"]]
        paths["kl_vs_eps"] = write_csv(
            out / "kl_vs_eps.csv", ["input", "direction", "epsilon", "kl", "kl_stderr", "flipped"], rows)
    return paths


def audit(model_path: Path | str, input_path: Path | str, config: RunConfig) -> tuple[dict, dict[str, Path]]:
    """Audit the model file against the inputs file and write the bundle to ``config.out``.

    A task sidecar next to the inputs (or ``config.task``) adds the KL to the
    exact posterior for each input. Stages finished before a failure are
    still written.
    """
    stack = load_model(model_path)
    X, y = load_dataset(input_path)
    X, y = X[: config.max_inputs], y[: config.max_inputs]
    task_path = Path(config.task) if config.task else task_sidecar(input_path)
    task = load_task(task_path) if task_path.exists() else None
    docs: dict = {}
    try:
        audit_inputs(stack, X, y, config, task, docs)
    except Exception:
        log.exception("audit failed; writing finished stages")
        raise
    finally:
        paths = write_bundle(config.out, docs)
    log.info("verdict: %s", docs["attack"]["verdict"])
    return docs, paths
