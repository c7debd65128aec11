"""Command-line entry point: ``rgaudit {gen-data,train,audit,oracle-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .audit import RunConfig, audit
from .exact import EnumerationLimitError
from .io import SchemaError, dumps, load_dataset, save_model, write_json
from .oracle import OracleConfig, oracle_check, summary
from .rbm import TrainConfig, train_layerwise
from .tasks import TaskSpec, gen_data

log = logging.getLogger("rgaudit")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _cmd_gen_data(args, cfg: dict) -> int:
    n = args.samples or cfg.pop("n_samples", 1000)
    cfg.pop("n_samples", None)
    if args.seed is not None:
        cfg["seed"] = args.seed
    task = TaskSpec.from_dict(cfg)
    out = gen_data(task, n, args.out or "data.jsonl")
    print(out)
    return 0


def _cmd_train(args, cfg: dict) -> int:
    dataset = cfg.pop("dataset", None) or args.dataset
    if not dataset:
        raise SchemaError("train needs a dataset (config key 'dataset' or --dataset)")
    if args.seed is not None:
        cfg["seed"] = args.seed
    tc = TrainConfig.from_dict(cfg)
    X, y = load_dataset(dataset)
    if np.any(y < 0):
        raise SchemaError(f"{dataset}: every training row needs a label 'y'")
    stack = train_layerwise(X, y, tc)
    out = save_model(args.out or "model.json", stack)
    print(json.dumps({"model": str(out), "train_accuracy": stack.meta["train_accuracy"]}))
    return 0


def _cmd_audit(args, cfg: dict) -> int:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.samples is not None:
        cfg["n_chains"] = args.samples
    if args.max_degree is not None:
        cfg["max_degree"] = args.max_degree
    if args.out:
        cfg["out"] = args.out
    if args.model:
        cfg["model"] = args.model
    if args.inputs:
        cfg["inputs"] = args.inputs
    rc = RunConfig.from_dict(cfg)
    if not rc.model or not rc.inputs:
        raise SchemaError("audit needs 'model' and 'inputs' (config keys or --model/--inputs)")
    docs, paths = audit(rc.model, rc.inputs, rc)
    print(json.dumps({"verdict": docs["attack"]["verdict"], "files": {k: str(v) for k, v in paths.items()}},
                     sort_keys=True))
    return 0


def _cmd_oracle(args, cfg: dict) -> int:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.samples is not None:
        cfg["samples"] = args.samples
    oc = OracleConfig.from_dict(cfg)
    res = summary(oracle_check(oc))
    if args.out:
        write_json(args.out, res)
    sys.stdout.write(dumps(res))
    return 0 if res["pass"] else 1


HELP = {
    "gen-data": "write a prototype-noise dataset and its task sidecar",
    "train": "greedy layer-wise training of an RBM stack",
    "audit": "stability flow, FIM and attack report for a model",
    "oracle-check": "compare sampled estimators with enumeration on tiny nets",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgaudit", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("gen-data", _cmd_gen_data), ("train", _cmd_train),
                     ("audit", _cmd_audit), ("oracle-check", _cmd_oracle)):
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--seed", type=int, help="root seed for every random stream")
        sp.add_argument("--samples", type=int, help="rows to generate, chains per input, or oracle chains")
        sp.add_argument("--max-degree", type=int, help="largest operator degree in the analysis basis")
        sp.add_argument("--out", help="output file (directory for audit)")
        sp.set_defaults(func=fn)
        if name == "train":
            sp.add_argument("--dataset", help="JSON-lines dataset with labels")
        if name == "audit":
            sp.add_argument("--model", help="model JSON written by train")
            sp.add_argument("--inputs", help="JSON-lines inputs to audit")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, _load_config(args.config))
    except (SchemaError, EnumerationLimitError, ValueError) as exc:
        print(f"rgaudit {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
