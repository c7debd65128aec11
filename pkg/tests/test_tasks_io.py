import json

import numpy as np
import pytest

from rgaudit.io import SchemaError, dumps, load_dataset, load_model, save_model, write_csv, write_dataset
from rgaudit.nets import random_stack
from rgaudit.rng import substream
from rgaudit.tasks import TaskSpec, gen_data, load_task, posterior, sample_task, task_sidecar


def test_zero_noise_reproduces_prototypes():
    task = TaskSpec.default(8, 2, 0.0)
    X, y = sample_task(task, 200, substream(0, "t"))
    np.testing.assert_array_equal(X, task.prototypes[y])


def test_flip_rate_within_3_sigma():
    task = TaskSpec.default(10, 2, 0.1)
    n = 10_000
    X, y = sample_task(task, n, substream(1, "t"))
    rate = (X != task.prototypes[y]).mean()
    assert abs(rate - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / (n * 10))


def test_prototypes_separated():
    for n_classes in (2, 3, 4):
        P = TaskSpec.default(12, n_classes, 0.1).prototypes
        d = (P[:, None] != P[None]).sum(-1) + 12 * np.eye(n_classes)
        assert d.min() >= 6


def test_posterior_peaks_at_prototype():
    task = TaskSpec.default(8, 3, 0.1)
    for c, proto in enumerate(task.prototypes):
        p = posterior(task, proto)
        assert p.argmax() == c and p.sum() == pytest.approx(1.0)
    zero = TaskSpec.default(8, 2, 0.0)
    np.testing.assert_array_equal(posterior(zero, zero.prototypes[1]), [0, 1])
    with pytest.raises(ValueError):
        posterior(zero, np.ones(8))


def test_task_validation():
    with pytest.raises(ValueError):
        TaskSpec(2, 2, np.array([[0, 1], [0, 1]]), 0.1, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        TaskSpec(2, 2, np.array([[0, 1], [1, 0]]), 0.6, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        TaskSpec(2, 2, np.array([[0, 1], [1, 0]]), 0.1, np.array([0.7, 0.5]))


def test_gen_data_round_trip(tmp_path):
    task = TaskSpec.default(6, 2, 0.1, seed=5)
    path = gen_data(task, 50, tmp_path / "d.jsonl")
    X, y = load_dataset(path)
    assert X.shape == (50, 6) and set(np.unique(y)) <= {0, 1}
    again = load_task(task_sidecar(path))
    np.testing.assert_array_equal(again.prototypes, task.prototypes)
    first = path.read_bytes()
    gen_data(task, 50, path)
    assert path.read_bytes() == first


def test_model_round_trip(tmp_path):
    stack = random_stack([3, 4, 2], np.random.default_rng(0))
    back = load_model(save_model(tmp_path / "m.json", stack))
    for a, b in zip(stack.layers, back.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.hidden_bias, b.hidden_bias)


@pytest.mark.parametrize("doc,match", [
    ({}, "layers"),
    ({"layers": [{"W": [[1.0]], "a": [0.0]}]}, "'b'"),
    ({"layers": [{"W": [[1.0, 2.0]], "a": [0.0], "b": [0.0]}]}, "layers\\[0\\]"),
    ({"layers": [{"W": [[1.0]], "a": [0.0], "b": [0.0]}, {"W": [[1.0, 1.0]], "a": [0.0], "b": [0, 0]}]}, "m.json"),
])
def test_model_schema_errors(tmp_path, doc, match):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match=match):
        load_model(p)


@pytest.mark.parametrize("lines,match", [
    (['{"x": [0, 1]}', '{"y": 1}'], ":2: missing field 'x'"),
    (['{"x": [0, 1]}', '{"x": [0, 1, 1]}'], ":2: field 'x' has length"),
    (['{"x": [0, 2]}'], ":1: field 'x' has entries outside"),
    (['{"x": [0, 1], "y": "a"}'], ":1: field 'y'"),
    (['not json'], ":1: invalid JSON"),
    ([], "empty dataset"),
])
def test_dataset_schema_errors(tmp_path, lines, match):
    p = tmp_path / "d.jsonl"
    p.write_text("\n".join(lines))
    with pytest.raises(SchemaError, match=match):
        load_dataset(p)


def test_missing_label_is_minus_one(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"x": [0.5, 0.25]}\n')
    X, y = load_dataset(p)
    assert y.tolist() == [-1] and X.tolist() == [[0.5, 0.25]]


def test_canonical_outputs(tmp_path):
    assert dumps({"b": np.float64(0.1), "a": np.arange(2)}) == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 0.1\n}\n'
    write_csv(tmp_path / "t.csv", ["v"], [(0.1,), (np.float64(1 / 3),)])
    assert (tmp_path / "t.csv").read_text() == "v\n0.1\n0.3333333333333333\n"
    write_dataset(tmp_path / "d.jsonl", np.array([[0, 1.0, 0.5]]), [1])
    assert (tmp_path / "d.jsonl").read_text() == '{"x": [0, 1, 0.5], "y": 1}\n'
