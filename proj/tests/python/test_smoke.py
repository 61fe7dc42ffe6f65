import json
import math

import numpy as np
import pytest

import inet_trees as it


def test_dataset_invariants():
    x, y, prov = it.generate_dataset(3, 400, seed=5)
    assert x.shape == (400, 3)
    assert sum(y) == 200
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert len(json.loads(prov)["features"]) == 3
    again, _, _ = it.generate_dataset(3, 400, seed=5)
    assert np.array_equal(x, again)


def test_separability():
    xor = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    assert not it.is_linearly_separable(xor, [0, 0, 1, 1])
    assert it.is_linearly_separable(np.array([[0.0], [1.0]]), [0, 1])


def test_cart_and_tree_json():
    xor = np.array([[0.1, 0.1], [0.9, 0.9], [0.1, 0.9], [0.9, 0.1]])
    tree = it.cart_fit(xor, [0, 0, 1, 1], max_depth=2)
    assert tree.family == "standard_dt"
    assert np.array_equal(tree.evaluate(xor) >= 0.5, [False, False, True, True])
    back = it.Tree.from_json(tree.to_json())
    assert back.to_json() == tree.to_json()
    assert tree.to_dot().startswith("digraph")


def test_lambda_and_distill():
    x, y, _ = it.generate_dataset(2, 600, seed=11)
    net = it.train_lambda_net(x, np.asarray(y, dtype=float), seed=3, epochs=30)
    assert net.theta.shape == (it.lambda_theta_size(2),)
    p = net.predict(x)
    assert p.shape == (600,) and p.min() >= 0.0 and p.max() <= 1.0
    again = it.LambdaNet.from_json(net.to_json())
    assert np.array_equal(again.theta, net.theta)
    tree = it.distill(net, queries=2000, depth=2, seed=1)
    f = it.fidelity(tree, net, x)
    assert 0.0 <= f <= 1.0


def test_welch():
    a = [0.81, 0.84, 0.79, 0.86, 0.80]
    b = [0.75, 0.78, 0.74, 0.77, 0.79, 0.72, 0.76]
    t, df, p = it.welch_t_test(a, b)
    va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
    assert math.isclose(t, (np.mean(a) - np.mean(b)) / math.sqrt(va + vb), rel_tol=1e-12)
    assert 0.0 < p < 0.05
    assert df > 0


def test_errors_and_cli(tmp_path):
    with pytest.raises(it.ConfigError):
        it.generate_dataset(0, 10)
    assert issubclass(it.DataError, it.InetError)
    code, _, err = it.run_cli(["gen-data", "--n", "0", "--out", str(tmp_path / "g")])
    assert code == 2 and err.startswith("error: kind=config")
    code, out, _ = it.run_cli(["gen-data", "--preset", "desk", "--m", "50", "--out", str(tmp_path / "ok")])
    assert code == 0
    assert (tmp_path / "ok" / "dataset.csv").exists()
