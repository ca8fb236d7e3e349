import math

import pytest

import khgt


def small_dataset(seed=0, target_only=False):
    records, categories = khgt.generate_synthetic(users=30, items=110, behaviors=2, seed=seed)
    return khgt.Dataset(records, categories, target_behavior=1, num_items=110, target_only=target_only)


def small_config(epochs=2):
    c = khgt.TrainConfig()
    c.dim = 8
    c.layers = 1
    c.epochs = epochs
    c.subgraph_nodes = 0
    return c


def test_metrics():
    assert khgt.hr_at_n(3, 3) == 1.0
    assert khgt.hr_at_n(4, 3) == 0.0
    assert khgt.ndcg_at_n(1, 10) == 1.0
    assert khgt.ndcg_at_n(3, 10) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        khgt.hr_at_n(0, 1)


def test_synthetic_is_deterministic():
    a = khgt.generate_synthetic(users=20, items=50, seed=3)
    b = khgt.generate_synthetic(users=20, items=50, seed=3)
    assert a == b
    records, categories = a
    assert len(categories) == 50
    assert all(0 <= u < 20 and 0 <= i < 50 and 0 <= b < 3 for u, i, b, _ in records)


def test_gradcheck():
    assert khgt.gradcheck() < 1e-4


def test_dataset_shape():
    ds = small_dataset()
    assert ds.num_users == 30
    assert ds.num_items == 110
    assert ds.num_behaviors == 2
    assert ds.test_users > 0
    assert small_dataset(target_only=True).num_behaviors == 1


def test_train_evaluate_score(tmp_path):
    ds = small_dataset()
    model, history = khgt.train(small_config(), ds)
    assert [h["epoch"] for h in history] == [1, 2]
    assert all(math.isfinite(h["mean_loss"]) for h in history)
    assert model.hyper["dim"] == 8

    metrics = khgt.evaluate(model, ds)
    assert 0.0 <= metrics["HR@10"] <= 1.0
    assert metrics["HR@1"] <= metrics["HR@10"]
    assert len(metrics["ranks"]) == ds.test_users
    assert all(1 <= r <= 100 for r in metrics["ranks"])

    users, items = model.embeddings(ds)
    assert len(users) == 30 and len(items) == 110 and len(users[0]) == 8
    scores = model.score(ds, 0, [0, 1, 2])
    assert len(scores) == 3

    path = tmp_path / "model.ckpt"
    model.save(path)
    loaded = khgt.Model.load(path)
    assert loaded.hyper == model.hyper
    assert loaded.score(ds, 0, [0, 1, 2]) == pytest.approx(scores, abs=1e-4)


def test_bad_config_raises():
    c = small_config()
    c.learning_rate = -1.0
    with pytest.raises(ValueError):
        khgt.train(c, small_dataset())
    with pytest.raises(ValueError):
        khgt.Model.load("/nonexistent/model.ckpt")


def test_variants():
    v = khgt.Variant()
    assert v.attentive_aggregation and v.item_relations
    v.item_relations = False
    c = small_config(epochs=1)
    c.variant = v
    model, _ = khgt.train(c, small_dataset())
    assert 0.0 <= khgt.evaluate(model, small_dataset(), variant=v)["NDCG@10"] <= 1.0


def test_run_cli(tmp_path):
    code, out, err = khgt.run(["synth", "--synth-users", "20", "--synth-items", "110", "--out", str(tmp_path / "d")])
    assert code == 0, err
    assert (tmp_path / "d" / "interactions.tsv").exists()
    code, _, err = khgt.run(["frobnicate"])
    assert code == 1 and err
