import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointnn.datasets import (
    PRIMITIVES,
    LabeledDataset,
    accuracy,
    classification_report,
    episode_indices,
    evaluate_classification,
    evaluate_features,
    few_shot_accuracies,
    sample_episode,
    sample_primitive,
    synth_primitives,
)
from pointnn.encoder import EncoderConfig

TINY = EncoderConfig(stages=2, init_dim=12, neighbors=8)


def test_synth_is_deterministic():
    a = synth_primitives(per_class=3, points=64, seed=5)
    b = synth_primitives(per_class=3, points=64, seed=5)
    for x, y in zip(a.clouds, b.clouds):
        np.testing.assert_array_equal(x, y)
    assert a.labels.tolist() == b.labels.tolist()
    assert a.class_names == PRIMITIVES


def test_synth_splits_and_seeds_differ():
    train = synth_primitives(["sphere"], per_class=1, points=64, seed=0, split="train")
    test = synth_primitives(["sphere"], per_class=1, points=64, seed=0, split="test")
    other = synth_primitives(["sphere"], per_class=1, points=64, seed=1, split="train")
    assert not np.array_equal(train.clouds[0], test.clouds[0])
    assert not np.array_equal(train.clouds[0], other.clouds[0])


def test_noise_free_sphere_on_unit_sphere():
    ds = synth_primitives(["sphere"], per_class=2, points=256, noise=0.0)
    for c in ds.clouds:
        np.testing.assert_allclose(np.linalg.norm(c, axis=1), 1.0, atol=1e-6)


def test_synth_fits_unit_ball():
    ds = synth_primitives(per_class=2, points=128)
    for c in ds.clouds:
        assert c.shape == (128, 3)
        assert np.linalg.norm(c, axis=1).max() == pytest.approx(1.0)


def test_cube_points_lie_on_faces():
    pts = sample_primitive("cube", 500, np.random.default_rng(0))
    np.testing.assert_allclose(np.abs(pts).max(axis=1), 1.0)


@pytest.mark.parametrize("name", PRIMITIVES)
def test_primitive_samples_finite(name):
    pts = sample_primitive(name, 200, np.random.default_rng(1))
    assert pts.shape == (200, 3) and np.all(np.isfinite(pts))


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_primitives(["blob"], per_class=1)
    with pytest.raises(ValueError):
        synth_primitives(split="val")


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset([np.zeros((4, 3))], [0, 1], ("a", "b"))
    with pytest.raises(ValueError):
        LabeledDataset([np.zeros((4, 3))], [2], ("a", "b"))


def test_episode_counts_and_disjoint():
    labels = np.repeat(np.arange(6), 40)
    classes, s, q = episode_indices(labels, 5, 10, 20, seed=3)
    assert len(classes) == 5 and len(s) == 50 and len(q) == 100
    assert not set(s) & set(q)
    for c in classes:
        assert np.sum(labels[s] == c) == 10 and np.sum(labels[q] == c) == 20
    again = episode_indices(labels, 5, 10, 20, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip((classes, s, q), again))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10), st.integers(0, 10), st.integers(0, 10**6))
def test_episode_properties(n_way, k_shot, query, seed):
    labels = np.repeat(np.arange(6), 20)
    classes, s, q = episode_indices(labels, n_way, k_shot, query, seed)
    assert len(set(classes.tolist())) == n_way
    assert len(s) == n_way * k_shot and len(q) == n_way * query
    assert not set(s.tolist()) & set(q.tolist())
    assert set(labels[np.r_[s, q]].tolist()) <= set(classes.tolist())


def test_episode_errors_name_the_class():
    labels = np.r_[np.zeros(30, int), np.ones(5, int)]
    with pytest.raises(ValueError, match="'cone'"):
        episode_indices(labels, 2, 10, 20, 0, class_names=["cube", "cone"])
    with pytest.raises(ValueError):
        episode_indices(labels, 3, 1, 1, 0)


def test_sample_episode_relabels():
    ds = synth_primitives(per_class=4, points=32)
    ep = sample_episode(ds, n_way=3, k_shot=2, query_per_class=2, seed=1)
    assert sorted(set(ep.support.labels.tolist())) == [0, 1, 2]
    assert ep.support.class_names == tuple(ds.class_names[c] for c in ep.classes)
    for i, idx in enumerate(ep.query_index):
        assert ep.support.class_names[ep.query.labels[i]] == ds.class_names[ds.labels[idx]]


def test_accuracy():
    assert accuracy([0, 1, 2, 2], [0, 1, 1, 2]) == 75.0
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([0], [0, 1])


def test_report_format_is_deterministic():
    r = classification_report([0, 1, 1], [0, 1, 0], ("a", "b"), 100, timing={"encode": 1.23})
    assert r.confusion.tolist() == [[1, 1], [0, 1]]
    assert r.per_class == {"a": 50.0, "b": 100.0}
    text = r.format()
    assert "accuracy=66.6667" in text and "time." not in text
    assert "time.encode=1.230" in r.format(timing=True)
    assert text == classification_report([0, 1, 1], [0, 1, 0], ("a", "b"), 100).format()


def test_evaluate_features_auto_gamma():
    rng = np.random.default_rng(0)
    centers = rng.normal(size=(3, 10))
    tr = np.repeat(centers, 5, axis=0) + 0.1 * rng.normal(size=(15, 10))
    te = np.repeat(centers, 2, axis=0) + 0.1 * rng.normal(size=(6, 10))
    y_tr, y_te = np.repeat(np.arange(3), 5), np.repeat(np.arange(3), 2)
    r = evaluate_features(tr, y_tr, te, y_te, ("a", "b", "c"), gamma="auto")
    assert r.accuracy == 100.0 and r.extra["gamma_selection"] == "leave-one-out"
    with pytest.raises(ValueError):
        evaluate_features(tr, y_tr, te, y_te, ("a", "b", "c"), gamma="best")


def test_evaluate_classification_small():
    train = synth_primitives(["sphere", "cube"], per_class=4, points=64, seed=0)
    test = synth_primitives(["sphere", "cube"], per_class=2, points=64, seed=0, split="test")
    r = evaluate_classification(train, test, TINY)
    assert r.confusion.sum() == 4
    assert set(r.timing) == {"encode", "predict"}


def test_few_shot_accuracies_seeded():
    rng = np.random.default_rng(1)
    feats = np.repeat(rng.normal(size=(6, 8)), 10, axis=0) + 0.05 * rng.normal(size=(60, 8))
    labels = np.repeat(np.arange(6), 10)
    a = few_shot_accuracies(feats, labels, 5, 2, query_per_class=3, runs=4, seed=2)
    b = few_shot_accuracies(feats, labels, 5, 2, query_per_class=3, runs=4, seed=2)
    assert a.shape == (4,)
    np.testing.assert_array_equal(a, b)
    assert a.min() == 100.0


def test_episode_exhaustion_leaves_one_query():
    labels = np.repeat(np.arange(3), 5)
    classes, s, q = episode_indices(labels, 3, 4, 1, seed=0)
    assert sorted(np.r_[s, q].tolist()) == list(range(15))
    assert sorted(labels[q].tolist()) == [0, 1, 2]


def test_episode_supports_vary_across_seeds():
    labels = np.repeat(np.arange(6), 200)
    supports = {tuple(sorted(episode_indices(labels, 5, 10, 20, seed)[1].tolist())) for seed in range(10)}
    assert len(supports) > 1


def test_accuracy_extremes():
    assert accuracy([1, 2], [1, 2]) == 100.0
    assert accuracy([0, 0], [1, 2]) == 0.0


def test_self_recall_and_single_class():
    ds = synth_primitives(["sphere", "cube", "torus"], per_class=3, points=128, seed=4)
    assert evaluate_classification(ds, ds, gamma=100).accuracy == 100.0
    one = synth_primitives(["cone"], per_class=3, points=64)
    assert evaluate_classification(one, one, TINY).accuracy == 100.0


def test_evaluation_deterministic():
    train = synth_primitives(["sphere", "plane"], per_class=3, points=64, seed=2)
    test = synth_primitives(["sphere", "plane"], per_class=2, points=64, seed=2, split="test")
    a = evaluate_classification(train, test, TINY).format()
    assert a == evaluate_classification(train, test, TINY).format()
