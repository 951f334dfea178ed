"""Unit tests for the SOM lattice: winner search, training dynamics,
labeling, merging and serialization."""
import json
import math

import numpy as np
import pytest

from mecshield.som import (BENIGN, MALICIOUS, UNLABELED, SomHyperParams,
                           SomMap, UnlabeledMapError, init_map, merge_maps)


def brute_force_winner(m, v):
    """Independent oracle: plain loop over neurons with true Euclidean distance."""
    best, best_d = 0, float("inf")
    for j in range(m.neuron_count):
        d = math.sqrt(sum((a - b) ** 2 for a, b in zip(m.weights[j], v)))
        if d < best_d:
            best, best_d = j, d
    return best


def test_init_map_shape_and_range():
    m = init_map(20, 20, 5, seed=1)
    assert m.neuron_count == 400
    assert m.weights.shape == (400, 5)
    assert (m.weights >= 0.0).all() and (m.weights <= 1.0).all()
    assert (m.labels == UNLABELED).all()
    assert m.hit_counts.sum() == 0 and m.epoch == 0


def test_init_map_single_neuron():
    m = init_map(1, 1, 3, seed=9)
    assert m.neuron_count == 1
    assert m.weights.shape == (1, 3)


def test_init_map_reproducible():
    a = init_map(2, 2, 2, seed=42)
    b = init_map(2, 2, 2, seed=42)
    assert (a.weights == b.weights).all()


def test_init_map_rejects_bad_dims():
    for args in [(0, 2, 3), (2, 0, 3), (2, 2, 0)]:
        with pytest.raises(ValueError):
            init_map(*args, seed=0)


def test_find_winner_exact_weight_match():
    m = init_map(4, 4, 3, seed=3)
    for j in [0, 7, 15]:
        assert m.find_winner(m.weights[j]) == j


def test_find_winner_matches_brute_force():
    rng = np.random.default_rng(100)
    for _ in range(200):
        w = int(rng.integers(2, 8))
        h = int(rng.integers(2, 8))
        dim = int(rng.choice([3, 5]))
        m = init_map(w, h, dim, seed=int(rng.integers(1 << 30)))
        v = rng.uniform(0.0, 1.0, size=dim)
        assert m.find_winner(v) == brute_force_winner(m, v)


def test_find_winner_tie_breaks_low_index():
    w = np.array([[0.4, 0.4], [0.4, 0.4], [0.9, 0.9]])
    m = SomMap(3, 1, 2, w)
    assert m.find_winner([0.4, 0.4]) == 0
    # symmetric tie around the sample
    w2 = np.array([[0.0, 0.0], [1.0, 1.0]])
    m2 = SomMap(2, 1, 2, w2)
    assert m2.find_winner([0.5, 0.5]) == 0


def test_find_winner_dimension_mismatch():
    m = init_map(2, 2, 3, seed=0)
    with pytest.raises(ValueError):
        m.find_winner([0.1, 0.2])


def test_winner_distance_is_sqrt_of_squared():
    m = init_map(3, 3, 5, seed=5)
    v = np.full(5, 0.5)
    j, d = m.winner_distance(v)
    assert j == m.find_winner(v)
    assert d == pytest.approx(np.linalg.norm(m.weights[j] - v))


def test_train_step_moves_winner_closer():
    hp = SomHyperParams(initial_learning_rate=0.5, initial_radius=1e-6)
    m = init_map(3, 3, 3, seed=11)
    v = np.array([0.9, 0.1, 0.5])
    j = m.find_winner(v)
    before = np.linalg.norm(m.weights[j] - v)
    m.train_step(v, hp)
    after = np.linalg.norm(m.weights[j] - v)
    assert after < before


def test_train_step_updates_tallies_and_epoch():
    hp = SomHyperParams()
    m = init_map(2, 2, 3, seed=1)
    v = m.weights[2].copy()
    win = m.train_step(v, hp, label=MALICIOUS)
    assert win == 2
    assert m.epoch == 1
    assert m.hit_counts[2] == 1 and m.malicious_wins[2] == 1
    m.train_step(v, hp, label=BENIGN)
    assert m.benign_wins[2] == 1
    with pytest.raises(ValueError):
        m.train_step(v, hp, label="weird")


def test_decay_schedule_values():
    hp = SomHyperParams(initial_learning_rate=0.1, initial_radius=10.0,
                        lr_decay_constant=100.0, radius_decay_constant=50.0)
    assert hp.learning_rate(0) == 0.1
    assert hp.learning_rate(100) == pytest.approx(0.1 * math.exp(-1.0))
    assert hp.radius(0) == 10.0
    assert hp.radius(100) == pytest.approx(10.0 * math.exp(-2.0))


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        SomHyperParams(initial_learning_rate=0.0)
    with pytest.raises(ValueError):
        SomHyperParams(initial_learning_rate=1.5)
    with pytest.raises(ValueError):
        SomHyperParams(initial_radius=-1.0)
    with pytest.raises(ValueError):
        SomHyperParams(lr_decay_constant=float("inf"))
    with pytest.raises(ValueError):
        SomHyperParams(radius_decay_constant=0.0)


def test_weights_stay_in_unit_cube_after_10000_steps():
    rng = np.random.default_rng(77)
    hp = SomHyperParams(initial_learning_rate=1.0, initial_radius=5.0,
                        lr_decay_constant=1e6, radius_decay_constant=1e6)
    m = init_map(5, 5, 3, seed=8)
    for _ in range(10000):
        m.train_step(rng.uniform(0.0, 1.0, size=3), hp)
        assert (m.weights >= 0.0).all() and (m.weights <= 1.0).all()
    assert m.epoch == 10000
    assert m.hit_counts.sum() == 10000


def test_radius_zero_constant_alpha_geometric_convergence():
    # huge decay constants make alpha effectively constant over a few steps
    hp = SomHyperParams(initial_learning_rate=0.5, initial_radius=1e-9,
                        lr_decay_constant=1e15, radius_decay_constant=1e15)
    m = init_map(1, 1, 3, seed=2)
    v = np.array([1.0, 0.0, 1.0])
    d_prev = np.linalg.norm(m.weights[0] - v)
    for _ in range(15):
        m.train_step(v, hp)
        d = np.linalg.norm(m.weights[0] - v)
        assert d == pytest.approx(0.5 * d_prev, rel=1e-9)
        d_prev = d


def test_training_determinism():
    rng = np.random.default_rng(13)
    samples = rng.uniform(0, 1, size=(500, 5))
    labels = [BENIGN if i % 3 else MALICIOUS for i in range(500)]
    hp = SomHyperParams()
    a = init_map(6, 6, 5, seed=4)
    b = init_map(6, 6, 5, seed=4)
    a.train(samples, labels, hp)
    b.train(samples, labels, hp)
    assert (a.weights == b.weights).all()
    assert (a.hit_counts == b.hit_counts).all()


def test_label_neurons_majority_and_tie():
    m = init_map(2, 1, 2, seed=0)
    m.benign_wins[:] = [10, 3]
    m.malicious_wins[:] = [2, 3]
    m.hit_counts[:] = [12, 6]
    m.label_neurons()
    assert m.labels[0] == BENIGN
    assert m.labels[1] == MALICIOUS  # ties go malicious


def test_label_neurons_dead_neuron_inherits_nearest():
    w = np.array([[0.0, 0.0], [1.0, 1.0], [0.9, 0.9]])
    m = SomMap(3, 1, 2, w)
    m.benign_wins[:] = [5, 0, 0]
    m.malicious_wins[:] = [0, 4, 0]
    m.label_neurons()
    # neuron 2 has no votes; its nearest labeled neighbor in weight space is 1
    assert m.labels[2] == MALICIOUS


def test_label_neurons_requires_votes():
    m = init_map(2, 2, 2, seed=0)
    with pytest.raises(UnlabeledMapError):
        m.label_neurons()


def test_classify_returns_winner_label():
    rng = np.random.default_rng(21)
    m = init_map(5, 5, 3, seed=6)
    m.benign_wins[:] = rng.integers(0, 5, size=25)
    m.malicious_wins[:] = rng.integers(0, 5, size=25)
    m.hit_counts[:] = m.benign_wins + m.malicious_wins
    if m.hit_counts.sum() == 0:
        m.benign_wins[0] = 1
    m.label_neurons()
    for _ in range(50):
        v = rng.uniform(0, 1, size=3)
        assert m.classify(v) == m.labels[brute_force_winner(m, v)]
    batch = rng.uniform(0, 1, size=(20, 3))
    assert m.classify_batch(batch) == [m.classify(v) for v in batch]


def test_classify_unlabeled_raises():
    m = init_map(2, 2, 3, seed=0)
    with pytest.raises(UnlabeledMapError):
        m.classify([0.1, 0.2, 0.3])
    with pytest.raises(UnlabeledMapError):
        m.classify_batch([[0.1, 0.2, 0.3]])


def test_squared_distance_equals_distance_argmin():
    # monotone-transform invariance of the winner
    rng = np.random.default_rng(31)
    for _ in range(100):
        m = init_map(4, 4, 5, seed=int(rng.integers(1 << 30)))
        v = rng.uniform(0, 1, size=5)
        d = np.linalg.norm(m.weights - v, axis=1)
        d2 = (np.square(m.weights - v)).sum(axis=1)
        assert int(np.argmin(d)) == int(np.argmin(d2)) == m.find_winner(v)


def test_merge_self_is_identity():
    m = init_map(3, 3, 4, seed=12)
    m.hit_counts[:] = 3
    m.benign_wins[:] = 3
    merged = merge_maps([m, m])
    assert np.allclose(merged.weights, m.weights)


def test_merge_weighted_mean():
    a = SomMap(1, 1, 1, np.array([[0.2]]))
    b = SomMap(1, 1, 1, np.array([[0.6]]))
    a.hit_counts[:] = 1
    b.hit_counts[:] = 3
    a.benign_wins[:] = 1
    b.malicious_wins[:] = 3
    merged = merge_maps([a, b])
    assert merged.weights[0, 0] == pytest.approx((0.2 * 1 + 0.6 * 3) / 4)
    assert merged.hit_counts[0] == 4
    assert merged.labels[0] == MALICIOUS


def test_merge_zero_hits_uses_uniform_mean():
    a = SomMap(1, 1, 2, np.array([[0.0, 1.0]]))
    b = SomMap(1, 1, 2, np.array([[1.0, 0.0]]))
    merged = merge_maps([a, b])
    assert np.allclose(merged.weights, [[0.5, 0.5]])


def test_merge_convex_bounds():
    rng = np.random.default_rng(55)
    for _ in range(50):
        maps = []
        for k in range(3):
            m = init_map(3, 2, 3, seed=int(rng.integers(1 << 30)))
            m.hit_counts[:] = rng.integers(0, 10, size=6)
            m.benign_wins[:] = m.hit_counts
            maps.append(m)
        merged = merge_maps(maps)
        stack = np.stack([m.weights for m in maps])
        assert (merged.weights >= stack.min(axis=0) - 1e-12).all()
        assert (merged.weights <= stack.max(axis=0) + 1e-12).all()


def test_merge_shape_mismatch():
    with pytest.raises(ValueError):
        merge_maps([init_map(2, 2, 3, 0), init_map(2, 3, 3, 0)])
    with pytest.raises(ValueError):
        merge_maps([])


def test_serialization_round_trip_lossless(tmp_path):
    m = init_map(4, 4, 5, seed=19)
    rng = np.random.default_rng(19)
    hp = SomHyperParams()
    for _ in range(200):
        m.train_step(rng.uniform(0, 1, size=5), hp,
                     label=BENIGN if rng.random() < 0.5 else MALICIOUS)
    m.label_neurons()
    path = tmp_path / "map.json"
    m.save(path)
    loaded = SomMap.load(path)
    assert (loaded.weights == m.weights).all()       # bit-exact floats
    assert (loaded.labels == m.labels).all()
    assert (loaded.hit_counts == m.hit_counts).all()
    assert loaded.epoch == m.epoch
    # saving again produces an identical byte stream
    path2 = tmp_path / "map2.json"
    loaded.save(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_from_dict_rejects_foreign_documents():
    with pytest.raises(ValueError):
        SomMap.from_dict({"format": "something-else"})
    m = init_map(1, 1, 1, seed=0)
    doc = m.to_dict()
    doc["version"] = 99
    with pytest.raises(ValueError):
        SomMap.from_dict(doc)


def test_copy_is_independent():
    m = init_map(2, 2, 2, seed=1)
    c = m.copy()
    c.weights[0, 0] = 0.123
    c.hit_counts[0] = 7
    assert m.weights[0, 0] != 0.123
    assert m.hit_counts[0] == 0
