import numpy as np
import pytest

import radfiner


def test_grid_matches_reference():
    rng = np.random.default_rng(3)
    coords = rng.uniform(-20, 20, size=(300, 2))
    got = radfiner.ball_query(coords, 3.0, 12)
    want = radfiner.ball_query_reference(coords, 3.0, 12)
    for a, b in zip(got, want):
        np.testing.assert_array_equal(a, b)
    indices, valid, rel = got
    assert indices.shape == (300, 12) and rel.shape == (300, 12, 2)
    np.testing.assert_array_equal(indices[:, 0], np.arange(300))
    assert valid[:, 0].all()


def test_segments_keep_neighborhoods_apart():
    coords = np.zeros((4, 2))
    indices, valid, _ = radfiner.ball_query(coords, 1.0, 4, segments=[0, 2, 4])
    assert valid.sum(axis=1).tolist() == [2, 2, 2, 2]
    assert set(indices[2][valid[2]]) == {2, 3}


def test_refine_splits_mixed_instance():
    ids, classes = radfiner.refine_instances([7, 7, 7, 0], [1, 1, 2, 0])
    assert classes.tolist() == [1, 1, 2, 0]
    assert ids.tolist() == [1, 1, 2, 0]
    ids, classes = radfiner.refine_instances([7, 7, 7, 0], [1, 1, 2, 0], mode="majority")
    assert classes.tolist() == [1, 1, 1, 0]


def test_perfect_prediction_scores_one():
    scene = radfiner.generate_scene(5)
    ids, sem = scene["instance_id"], scene["semantic"]
    assert scene["points"].shape == (len(ids), 4)
    result = radfiner.panoptic_quality(ids, sem, ids, sem)
    assert result["pq"] == pytest.approx(1.0)
    assert result["miou"] == pytest.approx(1.0)
    assert set(result["per_class"]) <= set(radfiner.CLASS_NAMES)


def test_bad_class_code_raises():
    with pytest.raises(ValueError):
        radfiner.refine_instances([1], [9])
