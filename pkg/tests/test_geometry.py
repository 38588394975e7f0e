import json

import numpy as np
import pytest

import gaplab as gl

from conftest import random_orthogonal, unit_rows


def paired_batches(rng, n=12, d=6):
    return unit_rows(rng, n, d), unit_rows(rng, n, d)


# ---------------------------------------------------------- EmbeddingBatch

def test_batch_basic_properties():
    rng = np.random.default_rng(0)
    v = unit_rows(rng, 4, 3)
    b = gl.EmbeddingBatch(v, labels=np.array([0, 1, 1, 0]), modality="text")
    assert b.n == 4 and b.dim == 3
    assert b.labels.dtype == np.int64


def test_batch_validation():
    rng = np.random.default_rng(1)
    v = unit_rows(rng, 4, 3)
    with pytest.raises(ValueError):
        gl.EmbeddingBatch(v, labels=np.array([0, 1]))          # wrong length
    with pytest.raises(ValueError):
        gl.EmbeddingBatch(v, modality="audio")
    with pytest.raises(ValueError):
        gl.EmbeddingBatch(v * 3.0, normalized=True)             # not unit norm
    gl.EmbeddingBatch(v, normalized=True)                       # fine


# ----------------------------------------------------------------- raw_gap

def test_raw_gap_identical_and_antipodal():
    rng = np.random.default_rng(2)
    v = unit_rows(rng, 8, 5)
    assert abs(gl.raw_gap(v, v)) < 1e-15
    assert abs(gl.raw_gap(v, -v) - 2.0) < 1e-15


def test_raw_gap_hand_case_orthogonal_pairs():
    v = np.array([[1.0, 0.0], [0.0, 1.0]])
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert abs(gl.raw_gap(v, t) - 1.0) < 1e-15


def test_raw_gap_accepts_batches_and_checks_pairing():
    rng = np.random.default_rng(3)
    v, t = paired_batches(rng)
    direct = gl.raw_gap(v, t)
    wrapped = gl.raw_gap(gl.EmbeddingBatch(v), gl.EmbeddingBatch(t, modality="text"))
    assert direct == wrapped
    with pytest.raises(ValueError):
        gl.raw_gap(v, t[:-1])


# ------------------------------------------------------------ centroid_gap

def test_centroid_gap_values():
    rng = np.random.default_rng(4)
    v = unit_rows(rng, 6, 4)
    assert abs(gl.centroid_gap(v, v)) < 1e-15

    a = np.tile([1.0, 0.0], (5, 1))
    b = np.tile([0.0, 1.0], (5, 1))
    assert abs(gl.centroid_gap(a, b) - np.sqrt(2.0)) < 1e-15

    # Antipodal clouds sit two mean-lengths apart.
    expected = 2.0 * np.linalg.norm(v.mean(axis=0))
    assert abs(gl.centroid_gap(v, -v) - expected) < 1e-12


# -------------------------------------------------------- distribution_gap

def test_distribution_gap_translation_invariance():
    rng = np.random.default_rng(5)
    v, t = paired_batches(rng)
    base, _ = gl.distribution_gap(v, t)
    for _ in range(50):
        shift = rng.standard_normal(v.shape[1]) * rng.uniform(0.1, 50.0)
        shifted, _ = gl.distribution_gap(v + shift, t)
        assert abs(shifted - base) < 1e-10


def test_distribution_gap_loop_oracle():
    rng = np.random.default_rng(6)
    v, t = paired_batches(rng, n=7, d=4)
    got, excluded = gl.distribution_gap(v, t)
    assert excluded == 0

    cv = v - v.mean(axis=0)
    ct = t - t.mean(axis=0)
    cos = [
        float(np.dot(cv[i] / np.linalg.norm(cv[i]), ct[i] / np.linalg.norm(ct[i])))
        for i in range(7)
    ]
    assert abs(got - (1.0 - float(np.mean(cos)))) < 1e-12


def test_distribution_gap_counts_degenerate_pairs():
    # First image row is the average of the other two, so it centers to zero.
    b = np.array([1.0, 0.0, 0.0])
    c = np.array([0.0, 1.0, 0.0])
    v = np.vstack([(b + c) / 2.0, b, c])
    rng = np.random.default_rng(7)
    t = unit_rows(rng, 3, 3)
    value, excluded = gl.distribution_gap(v, t)
    assert excluded == 1
    assert np.isfinite(value)


def test_distribution_gap_all_degenerate_is_an_error():
    v = np.tile([0.5, 0.5], (3, 1))
    t = np.tile([0.1, 0.9], (3, 1))
    with pytest.raises(ValueError):
        gl.distribution_gap(v, t)


def test_distribution_gap_identical_clouds():
    rng = np.random.default_rng(8)
    v = unit_rows(rng, 9, 5)
    value, _ = gl.distribution_gap(v, v)
    assert abs(value) < 1e-12


# --------------------------------------------------------------- rotations

def test_gaps_are_orthogonal_invariant():
    rng = np.random.default_rng(9)
    v, t = paired_batches(rng)
    q = random_orthogonal(rng, v.shape[1])
    assert abs(gl.raw_gap(v @ q, t @ q) - gl.raw_gap(v, t)) < 1e-9
    assert abs(gl.centroid_gap(v @ q, t @ q) - gl.centroid_gap(v, t)) < 1e-9
    a, _ = gl.distribution_gap(v @ q, t @ q)
    b, _ = gl.distribution_gap(v, t)
    assert abs(a - b) < 1e-9


# -------------------------------------------------------------- mean_center

def test_mean_center_kills_centroid_gap_keeps_distribution_gap():
    rng = np.random.default_rng(10)
    v, t = paired_batches(rng)
    before, _ = gl.distribution_gap(v, t)
    cv, ct = gl.mean_center(v, t)
    assert gl.centroid_gap(cv, ct) < 1e-10
    after, _ = gl.distribution_gap(cv, ct)
    assert abs(after - before) < 1e-10


def test_mean_center_idempotent():
    rng = np.random.default_rng(11)
    v, t = paired_batches(rng)
    cv, ct = gl.mean_center(v, t)
    cv2, ct2 = gl.mean_center(cv, ct)
    assert np.max(np.abs(cv.vectors - cv2.vectors)) < 1e-12
    assert np.max(np.abs(ct.vectors - ct2.vectors)) < 1e-12


def test_mean_center_renormalize_and_metadata():
    rng = np.random.default_rng(12)
    v, t = paired_batches(rng)
    labels = np.arange(v.shape[0])
    bv = gl.EmbeddingBatch(v, labels=labels)
    bt = gl.EmbeddingBatch(t, labels=labels, modality="text")
    cv, ct = gl.mean_center(bv, bt, renormalize=True)
    assert np.allclose(np.linalg.norm(cv.vectors, axis=1), 1.0, atol=1e-9)
    assert np.array_equal(cv.labels, labels)
    assert cv.modality == "image" and ct.modality == "text"


# ----------------------------------------------------------- effective_rank

def test_effective_rank_hand_values():
    assert abs(gl.effective_rank(np.eye(4)) - 4.0) < 1e-9
    rank1 = np.outer([1.0, 2.0, 3.0], [1.0, 1.0])
    assert abs(gl.effective_rank(rank1) - 1.0) < 1e-9
    # Spectrum (1, 1, 0): two equal directions.
    flat = np.diag([1.0, 1.0, 0.0])
    assert abs(gl.effective_rank(flat) - 2.0) < 1e-9


def test_effective_rank_bounds_and_errors():
    rng = np.random.default_rng(13)
    m = rng.standard_normal((20, 6))
    er = gl.effective_rank(m)
    assert 1.0 <= er <= 6.0 + 1e-12
    with pytest.raises(ValueError):
        gl.effective_rank(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        gl.effective_rank(m[:1])


def test_effective_rank_scale_invariant():
    rng = np.random.default_rng(14)
    m = rng.standard_normal((10, 5))
    assert abs(gl.effective_rank(m) - gl.effective_rank(m * 37.5)) < 1e-9


# ------------------------------------------------------------- fusion_index

def test_fusion_index_identical_clouds_is_one():
    rng = np.random.default_rng(15)
    v = unit_rows(rng, 10, 6)
    assert abs(gl.fusion_index(v, v) - 1.0) < 1e-9


def test_fusion_index_orthogonal_subspaces_is_two():
    d, k = 8, 4
    v = np.eye(d)[:k]          # spans e1..e4
    t = np.eye(d)[k:]          # spans e5..e8
    assert abs(gl.fusion_index(v, t) - 2.0) < 1e-6


def test_fusion_index_allows_different_row_counts():
    rng = np.random.default_rng(16)
    v = unit_rows(rng, 10, 5)
    t = unit_rows(rng, 7, 5)
    assert gl.fusion_index(v, t) > 0.0
    with pytest.raises(ValueError):
        gl.fusion_index(v, unit_rows(rng, 7, 4))


# --------------------------------------------------------------- gap_report

def test_gap_report_fields_match_individual_ops():
    rng = np.random.default_rng(17)
    v, t = paired_batches(rng, n=15, d=6)
    labels = np.arange(15)
    r = gl.gap_report(gl.EmbeddingBatch(v, labels=labels),
                      gl.EmbeddingBatch(t, labels=labels, modality="text"))
    dist, excl = gl.distribution_gap(v, t)
    assert r.raw_gap == gl.raw_gap(v, t)
    assert r.centroid_gap == gl.centroid_gap(v, t)
    assert r.distribution_gap == dist
    assert r.degenerate_pairs == excl
    assert r.n_pairs == 15
    assert r.erank_image == gl.effective_rank(v)
    assert r.erank_text == gl.effective_rank(t)
    assert r.fusion_index == gl.fusion_index(v, t)


def test_gap_report_identical_batches():
    rng = np.random.default_rng(18)
    v = unit_rows(rng, 12, 5)
    r = gl.gap_report(v, v)
    assert abs(r.raw_gap) < 1e-12
    assert abs(r.centroid_gap) < 1e-12
    assert abs(r.distribution_gap) < 1e-12
    assert abs(r.fusion_index - 1.0) < 1e-9


def test_gap_report_json_round_trip_and_summary():
    rng = np.random.default_rng(19)
    v, t = paired_batches(rng)
    r = gl.gap_report(v, t)
    data = json.loads(r.to_json())
    again = gl.GapReport.from_dict(data)
    assert again == r
    s = r.summary()
    for key in ("raw_gap=", "centroid_gap=", "distribution_gap=", "fusion_index="):
        assert key in s
