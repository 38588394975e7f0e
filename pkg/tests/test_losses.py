import math

import numpy as np
import pytest

import gaplab as gl

from conftest import random_orthogonal, unit_rows


def pair(rng, n=5, d=4):
    return unit_rows(rng, n, d), unit_rows(rng, n, d)


def random_temp(rng) -> gl.Temperature:
    return gl.Temperature(float(rng.uniform(0.0, 2.5)))


# -------------------------------------------------------------- Temperature

def test_temperature_default_and_scale():
    t = gl.Temperature()
    assert abs(t.log_scale - math.log(1.0 / 0.07)) < 1e-15
    assert abs(t.scale - 1.0 / 0.07) < 1e-12
    assert abs(gl.Temperature(0.0).scale - 1.0) < 1e-15


def test_temperature_rejects_values_past_cap():
    gl.Temperature(gl.LOG_SCALE_MAX)  # at the cap is fine
    with pytest.raises(ValueError):
        gl.Temperature(gl.LOG_SCALE_MAX + 1e-9)
    with pytest.raises(ValueError):
        gl.Temperature(float("nan"))


# ---------------------------------------------------------------- clip_loss

def test_clip_hand_case_identity_rows():
    # Two orthonormal pairs at tau=1: both CE halves are log(1 + e^-1).
    v = np.eye(2)
    out = gl.clip_loss(v, v, gl.Temperature(0.0))
    assert abs(out.loss - math.log(1.0 + math.exp(-1.0))) < 1e-15


def test_clip_single_pair_is_zero():
    v = np.array([[1.0, 0.0]])
    out = gl.clip_loss(v, v, gl.Temperature())
    assert out.loss == 0.0
    assert np.array_equal(out.grad_images, np.zeros((1, 2)))
    assert np.array_equal(out.grad_texts, np.zeros((1, 2)))
    assert out.grad_log_scale == 0.0


def test_clip_diagnostics_hold_the_split():
    rng = np.random.default_rng(0)
    v, t = pair(rng)
    temp = gl.Temperature()
    out = gl.clip_loss(v, t, temp)
    align, oppose = gl.clip_loss_decomposed(v, t, temp)
    assert out.diagnostics["align_term"] == align
    assert out.diagnostics["oppose_term"] == oppose


def test_clip_rejects_shape_mismatch():
    rng = np.random.default_rng(1)
    v, t = pair(rng)
    with pytest.raises(ValueError):
        gl.clip_loss(v, t[:-1], gl.Temperature())


# ------------------------------------------------------------ decomposition

def test_align_plus_oppose_recomposes_i2t_cross_entropy():
    rng = np.random.default_rng(2)
    for _ in range(20):
        v, t = pair(rng, n=6, d=5)
        temp = random_temp(rng)
        align, oppose = gl.clip_loss_decomposed(v, t, temp)
        logits = temp.scale * gl.similarity_matrix(v, t)
        i2t, _ = gl.row_cross_entropy(logits, np.arange(6))
        assert abs((align + oppose) - i2t) < 1e-10


def test_decomposition_limits_at_tiny_scale():
    # As tau -> 0 the attraction term vanishes and repulsion tends to log N.
    rng = np.random.default_rng(3)
    v, t = pair(rng, n=8, d=4)
    align, oppose = gl.clip_loss_decomposed(v, t, gl.Temperature(-18.0))
    assert abs(align) < 1e-7
    assert abs(oppose - math.log(8.0)) < 1e-7


def test_align_grows_more_negative_with_alignment():
    rng = np.random.default_rng(4)
    v, _ = pair(rng)
    temp = gl.Temperature()
    perfect, _ = gl.clip_loss_decomposed(v, v, temp)
    shuffled, _ = gl.clip_loss_decomposed(v, np.roll(v, 1, axis=0), temp)
    assert perfect < shuffled


# ---------------------------------------------------------- reweighted_loss

def test_reweighted_beta_zero_is_clip_bitwise():
    rng = np.random.default_rng(5)
    v, t = pair(rng)
    temp = random_temp(rng)
    a = gl.reweighted_loss(v, t, temp, beta=0.0)
    b = gl.clip_loss(v, t, temp)
    assert a.loss == b.loss
    assert np.array_equal(a.grad_images, b.grad_images)
    assert np.array_equal(a.grad_texts, b.grad_texts)
    assert a.grad_log_scale == b.grad_log_scale


def test_reweighted_beta_range_enforced():
    rng = np.random.default_rng(6)
    v, t = pair(rng)
    for bad in (-1e-9, 0.0500001, 1.0):
        with pytest.raises(ValueError):
            gl.reweighted_loss(v, t, gl.Temperature(), bad)


def test_reweighted_damping_lowers_repulsion():
    # Scaling down off-diagonal logits can only shrink each row's LSE term.
    rng = np.random.default_rng(7)
    v, t = pair(rng, n=10, d=6)
    temp = gl.Temperature()
    plain = gl.clip_loss(v, t, temp).loss
    damped = gl.reweighted_loss(v, t, temp, beta=0.05).loss
    assert damped != plain
    assert np.isfinite(damped)


# --------------------------------------------------------------- intra_loss

def test_intra_single_pair_is_zero():
    v = np.array([[0.0, 1.0]])
    t = np.array([[1.0, 0.0]])
    out = gl.intra_loss(v, t, gl.Temperature())
    assert out.loss == 0.0
    assert np.array_equal(out.grad_images, np.zeros((1, 2)))


def test_intra_is_invariant_under_shared_rotation():
    rng = np.random.default_rng(8)
    v, t = pair(rng, n=7, d=5)
    temp = gl.Temperature(1.3)
    base = gl.intra_loss(v, t, temp)
    q = random_orthogonal(rng, 5)
    rotated = gl.intra_loss(v @ q, t @ q, temp)
    assert abs(base.loss - rotated.loss) < 1e-9
    # gradients co-rotate
    assert np.max(np.abs(rotated.grad_images - base.grad_images @ q)) < 1e-9


def test_intra_prefers_matched_neighborhood_structure():
    # When each modality's self-similarity graph differs, the loss is higher
    # than when the two clouds are copies of each other.
    rng = np.random.default_rng(9)
    v, t = pair(rng, n=9, d=5)
    temp = gl.Temperature()
    same = gl.intra_loss(v, v, temp).loss
    different = gl.intra_loss(v, t, temp).loss
    assert same < different


# ----------------------------------------------------------------- cma_loss

def test_cma_endpoints_are_bitwise():
    rng = np.random.default_rng(10)
    v, t = pair(rng)
    temp = random_temp(rng)

    lo = gl.cma_loss(v, t, temp, alpha=0.0)
    clip = gl.clip_loss(v, t, temp)
    assert lo.loss == clip.loss
    assert np.array_equal(lo.grad_images, clip.grad_images)
    assert np.array_equal(lo.grad_texts, clip.grad_texts)
    assert lo.grad_log_scale == clip.grad_log_scale

    hi = gl.cma_loss(v, t, temp, alpha=1.0)
    intra = gl.intra_loss(v, t, temp)
    assert hi.loss == intra.loss
    assert np.array_equal(hi.grad_images, intra.grad_images)
    assert np.array_equal(hi.grad_texts, intra.grad_texts)
    assert hi.grad_log_scale == intra.grad_log_scale


def test_cma_midpoint_recomposes_components():
    rng = np.random.default_rng(11)
    v, t = pair(rng)
    temp = gl.Temperature(1.0)
    alpha = 0.4
    out = gl.cma_loss(v, t, temp, alpha)
    rw = gl.reweighted_loss(v, t, temp, beta=0.05 * alpha)
    intra = gl.intra_loss(v, t, temp)
    assert abs(out.loss - ((1 - alpha) * rw.loss + alpha * intra.loss)) < 1e-12
    blend = (1 - alpha) * rw.grad_images + alpha * intra.grad_images
    assert np.max(np.abs(out.grad_images - blend)) < 1e-12
    assert out.diagnostics["rw_term"] == rw.loss
    assert out.diagnostics["intra_term"] == intra.loss


def test_cma_gradient_norm_diagnostics():
    rng = np.random.default_rng(12)
    v, t = pair(rng)
    out = gl.cma_loss(v, t, gl.Temperature(), alpha=0.5)
    rw = gl.reweighted_loss(v, t, gl.Temperature(), beta=0.025)
    expected = math.sqrt((rw.grad_images ** 2).sum() + (rw.grad_texts ** 2).sum())
    assert abs(out.diagnostics["grad_norm_rw"] - expected) < 1e-12
    assert out.diagnostics["grad_norm_intra"] > 0.0


def test_cma_alpha_range_enforced():
    rng = np.random.default_rng(13)
    v, t = pair(rng)
    for bad in (-0.1, 1.0001):
        with pytest.raises(ValueError):
            gl.cma_loss(v, t, gl.Temperature(), bad)


# ------------------------------------------------------------- equivariance

def test_losses_are_equivariant_under_pair_permutation():
    rng = np.random.default_rng(14)
    v, t = pair(rng, n=8, d=5)
    temp = gl.Temperature(0.7)
    perm = rng.permutation(8)
    cases = [
        lambda a, b: gl.clip_loss(a, b, temp),
        lambda a, b: gl.reweighted_loss(a, b, temp, 0.04),
        lambda a, b: gl.intra_loss(a, b, temp),
        lambda a, b: gl.cma_loss(a, b, temp, 0.6),
    ]
    for fn in cases:
        base = fn(v, t)
        shuffled = fn(v[perm], t[perm])
        assert abs(base.loss - shuffled.loss) < 1e-10
        assert np.max(np.abs(shuffled.grad_images - base.grad_images[perm])) < 1e-10
        assert np.max(np.abs(shuffled.grad_texts - base.grad_texts[perm])) < 1e-10


# -------------------------------------------------------- gradient checking

def test_finite_differences_all_losses():
    rng = np.random.default_rng(15)
    for seed in range(5):
        local = np.random.default_rng(seed)
        v, t = pair(local, n=4, d=3)
        temp = random_temp(local)
        for loss_id in gl.LOSS_IDS:
            err = gl.finite_diff_check(loss_id, v, t, temp,
                                       alpha=float(rng.uniform(0.05, 0.95)),
                                       beta=float(rng.uniform(0.0, 0.05)))
            assert err < 1e-5, (loss_id, seed, err)


def test_finite_diff_single_pair_degenerates_to_zero():
    v = np.array([[1.0, 0.0]])
    t = np.array([[0.0, 1.0]])
    assert gl.finite_diff_check("clip", v, t, gl.Temperature()) == 0.0


def test_finite_diff_check_validates_h_and_loss_id():
    rng = np.random.default_rng(16)
    v, t = pair(rng)
    with pytest.raises(ValueError):
        gl.finite_diff_check("clip", v, t, gl.Temperature(), h=1e-8)
    with pytest.raises(ValueError):
        gl.finite_diff_check("clip", v, t, gl.Temperature(), h=1e-2)
    with pytest.raises(ValueError):
        gl.finite_diff_check("nope", v, t, gl.Temperature())
    with pytest.raises(ValueError):
        gl.analytic_bundles("nope", v, t, gl.Temperature())


def test_corrupted_gradient_is_caught():
    # A 1% scale error on the analytic gradient must exceed the 5e-3 gate.
    rng = np.random.default_rng(17)
    v, t = pair(rng)
    temp = gl.Temperature(1.0)
    [(_, _, gv, gt, gs)] = gl.analytic_bundles("clip", v, t, temp)
    fn = lambda a, b, tm: gl.clip_loss(a, b, tm).loss
    num = gl.numeric_bundle(fn, v.copy(), t.copy(), temp, 1e-5)
    honest = gl.gradient_discrepancy((gv, gt, gs), num)
    corrupted = gl.gradient_discrepancy((gv * 1.01, gt * 1.01, gs * 1.01), num)
    assert honest < 1e-5
    assert corrupted > 5e-3


def test_decomposed_bundles_come_labeled():
    rng = np.random.default_rng(18)
    v, t = pair(rng)
    bundles = gl.analytic_bundles("decomposed", v, t, gl.Temperature())
    assert [b[0] for b in bundles] == ["align", "oppose"]
    assert len(gl.analytic_bundles("cma", v, t, gl.Temperature())) == 1
