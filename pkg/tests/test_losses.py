import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssimkd import (
    ConfigError, DimensionError, LossConfig, SsimExponents, StabilizerConfig, WindowSpec,
    combined_l1_msssim, compute_loss, contrast_map, feat_loss, local_moments, lp_loss,
    luminance_map, ms_ssim_loss, smooth_l1_loss, ssim_loss, structure_map, total_loss,
)
from ssimkd.window import MomentMaps

import naive

RAW = LossConfig(normalize=None)


def moments(mu_s=0.5, mu_t=0.5, var_s=0.0, var_t=0.0, cov=0.0):
    a = lambda v: np.array([[[[v]]]], dtype=float)  # noqa: E731
    z = np.zeros((1, 1, 1, 1), dtype=bool)
    return MomentMaps(a(mu_s), a(mu_t), a(var_s), a(var_t), a(cov), z, z)


def test_stabilizers():
    c = StabilizerConfig()
    assert c.c1 == pytest.approx(1e-4) and c.c2 == pytest.approx(9e-4)
    assert c.c3 == c.c2 / 2
    with pytest.raises(ConfigError):
        StabilizerConfig(k1=0.0)


def test_luminance_examples():
    assert luminance_map(moments(0.5, 0.5)).item() == pytest.approx(1.0, abs=1e-15)
    assert luminance_map(moments(0.2, 0.8)).item() == pytest.approx(0.3201 / 0.6801, abs=1e-12)
    assert abs(luminance_map(moments(0.2, 0.8)).item() - 0.470666) < 1e-6
    assert luminance_map(moments(0.0, 0.0)).item() == 1.0


def test_contrast_examples():
    assert contrast_map(moments(var_s=0.04, var_t=0.04)).item() == pytest.approx(1.0, abs=1e-15)
    assert contrast_map(moments()).item() == 1.0
    c = contrast_map(moments(var_s=0.01, var_t=0.04)).item()
    assert c == pytest.approx(0.0409 / 0.0509, abs=1e-12)
    assert abs(c - 0.803536) < 1e-6


def test_structure_examples(rng):
    t = rng.random((1, 1, 11, 11))
    m = local_moments(3.0 * t + 0.5, t)
    assert abs(structure_map(m).item() - 1.0) < 1e-3
    t0 = t - t.mean()
    m = local_moments(-t0, t0, WindowSpec(11, estimator="uniform"))
    assert m.var_t.item() > 100 * StabilizerConfig().c3
    assert structure_map(m).item() == pytest.approx(-1.0, abs=1e-2)
    assert structure_map(moments()).item() == 1.0


def test_k1_moves_luminance_toward_one(rng):
    m = local_moments(rng.random((1, 2, 14, 14)), rng.random((1, 2, 14, 14)) * 0.3)
    prev = luminance_map(m, StabilizerConfig(k1=0.001))
    for k1 in (0.01, 0.1, 1.0):
        cur = luminance_map(m, StabilizerConfig(k1=k1))
        assert (np.abs(1 - cur) <= np.abs(1 - prev)).all()
        prev = cur


def test_ssim_identity(rng):
    x = rng.random((2, 3, 16, 16))
    res = ssim_loss(x, x)
    assert res.scalar < 1e-12
    np.testing.assert_allclose(res.component_maps["ssim"], 1.0, atol=1e-12)


def test_ssim_constant_maps():
    res = ssim_loss(np.full((1, 1, 12, 12), 0.2), np.full((1, 1, 12, 12), 0.8), RAW)
    assert abs(res.scalar - 0.264667) < 1e-6
    assert abs(res.scalar - (1 - 0.3201 / 0.6801) / 2) < 1e-12


def test_ssim_map_reduction_and_range(rng):
    res = ssim_loss(rng.random((2, 2, 16, 16)), rng.random((2, 2, 16, 16)))
    assert res.map.shape == (2, 2, 6, 6)
    assert abs(res.scalar - res.map.mean()) < 1e-12
    assert res.map.min() >= 0 and res.map.max() <= 1


@pytest.mark.parametrize("exps", [(1, 1, 1), (0, 0, 1), (2, 0.5, 1), (1, 1.5, 0.5)])
def test_ssim_matches_window_oracle(rng, exps):
    s, t = rng.random((1, 2, 16, 16)), rng.random((1, 2, 16, 16))
    cfg = LossConfig(exponents=SsimExponents(*exps))
    assert abs(ssim_loss(s, t, cfg).scalar - naive.ssim_loss(s, t, 11, 1.5, *exps)) < 1e-10


def test_ssim_uniform_estimator_matches_oracle(rng):
    s, t = rng.random((1, 1, 10, 10)), rng.random((1, 1, 10, 10))
    cfg = LossConfig(window=WindowSpec(4, estimator="uniform"))
    assert abs(ssim_loss(s, t, cfg).scalar - naive.ssim_loss(s, t, 4, uniform=True)) < 1e-10


def test_ssim_non_integer_gamma_negative_structure(rng):
    t = rng.random((1, 1, 11, 11))
    cfg = LossConfig(exponents=SsimExponents(1, 1, 0.5))
    res = ssim_loss(1 - t, t, cfg)
    assert np.isfinite(res.scalar)
    assert res.component_maps["ssim"].item() < 0
    assert abs(res.scalar - naive.ssim_loss(1 - t, t, gamma=0.5)) < 1e-10


def test_ssim_symmetry(rng):
    s, t = rng.random((1, 2, 14, 14)), rng.random((1, 2, 14, 14))
    assert ssim_loss(s, t).scalar == pytest.approx(ssim_loss(t, s).scalar, abs=1e-15)


def test_ssim_errors():
    with pytest.raises(DimensionError):
        ssim_loss(np.zeros((1, 1, 12, 12)), np.zeros((1, 2, 12, 12)))
    with pytest.raises(DimensionError):
        ssim_loss(np.zeros((1, 1, 8, 8)), np.zeros((1, 1, 8, 8)))


def test_msssim_identity_and_constant():
    x = np.random.default_rng(3).random((1, 1, 13, 13))
    assert ms_ssim_loss(x, x).scalar < 1e-12
    res = ms_ssim_loss(np.full((1, 1, 12, 12), 0.2), np.full((1, 1, 12, 12), 0.8))
    want = (1 - (0.3201 / 0.6801) ** 0.1333) / 2
    assert abs(res.scalar - want) < 1e-12
    assert abs(res.scalar - 0.0477) < 1e-4


def test_msssim_matches_level_oracle(rng):
    s, t = rng.random((1, 2, 16, 16)), rng.random((1, 2, 16, 16))
    assert abs(ms_ssim_loss(s, t).scalar - naive.ms_ssim_loss(s, t)) < 1e-10


def test_lp_examples():
    one = lambda v: np.array(v, dtype=float).reshape(1, 1, 1, 1)  # noqa: E731
    assert lp_loss(one(0.5), one(0.5)).scalar == 0.0
    r = lp_loss(one(0.5), one(0.2), 2)
    assert r.scalar == pytest.approx(0.09, abs=1e-15) and r.map.item() == pytest.approx(0.09, abs=1e-15)
    assert lp_loss(one(0.5), one(0.2), 1).scalar == pytest.approx(0.3, abs=1e-15)


def test_smooth_l1_examples():
    one = lambda v: np.array(v, dtype=float).reshape(1, 1, 1, 1)  # noqa: E731
    assert smooth_l1_loss(one(0.0), one(0.0)).scalar == 0.0
    assert smooth_l1_loss(one(0.3), one(0.0)).scalar == pytest.approx(0.045, abs=1e-15)
    assert smooth_l1_loss(one(2.0), one(0.0)).scalar == 1.5
    with pytest.raises(ConfigError):
        smooth_l1_loss(one(0.0), one(0.0), 0.0)


@pytest.mark.parametrize("fn", [lambda s, t: lp_loss(s, t, 1), lambda s, t: lp_loss(s, t, 3),
                                lambda s, t: smooth_l1_loss(s, t, 0.4)])
def test_pointwise_permutation_equivariance(rng, fn):
    s, t = rng.random((2, 3, 5, 5)), rng.random((2, 3, 5, 5))
    perm = rng.permutation(s.size)
    ps = s.ravel()[perm].reshape(s.shape)
    pt = t.ravel()[perm].reshape(t.shape)
    assert fn(ps, pt).scalar == pytest.approx(fn(s, t).scalar, rel=1e-14)


def test_combined(rng):
    s, t = rng.random((1, 2, 16, 16)), rng.random((1, 2, 16, 16))
    x = s.copy()
    assert combined_l1_msssim(x, x).scalar == 0.0
    res = combined_l1_msssim(s, t)
    want = 0.15 * lp_loss(s, t, 1).scalar + 0.85 * ms_ssim_loss(s, t).scalar
    assert abs(res.scalar - want) < 1e-14
    only_l1 = LossConfig(kind="combined", combine_w1=1.0, combine_w2=0.0)
    assert combined_l1_msssim(s, t, only_l1).scalar == lp_loss(s, t, 1).scalar


def test_compute_loss_dispatch(rng):
    s, t = rng.random((1, 1, 12, 12)), rng.random((1, 1, 12, 12))
    assert compute_loss(s, t, LossConfig(kind="l1")).scalar == lp_loss(s, t, 1).scalar
    assert compute_loss(s, t, LossConfig(kind="l2")).scalar == lp_loss(s, t, 2).scalar
    assert compute_loss(s, t, LossConfig(kind="lp", p=3)).scalar == lp_loss(s, t, 3).scalar
    with pytest.raises(ConfigError):
        LossConfig(kind="cosine")


@pytest.mark.parametrize("kind", ["ssim", "msssim", "l1", "l2", "smoothl1", "combined"])
def test_feat_loss_identity_and_single_scale(rng, kind):
    t = [rng.random((1, 2, 16, 16))]
    cfg = LossConfig(kind=kind)
    assert feat_loss(t, t, cfg=cfg) == pytest.approx(0.0, abs=1e-12)
    s = [rng.random((1, 2, 16, 16))]
    from ssimkd.losses import prepare_pair

    sn, tn = prepare_pair(s[0], t[0], None, cfg)
    assert feat_loss(s, t, cfg=cfg) == compute_loss(sn, tn, cfg).scalar


def test_feat_loss_two_scales(rng):
    s = [rng.random((1, 2, 16, 16)), rng.random((1, 2, 12, 12))]
    t = [rng.random((1, 2, 16, 16)), rng.random((1, 2, 12, 12))]
    whole = feat_loss(s, t)
    parts = feat_loss(s[:1], t[:1]) + feat_loss(s[1:], t[1:])
    assert abs(whole - parts) < 1e-14
    with pytest.raises(DimensionError):
        feat_loss(s, t[:1])


def test_total_loss():
    assert total_loss(0.5, 1.0, 4) == 3.0
    assert total_loss(0.5, 1.0, 0) == 1.0
    assert total_loss(0.25, 0.0, 2) == 0.5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.1, 3.0))
def test_ssim_scalar_in_unit_interval(seed, a, b, g):
    rng = np.random.default_rng(seed)
    s = rng.random((1, 1, 12, 12)) * rng.uniform(0, 3) - rng.uniform(0, 1)
    t = rng.random((1, 1, 12, 12))
    r = ssim_loss(s, t, LossConfig(exponents=SsimExponents(a, b, g)))
    assert 0.0 <= r.scalar <= 1.0 and math.isfinite(r.scalar)
