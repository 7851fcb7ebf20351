import json
import math

import numpy as np
import pytest

from macpolar.channels import (
    DiscreteBimc,
    DiscreteMac,
    GaussianMacSpec,
    adder_mac,
    bec,
    bhattacharyya,
    bsc,
    combine_minus,
    combine_plus,
    ddot_channel,
    dot_channel,
    default_gaussian_quantization,
    llr_ddot,
    llr_dot,
    load_channel,
    mac_mutual_information,
    mac_region_vertices,
    merge_outputs,
    mutual_information,
    noiseless_bimc,
    pure_noise_bimc,
    pure_noise_mac,
    quantize_gaussian_mac,
    save_channel,
)
from conftest import random_bimc, random_mac


def test_validation_rejects_bad_rows():
    with pytest.raises(ValueError):
        DiscreteBimc([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(ValueError):
        DiscreteMac(np.full((2, 2, 2), 0.3))


def test_dot_channel_adder():
    d = dot_channel(adder_mac())
    assert np.allclose(d.prob, [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]], atol=1e-15)
    assert mutual_information(d) == pytest.approx(0.5, abs=1e-12)


def test_dot_channel_ignores_independent_user(rng):
    # W(y|u,v) independent of v: the average collapses to the single row
    w1 = random_bimc(rng, M=4)
    w = DiscreteMac(np.stack([np.stack([w1.prob[0]] * 2),
                              np.stack([w1.prob[1]] * 2)]))
    assert np.allclose(dot_channel(w).prob, w1.prob, atol=1e-15)


def test_ddot_channel_adder():
    dd = ddot_channel(adder_mac())
    assert mutual_information(dd) == pytest.approx(1.0, abs=1e-12)
    assert bhattacharyya(dd) == pytest.approx(0.0, abs=1e-15)


def test_ddot_channel_pure_noise():
    assert mutual_information(ddot_channel(pure_noise_mac(3))) == \
        pytest.approx(0.0, abs=1e-12)


def test_coarse_quantized_split_loses_information():
    W = quantize_gaussian_mac(GaussianMacSpec(1.0), -10, 10, 8)
    assert np.allclose(W.prob.sum(axis=2), 1.0, atol=1e-12)
    assert mutual_information(dot_channel(W)) < mac_mutual_information(W)


def test_split_conservation(rng):
    for _ in range(5):
        w = random_mac(rng, M=5)
        total = mutual_information(dot_channel(w)) + \
            mutual_information(ddot_channel(w))
        assert total == pytest.approx(mac_mutual_information(w), abs=1e-9)


def test_combine_minus_bec():
    w = combine_minus(bec(0.5), bec(0.5))
    assert w.output_size == 9
    assert mutual_information(w) == pytest.approx(0.25, abs=1e-12)
    merged = merge_outputs(w)
    assert merged.output_size == 3  # equivalent to a BEC(0.75)
    assert bhattacharyya(merged) == pytest.approx(0.75, abs=1e-12)


def test_combine_minus_hides_input_behind_noise():
    w = combine_minus(noiseless_bimc(), pure_noise_bimc())
    assert mutual_information(w) == pytest.approx(0.0, abs=1e-12)


def test_combine_plus_bec():
    w = combine_plus(bec(0.5), bec(0.5))
    assert mutual_information(w) == pytest.approx(0.75, abs=1e-12)
    assert bhattacharyya(w) == pytest.approx(0.25, abs=1e-12)


def test_combine_plus_noiseless():
    w = combine_plus(noiseless_bimc(), noiseless_bimc())
    assert mutual_information(w) == pytest.approx(1.0, abs=1e-12)
    assert bhattacharyya(w) == pytest.approx(0.0, abs=1e-15)


def test_combine_conservation(rng):
    for _ in range(8):
        w1 = random_bimc(rng, M=3)
        w2 = random_bimc(rng, M=4)
        lhs = mutual_information(combine_minus(w1, w2)) + \
            mutual_information(combine_plus(w1, w2))
        rhs = mutual_information(w1) + mutual_information(w2)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_combine_conservation_bsc_tight():
    w = bsc(0.11)
    lhs = mutual_information(combine_minus(w, w)) + \
        mutual_information(combine_plus(w, w))
    assert lhs == pytest.approx(2 * mutual_information(w), abs=1e-12)


def test_bhattacharyya_combining_laws(rng):
    for _ in range(8):
        w1 = random_bimc(rng, M=3)
        w2 = random_bimc(rng, M=3)
        z1, z2 = bhattacharyya(w1), bhattacharyya(w2)
        assert bhattacharyya(combine_plus(w1, w2)) == \
            pytest.approx(z1 * z2, abs=1e-10)
        assert bhattacharyya(combine_minus(w1, w2)) <= z1 + z2 + 1e-12


def test_merge_preserves_functionals(rng):
    for _ in range(5):
        w = combine_minus(random_bimc(rng, 4), random_bimc(rng, 3))
        m = merge_outputs(w)
        assert m.output_size <= w.output_size
        assert mutual_information(m) == pytest.approx(
            mutual_information(w), abs=1e-12)
        assert bhattacharyya(m) == pytest.approx(bhattacharyya(w), abs=1e-12)


def test_bhattacharyya_values():
    assert bhattacharyya(noiseless_bimc()) == 0.0
    assert bhattacharyya(pure_noise_bimc()) == pytest.approx(1.0, abs=1e-15)
    assert bhattacharyya(bsc(0.11)) == pytest.approx(
        2 * math.sqrt(0.11 * 0.89), abs=1e-12)


def test_mutual_information_values():
    assert mutual_information(bec(0.5)) == pytest.approx(0.5, abs=1e-12)
    assert mutual_information(pure_noise_bimc(5)) == pytest.approx(0.0, abs=1e-12)


def test_mac_region_vertices_adder():
    v = mac_region_vertices(adder_mac())
    assert v.a_point == pytest.approx((0.5, 1.0), abs=1e-12)
    assert v.b_point == pytest.approx((1.0, 0.5), abs=1e-12)
    assert v.sum_rate == pytest.approx(1.5, abs=1e-12)


def test_region_geometry(rng):
    for _ in range(5):
        v = mac_region_vertices(random_mac(rng, M=4))
        assert v.a_point[0] + v.a_point[1] == pytest.approx(v.sum_rate, abs=1e-9)
        assert v.b_point[0] + v.b_point[1] == pytest.approx(v.sum_rate, abs=1e-9)
        assert v.a_point[0] <= v.b_point[0] + 1e-12
        assert v.a_point[1] >= v.b_point[1] - 1e-12
        for coord in (*v.a_point, *v.b_point):
            assert -1e-12 <= coord <= 1.0 + 1e-12


def test_gaussian_anchor_rates():
    # published operating point of the unit-scale Gaussian MAC
    W = default_gaussian_quantization(GaussianMacSpec(1.0), bins=2000)
    v = mac_region_vertices(W)
    assert v.sum_rate == pytest.approx(1.11, abs=0.005)
    assert v.b_point[0] == pytest.approx(0.7215, abs=0.002)


def test_quantize_symmetry_and_rows():
    W = quantize_gaussian_mac(GaussianMacSpec(1.0), -10, 10, 101)
    assert np.allclose(W.prob.sum(axis=2), 1.0, atol=1e-12)
    assert np.allclose(W.prob[0, 1], W.prob[1, 0], atol=1e-15)


def test_quantize_small_noise_approaches_adder():
    W = default_gaussian_quantization(GaussianMacSpec(0.01), bins=2000)
    assert mac_mutual_information(W) == pytest.approx(1.5, abs=1e-3)


def test_quantize_invalid_range():
    with pytest.raises(ValueError):
        quantize_gaussian_mac(GaussianMacSpec(1.0), 3.0, -3.0, 100)


def test_llr_dot_values():
    spec = GaussianMacSpec(1.0)
    assert llr_dot(0.0, spec) == pytest.approx(0.0, abs=1e-15)
    expected = math.log((math.exp(-4) + math.exp(-16)) / (1 + math.exp(-4)))
    assert llr_dot(2.0, spec) == pytest.approx(expected, abs=1e-12)
    assert llr_dot(-2.0, spec) == pytest.approx(-expected, abs=1e-12)


def test_llr_dot_odd_and_overflow_safe():
    spec = GaussianMacSpec(1.0)
    ys = np.linspace(-100.0, 100.0, 201)
    vals = llr_dot(ys, spec)
    assert np.all(np.isfinite(vals))
    assert np.allclose(vals, -llr_dot(-ys, spec), atol=1e-12)


def test_llr_ddot_values():
    spec = GaussianMacSpec(1.0)
    assert llr_ddot(1.0, 1, spec) == pytest.approx(0.0, abs=1e-15)
    assert llr_ddot(0.0, 1, spec) == pytest.approx(4.0, abs=1e-12)   # y-ubar=-1
    assert llr_ddot(2.0, 1, spec) == pytest.approx(-4.0, abs=1e-12)  # y-ubar=+1


def test_llr_ddot_shift_consistency():
    spec = GaussianMacSpec(0.8)
    ys = np.linspace(-5, 5, 31)
    assert np.allclose(llr_ddot(ys, 1, spec), llr_ddot(ys - 2.0, 0, spec),
                       atol=1e-12)


def test_llr_scales_match_quantized_channel():
    # closed-form LLRs agree with log-ratios of a fine quantized channel
    spec = GaussianMacSpec(1.0)
    W = quantize_gaussian_mac(spec, -10, 10, 4001)
    d = dot_channel(W)
    centers = np.linspace(-10, 10, 4002)[:-1] + 10.0 / 4001
    for y in (-2.5, -0.7, 0.3, 1.9):
        k = np.argmin(np.abs(centers - y))
        table = math.log(d.prob[0, k] / d.prob[1, k])
        assert llr_dot(centers[k], spec) == pytest.approx(table, abs=5e-3)


def test_channel_json_roundtrip(tmp_path, rng):
    for channel in (random_mac(rng, 3), random_bimc(rng, 4),
                    GaussianMacSpec(0.9)):
        path = tmp_path / "chan.json"
        save_channel(channel, path)
        back = load_channel(path)
        if isinstance(channel, GaussianMacSpec):
            assert back == channel
        else:
            assert np.array_equal(back.prob, channel.prob)
    doc = json.loads(path.read_text())
    assert doc["type"] == "gaussian_mac"
