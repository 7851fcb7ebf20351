import json

import numpy as np
import pytest

from macpolar.channels import (
    GaussianMacSpec,
    adder_mac,
    bhattacharyya,
    ddot_channel,
    dot_channel,
    mac_mutual_information,
    mutual_information,
    quantize_gaussian_mac,
)
from macpolar.construction import sample_mac_outputs
from macpolar.mac_polar import (
    BlockOrder,
    MacPolarCode,
    Schedule,
    block_rates,
    building_block_channels,
    enumerate_monotone_orders,
    exact_mac_bit_channels,
    joint_sc_decode,
    load_code,
    mac_polar_encode,
    make_preset_order,
    order_rate_profile,
    save_code,
)
from macpolar.polar_core import FrozenSpec, polar_encode, sc_decode
from conftest import random_mac


def test_make_preset_order_examples():
    assert make_preset_order(2, 1).order_id == "U1U2V1V2"
    assert make_preset_order(2, 3).order_id == "V1V2U1U2"
    assert make_preset_order(4, 2).order_id == "V1U1U2U3U4V2V3V4"
    with pytest.raises(ValueError):
        make_preset_order(2, 4)


def test_block_order_validation():
    with pytest.raises(ValueError):
        BlockOrder(((1, 2), (1, 1), (2, 1), (2, 2)))  # user 1 out of order
    with pytest.raises(ValueError):
        BlockOrder(((1, 1), (1, 2), (2, 1), (2, 1)))  # duplicate label
    o = BlockOrder.from_string("U1,V1,V2,U2")
    assert o.L == 2 and o.order_id == "U1V1V2U2"


def test_enumerate_monotone_orders_counts():
    assert len(enumerate_monotone_orders(2)) == 6
    assert [o.order_id for o in enumerate_monotone_orders(1)] == ["U1V1", "V1U1"]
    assert len(enumerate_monotone_orders(4)) == 70
    ids = [o.order_id for o in enumerate_monotone_orders(2)]
    assert len(set(ids)) == 6


def test_schedule_mapping():
    order = BlockOrder.from_string("U1,V1,U2,V2")
    sched = Schedule(8, order)
    assert list(sched.owner_of_slot[:8]) == [1, 1, 1, 1, 2, 2, 2, 2]
    # stage 2 (U2) covers user-1 transform positions 4..7
    assert list(sched.user_index_of_slot[8:12]) == [4, 5, 6, 7]
    assert sched.slot_of_user_index(1, 5) == 9
    assert sched.slot_of_user_index(2, 0) == 4


def test_building_block_identity_lift():
    # at N = L the lifted schedule is the building block itself
    W = adder_mac()
    order = BlockOrder.from_string("U1,V1,U2,V2")
    bb = building_block_channels(W, order)
    lifted = exact_mac_bit_channels(W, order, 1)
    assert len(lifted) == 4
    for a, b in zip(bb, lifted):
        assert mutual_information(a) == pytest.approx(
            mutual_information(b), abs=1e-12)


def test_exact_mac_bit_channels_adder_sum():
    W = adder_mac()
    order = BlockOrder.from_string("U1,V1,U2,V2")
    chans = exact_mac_bit_channels(W, order, 1)
    total = sum(mutual_information(c) for c in chans)
    assert total == pytest.approx(3.0, abs=1e-10)
    chans3 = exact_mac_bit_channels(W, order, 3)
    total3 = sum(mutual_information(c) for c in chans3)
    assert total3 == pytest.approx(8 * 1.5, abs=1e-9)


def test_separate_order_matches_split_channels(rng):
    # all-of-user-1-first: user 1 sees the noise-marginal channel's
    # bit-channels, user 2 the known-interference channel's
    from macpolar.polar_core import exact_bit_channels
    W = random_mac(rng, M=3)
    order = BlockOrder.from_string("U1,U2,V1,V2")
    bb = building_block_channels(W, order)
    dots = exact_bit_channels(dot_channel(W), 1)
    ddots = exact_bit_channels(ddot_channel(W), 1)
    for k in range(2):
        assert mutual_information(bb[k]) == pytest.approx(
            mutual_information(dots[k]), abs=1e-10)
        assert bhattacharyya(bb[k]) == pytest.approx(
            bhattacharyya(dots[k]), abs=1e-10)
        assert mutual_information(bb[2 + k]) == pytest.approx(
            mutual_information(ddots[k]), abs=1e-10)
        assert bhattacharyya(bb[2 + k]) == pytest.approx(
            bhattacharyya(ddots[k]), abs=1e-10)


def test_block_rates_adder():
    prof = block_rates(adder_mac(), 2, 2)   # order V1,U1,U2,V2
    assert prof.r1 + prof.r2 == pytest.approx(1.5, abs=1e-10)
    prof1 = block_rates(adder_mac(), 2, 1)
    assert prof1.r1 == pytest.approx(
        mutual_information(dot_channel(adder_mac())), abs=1e-9)


def test_block_rates_preset_family_monotone(rng):
    W = random_mac(rng, M=4)
    cap = mac_mutual_information(W)
    profs = [block_rates(W, 2, i) for i in range(1, 4)]
    for p in profs:
        assert p.r1 + p.r2 == pytest.approx(cap, abs=1e-9)
        assert np.all(p.terms >= -1e-12) and np.all(p.terms <= 1 + 1e-12)
    for a, b in zip(profs[:-1], profs[1:]):
        assert -1e-9 <= b.r1 - a.r1 <= 0.5 + 1e-9
        assert -1e-9 <= a.r2 - b.r2 <= 0.5 + 1e-9


def test_profile_l2_grid_matches_generic(rng):
    # the streaming L=2 path and the generic joint-table path must agree
    from macpolar.mac_polar import _profile_terms_generic, _profile_terms_l2
    W = random_mac(rng, M=5)
    for order in (make_preset_order(2, 2), BlockOrder.from_string("U1,V1,U2,V2")):
        a = _profile_terms_l2(W, order)
        b = _profile_terms_generic(W, order)
        assert np.allclose(a, b, atol=1e-10)


def test_block_terms_gaussian_anchors():
    W = quantize_gaussian_mac(GaussianMacSpec(1.0), -10, 10, 500)
    prof = order_rate_profile(W, BlockOrder.from_string("U1,V1,U2,V2"))
    assert prof.terms == pytest.approx([0.1550, 0.4646, 0.6889, 0.9128],
                                       abs=0.004)


def test_mac_polar_encode():
    order = BlockOrder.from_string("U1,V1,U2,V2")
    code = MacPolarCode(N=4, order=order, info_set_1=[3], info_set_2=[])
    x1, x2 = mac_polar_encode(code, np.array([1], dtype=np.uint8),
                              np.zeros(0, dtype=np.uint8))
    assert np.array_equal(x1, [1, 1, 1, 1])
    assert np.array_equal(x2, [0, 0, 0, 0])
    # user 1's word depends only on its own inputs
    x1b, _ = mac_polar_encode(code, np.array([1], dtype=np.uint8),
                              np.zeros(0, dtype=np.uint8))
    assert np.array_equal(x1, x1b)


@pytest.mark.parametrize("order_s", ["U1V1U2V2", "U1U2V1V2", "V1U1V2U2"])
def test_joint_decode_noiseless_adder(order_s, rng):
    # error-free slots only: the union bound is then essentially zero and
    # recovery must be exact
    W = adder_mac()
    order = BlockOrder.from_string(order_s)
    n, N = 4, 16
    chans = exact_mac_bit_channels(W, order, n)
    Z = np.array([bhattacharyya(c) for c in chans])
    sched = Schedule(N, order)
    good = np.flatnonzero(Z < 1e-9)
    info1 = sched.user_index_of_slot[good[sched.owner_of_slot[good] == 1]]
    info2 = sched.user_index_of_slot[good[sched.owner_of_slot[good] == 2]]
    code = MacPolarCode(N=N, order=order, info_set_1=info1, info_set_2=info2)
    assert code.rate_1 + code.rate_2 <= 1.5 + 1e-12
    assert code.rate_1 + code.rate_2 > 0.5
    i1 = rng.integers(0, 2, (100, info1.size), dtype=np.uint8)
    i2 = rng.integers(0, 2, (100, info2.size), dtype=np.uint8)
    x1, x2 = mac_polar_encode(code, i1, i2)
    y = x1.astype(np.int64) + x2.astype(np.int64)
    res = joint_sc_decode(code, y, W)
    assert np.array_equal(res.u_hat[:, info1], i1)
    assert np.array_equal(res.v_hat[:, info2], i2)


def test_joint_decode_identity_lift_case(rng):
    # N = L: the decoder is pure building-block marginalization
    W = adder_mac()
    order = BlockOrder.from_string("U1,V1,U2,V2")
    code = MacPolarCode(N=2, order=order, info_set_1=[0, 1], info_set_2=[0, 1])
    u = rng.integers(0, 2, (64, 2), dtype=np.uint8)
    v = rng.integers(0, 2, (64, 2), dtype=np.uint8)
    y = polar_encode(u).astype(np.int64) + polar_encode(v).astype(np.int64)
    res = joint_sc_decode(code, y, W, genie_bits=(u, v))
    assert res.errors.shape == (64, 4)


def test_joint_decode_separate_order_equals_two_stage():
    # under the all-user-1-first order the joint decoder must reproduce the
    # two-stage single-user decode bit for bit
    spec = GaussianMacSpec(1.0)
    N = 16
    Wq = quantize_gaussian_mac(spec, -10, 10, 64)
    order = BlockOrder.from_string("U1,U2,V1,V2")
    rng = np.random.default_rng(21)
    B = 200
    u = rng.integers(0, 2, (B, N), dtype=np.uint8)
    v = rng.integers(0, 2, (B, N), dtype=np.uint8)
    y = sample_mac_outputs(Wq, polar_encode(u), polar_encode(v), rng)
    code = MacPolarCode(N=N, order=order, info_set_1=np.arange(N),
                        info_set_2=np.arange(N))
    res = joint_sc_decode(code, y, Wq)

    dW, ddW = dot_channel(Wq), ddot_channel(Wq)
    fs = FrozenSpec.from_info_set(N, range(N))
    with np.errstate(divide="ignore"):
        llr1 = np.log(dW.prob[0, y]) - np.log(dW.prob[1, y])
    u_hat = sc_decode(np.nan_to_num(llr1, posinf=1e9, neginf=-1e9), fs)
    pair = polar_encode(u_hat).astype(np.int64) * Wq.output_size + y
    with np.errstate(divide="ignore"):
        llr2 = np.log(ddW.prob[0, pair]) - np.log(ddW.prob[1, pair])
    v_hat = sc_decode(np.nan_to_num(llr2, posinf=1e9, neginf=-1e9), fs)
    assert np.array_equal(res.u_hat, u_hat)
    assert np.array_equal(res.v_hat, v_hat)


def test_joint_decode_gaussian_runs_and_is_deterministic():
    spec = GaussianMacSpec(1.0)
    order = make_preset_order(2, 2)
    N = 32
    code = MacPolarCode(N=N, order=order, info_set_1=np.arange(N),
                        info_set_2=np.arange(N))
    rng = np.random.default_rng(5)
    u = rng.integers(0, 2, (16, N), dtype=np.uint8)
    v = rng.integers(0, 2, (16, N), dtype=np.uint8)
    y = sample_mac_outputs(spec, polar_encode(u), polar_encode(v), rng)
    a = joint_sc_decode(code, y, spec)
    b = joint_sc_decode(code, y, spec)
    assert np.array_equal(a.decisions, b.decisions)


def test_complexity_contract():
    # marginalization terms scale with N * 2^(2L); f/g work with N * (n-l+1)
    spec = GaussianMacSpec(1.0)
    counts = {}
    for L, n in ((2, 5), (2, 7), (4, 5), (4, 7)):
        order = make_preset_order(L, 1)
        N = 1 << n
        code = MacPolarCode(N=N, order=order, info_set_1=np.arange(N),
                            info_set_2=np.arange(N))
        y = np.zeros((1, N))
        res = joint_sc_decode(code, y, spec, count_ops=True)
        counts[(L, n)] = res.op_counts
    for L in (2, 4):
        marg = {n: counts[(L, n)]["marginalization_terms"] for n in (5, 7)}
        assert marg[7] / marg[5] == pytest.approx(4.0, rel=1e-6)
        bound = {n: counts[(L, n)]["marginalization_terms"] /
                 ((1 << n) * (1 << (2 * L))) for n in (5, 7)}
        assert all(b <= 2.0 for b in bound.values())
        fg = {n: counts[(L, n)]["fg_node_ops"] for n in (5, 7)}
        l = L.bit_length() - 1
        for n in (5, 7):
            assert fg[n] <= 4 * (1 << n) * (n - l + 1)


def test_code_json_roundtrip(tmp_path):
    order = BlockOrder.from_string("V1,U1,U2,V2")
    frozen1 = np.zeros(8, dtype=np.uint8)
    frozen1[1] = 1
    code = MacPolarCode(N=8, order=order, info_set_1=[3, 7], info_set_2=[0, 5],
                        frozen_values_1=frozen1)
    path = tmp_path / "code.json"
    save_code(code, path)
    back = load_code(path)
    assert back.N == 8 and back.order.order_id == "V1U1U2V2"
    assert np.array_equal(back.info_set_1, [3, 7])
    assert np.array_equal(back.info_set_2, [0, 5])
    assert back.frozen_values_1[1] == 1
    doc = json.loads(path.read_text())
    assert set(doc) == {"N", "L", "order", "info_set_1", "info_set_2",
                        "frozen_values"}
