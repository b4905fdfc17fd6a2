import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmapcodec.codec import (
    LATENT_STEP,
    Bitstream,
    CodecConfig,
    ContainerError,
    HyperLatent,
    analysis,
    bits_per_block,
    block_costs,
    decode,
    decode_detailed,
    encode,
    encode_detailed,
    hyper_encode,
    predict_mu_sigma,
    prepare_image,
    synthesis,
    zigzag_order,
)
from qmapcodec.entropy import SIGMA_MIN, sigma_from_index, sigma_index
from qmapcodec.gain import GainUnit, GainVector
from qmapcodec.imagecore import PlanarImage, psnr
from qmapcodec.qmap import QualityIndexMap
from qmapcodec.synthetic import make_fixture


def dct_matrix(n=16):
    # orthonormal DCT-II basis, written out from its definition
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * math.sqrt(2 / n)
    m[0] /= math.sqrt(2)
    return m


def test_zigzag_starts_like_jpeg():
    rows, cols = zigzag_order()
    assert list(zip(rows[:6].tolist(), cols[:6].tolist())) == [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]
    assert len(set(zip(rows.tolist(), cols.tolist()))) == 256


@pytest.mark.parametrize("v", [0.0, 1.0, 37.0, 255.0])
def test_constant_block_dc(v):
    lat = analysis(np.full((16, 16), v), 16)
    d = dct_matrix()
    oracle = (d @ np.full((16, 16), v) @ d.T)[0, 0]
    assert lat[0, 0, 0] == pytest.approx(oracle, abs=1e-9)
    assert lat[0, 0, 0] == pytest.approx(16 * v, abs=1e-9)
    np.testing.assert_allclose(lat[1:, 0, 0], 0, atol=1e-9)


def test_analysis_matches_matrix_dct():
    rng = np.random.default_rng(0)
    plane = rng.uniform(0, 255, (32, 16))
    lat = analysis(plane, 10)
    d = dct_matrix()
    rows, cols = zigzag_order()
    for i in range(2):
        coef = d @ plane[16 * i:16 * i + 16] @ d.T
        np.testing.assert_allclose(lat[:, i, 0], coef[rows[:10], cols[:10]], atol=1e-9)


def test_full_basis_reconstructs():
    plane = np.random.default_rng(1).uniform(0, 255, (32, 48))
    assert not analysis(np.zeros((32, 32)), 8).any()
    np.testing.assert_allclose(synthesis(analysis(plane, 256))[0], plane, atol=1e-6)
    u, v = plane, plane[::-1]
    back = synthesis(analysis([u, v], 256), 2)
    np.testing.assert_allclose(back[1], v, atol=1e-6)


def test_hyper_examples():
    y = np.zeros((1, 2, 2))
    y[0, 1, 1] = 4
    z = hyper_encode(y)
    assert z.mean[0, 0, 0] == 1.0 and z.scale[0, 0, 0] == 1.5
    c = hyper_encode(np.full((3, 8, 8), 5.0))
    assert c.shape == (3, 4, 4) and np.all(c.mean == 5) and not c.scale.any()


def test_predict_mu_sigma():
    z = HyperLatent(np.full((2, 2, 2), 3), np.zeros((2, 2, 2), dtype=np.int64), (2, 4, 4))
    mu, sigma = predict_mu_sigma(z)
    assert mu.shape == (2, 4, 4) and np.all(mu == 3)
    assert np.allclose(sigma, SIGMA_MIN)
    scale = np.arange(8).reshape(2, 2, 2)
    _, sigma = predict_mu_sigma(HyperLatent(scale * 0, scale, (2, 4, 4)), GainVector.ones(2))
    up = np.repeat(np.repeat(scale, 2, axis=1), 2, axis=2)
    np.testing.assert_allclose(sigma, sigma_from_index(sigma_index(up)))
    _, halved = predict_mu_sigma(HyperLatent(scale * 0, scale, (2, 4, 4)), GainVector([0.5, 1.0]))
    np.testing.assert_allclose(halved[0], sigma_from_index(sigma_index(up[0] * 0.5)))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 100), st.integers(1, 100), st.integers(0, 1000))
def test_shape_chain(w, h, seed):
    rgb = np.random.default_rng(seed).integers(0, 256, (h, w, 3))
    img = PlanarImage.from_rgb_array(rgb)
    r = encode_detailed(img, CodecConfig(c_y=4, c_uv=2))
    H, W = r.original.height, r.original.width
    assert H % 32 == 0 and W % 32 == 0
    assert r.y_latent.shape == (4, H // 16, W // 16)
    assert r.ledger.y_hyper.bits.shape == (4, H // 32, W // 32)
    assert r.ledger.uv_residual.bits.shape == (4, H // 32, W // 32)
    out = decode(r.bitstream.to_bytes())
    assert (out.width, out.height) == (w, h)


def test_deterministic_round_trip(natural):
    cfg = CodecConfig(beta=3.0, qmap=QualityIndexMap(np.arange(64).reshape(8, 8) % 9 - 4))
    a = encode_detailed(natural, cfg)
    b = encode_detailed(natural, cfg)
    data = a.bitstream.to_bytes()
    assert data == b.bitstream.to_bytes()
    d1, d2 = decode_detailed(data), decode_detailed(data)
    for p, q, r in zip(d1.planes, d2.planes, a.reconstruction.planes):
        np.testing.assert_array_equal(p, q)
        np.testing.assert_array_equal(p, r)


def test_constant_gray():
    img = make_fixture("constant", 128, 128)
    bs = encode(img, CodecConfig())
    out = decode(bs.to_bytes())
    assert psnr(prepare_image(img).planes[0], out.planes[0]) >= 50
    assert bs.bpp < 0.1


def test_zero_map_same_payload(natural):
    plain = encode(natural, CodecConfig())
    zero = encode(natural, CodecConfig(qmap=QualityIndexMap.constant(8, 8, 0)))
    for name in ("y_hyper", "y_residual", "uv_hyper", "uv_residual"):
        assert plain.segments[name] == zero.segments[name]
    assert plain.segments["qmap"] == b"" and zero.segments["qmap"]


def test_qmap_shape_checked(natural):
    with pytest.raises(ValueError):
        encode(natural, CodecConfig(qmap=QualityIndexMap.constant(4, 4, 0)))


def test_bits_per_block_conservation(natural):
    r = encode_detailed(natural, CodecConfig())
    bdm = bits_per_block(r.ledger)
    total = r.ledger.y_residual.total() + r.ledger.y_hyper.total()
    assert abs(bdm.total() - total) < 1e-6
    assert bdm.shape == (8, 8) and bdm.block == 16


def test_bits_per_block_constant_is_flat():
    r = encode_detailed(make_fixture("constant", 128, 128), CodecConfig())
    v = bits_per_block(r.ledger).values
    assert v.var() < 0.1 * v.mean() ** 2


def test_bits_per_block_textured_block_is_max():
    rgb = np.full((128, 128, 3), 100.0)
    rgb[48:64, 80:96] += np.random.default_rng(0).normal(0, 40, (16, 16, 1))
    r = encode_detailed(PlanarImage.from_rgb_array(rgb), CodecConfig())
    v = bits_per_block(r.ledger).values
    assert np.unravel_index(v.argmax(), v.shape) == (3, 5)


def test_per_block_monotone_in_index(natural_prepared):
    # all coefficients kept so block distortion is quantisation error alone
    prev = None
    for k in (-8, -4, 0, 4, 8):
        bits, sse = block_costs(natural_prepared, CodecConfig(c_y=256), k)
        if prev is not None:
            assert np.all(bits >= prev[0]) and np.all(sse <= prev[1])
        prev = bits, sse


@pytest.mark.parametrize("name", ["flat", "natural", "high-frequency"])
def test_near_transparent_bound(name):
    img = make_fixture(name, 64, 64)
    cfg = CodecConfig(c_y=256, beta=8.0, qmap=QualityIndexMap.constant(4, 4, 8))
    r = encode_detailed(img, cfg)
    assert psnr(r.original.planes[0], r.reconstruction.planes[0]) > 45


def test_uv_aux_changes_uv_rate(natural, monkeypatch):
    import qmapcodec.codec as codec

    with_aux = encode(natural, CodecConfig())
    monkeypatch.setattr(codec, "_chroma_aux", lambda y, grid: np.zeros(grid))
    without = encode(natural, CodecConfig())
    assert with_aux.segments["uv_hyper"] != without.segments["uv_hyper"]
    assert with_aux.segments["y_residual"] == without.segments["y_residual"]


def test_container_layout(natural):
    bs = encode(natural, CodecConfig(beta=2.5, qmap=QualityIndexMap.constant(8, 8, 1)))
    data = bs.to_bytes()
    magic, version, flags, w, h, ow, oh, cy, cuv, beta = struct.unpack_from("<4sBBIIIIHHI", data)
    assert (magic, version, flags & 1, w, h, ow, oh, cy, cuv) == (b"QMC1", 1, 1, 128, 128, 128, 128, 16, 8)
    assert beta == int(2.5 * 65536)
    assert len(data) == Bitstream.HEADER_BYTES + sum(len(s) for s in bs.segments.values())
    assert bs.bpp == 8 * len(data) / (128 * 128)
    back = Bitstream.from_bytes(data)
    assert back.segments == bs.segments


def test_container_errors(natural):
    data = encode(natural, CodecConfig()).to_bytes()
    with pytest.raises(ContainerError):
        decode(b"XXXX" + data[4:])
    with pytest.raises(ContainerError):
        decode(data[:4] + bytes([2]) + data[5:])
    with pytest.raises(ContainerError):
        decode(data[:-3])
    with pytest.raises(ContainerError):
        decode(data + b"\0")
    with pytest.raises(ContainerError):
        decode(data[:10])


def test_custom_gain_unit_needs_decoder_side_unit(natural):
    unit = GainUnit((1.0,), (np.linspace(0.5, 2, 16),))
    data = encode(natural, CodecConfig(gain_unit_y=unit)).to_bytes()
    with pytest.raises(ContainerError):
        decode(data)
    ref = encode_detailed(natural, CodecConfig(gain_unit_y=unit)).reconstruction
    np.testing.assert_array_equal(decode(data, gain_unit_y=unit).planes[0], ref.planes[0])


@pytest.mark.parametrize("kw", [dict(c_y=8, c_uv=8), dict(c_uv=0), dict(c_y=300), dict(qpred="x"), dict(beta=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        CodecConfig(**kw)


def test_flags_round_trip(natural):
    cfg = CodecConfig(beta=1.5, interp="paper-literal", qpred="avg", sigma_gain=False,
                      qmap=QualityIndexMap(np.eye(8, dtype=int) * 3))
    r = encode_detailed(natural, cfg)
    out = decode_detailed(r.bitstream.to_bytes())
    np.testing.assert_array_equal(out.planes[0], r.reconstruction.planes[0])


def test_latent_step_is_decoder_visible_constant():
    assert LATENT_STEP == 8.0
