import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cogfuse.numeric import InvalidInputError, ShapeError
from cogfuse.vision import (
    AdapterWeights,
    ImageFormatError,
    PatchEmbedder,
    adaptive_encode,
    area_resize,
    decode_pnm,
    gelu,
    identity_adapter,
    init_adapter,
    mlp_adapter,
    pixel_shuffle,
    pixel_unshuffle,
    read_pnm,
    synthetic_image,
    write_pnm,
)


class TestAdaptiveEncode:
    def test_canonical_448(self):
        ps = adaptive_encode(synthetic_image(448, 448, 0), tile=448)
        assert len(ps) == 1 and ps.global_image.shape == (448, 448, 3)

    def test_896_gives_four_tiles(self):
        img = synthetic_image(896, 896, 1)
        ps = adaptive_encode(img, tile=448, thumb=64)
        assert len(ps) == 4 and ps.grid == (2, 2)
        np.testing.assert_array_equal(ps.patches[1], img[:448, 448:])
        np.testing.assert_array_equal(ps.patches[2], img[448:, :448])

    def test_padding_is_exactly_zero(self):
        img = synthetic_image(500, 448, 2)
        ps = adaptive_encode(img, tile=448, thumb=32)
        assert len(ps) == 2
        second = ps.patches[1]
        assert second.shape == (448, 448, 3)
        np.testing.assert_array_equal(second[:52], img[448:])
        assert np.all(second[52:] == 0.0)

    @settings(max_examples=500, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 25))
    def test_patch_count(self, h, w, p):
        ps = adaptive_encode(np.zeros((h, w, 3)), tile=p, thumb=2)
        assert len(ps) == math.ceil(h / p) * math.ceil(w / p)
        assert all(t.shape == (p, p, 3) for t in ps.patches)

    def test_zero_area(self):
        with pytest.raises(InvalidInputError):
            adaptive_encode(np.zeros((0, 4, 3)), tile=2)

    def test_thumbnail_box_average(self):
        img = np.arange(4 * 4 * 3, dtype=float).reshape(4, 4, 3)
        thumb = area_resize(img, 2, 2)
        np.testing.assert_allclose(thumb[0, 0], img[:2, :2].mean(axis=(0, 1)))
        np.testing.assert_allclose(thumb[1, 1], img[2:, 2:].mean(axis=(0, 1)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 40), st.integers(1, 40))
    def test_thumbnail_preserves_mean(self, h, w, th, tw):
        img = np.random.default_rng(h * 31 + w).random((h, w, 3))
        np.testing.assert_allclose(area_resize(img, th, tw).mean(axis=(0, 1)),
                                   img.mean(axis=(0, 1)), atol=1e-12)


class TestPixelShuffle:
    def test_identity_factor(self, rng):
        x = rng.standard_normal((3, 5, 2))
        np.testing.assert_array_equal(pixel_shuffle(x, 1), x)

    def test_index_oracle(self):
        x = np.arange(16, dtype=float).reshape(4, 4, 1)
        y = pixel_shuffle(x, 2)
        assert y.shape == (2, 2, 4)
        # out[i, j, (a*r + b)*C + c] == in[i*r + a, j*r + b, c]
        for i in range(2):
            for j in range(2):
                for a in range(2):
                    for b in range(2):
                        assert y[i, j, a * 2 + b] == x[2 * i + a, 2 * j + b, 0]
        assert y[0, 0].tolist() == [0, 1, 4, 5]

    def test_round_trip_seed5(self):
        x = np.random.default_rng(5).standard_normal((8, 8, 3))
        assert np.array_equal(pixel_unshuffle(pixel_shuffle(x, 2), 2), x)

    @given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.integers(1, 4))
    def test_bijection(self, r, hb, wb, c):
        x = np.random.default_rng(r * 100 + hb * 10 + wb).standard_normal((hb * r, wb * r, c))
        y = pixel_shuffle(x, r)
        assert y.shape == (hb, wb, c * r * r)
        np.testing.assert_array_equal(np.sort(y, axis=None), np.sort(x, axis=None))
        assert np.array_equal(pixel_unshuffle(y, r), x)

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            pixel_shuffle(np.zeros((3, 4, 1)), 2)


class TestAdapter:
    def test_zero_weights(self, rng):
        w = AdapterWeights(np.zeros((5, 7)), np.zeros(7), np.zeros((7, 3)), np.zeros(3))
        np.testing.assert_array_equal(mlp_adapter(rng.standard_normal((4, 5)), w), np.zeros((4, 3)))

    @pytest.mark.parametrize("act", ["identity", "relu"])
    def test_identity_layers(self, rng, act):
        x = np.abs(rng.standard_normal((4, 6)))  # relu is the identity on [0, inf)
        np.testing.assert_array_equal(mlp_adapter(x, identity_adapter(6, act)), x)

    def test_forward_oracle(self):
        x = np.random.default_rng(21).standard_normal((4, 16))
        w = init_adapter(16, 32, 8, seed=4)
        expected = np.zeros((4, 8))
        for i in range(4):
            hidden = [0.0] * 32
            for j in range(32):
                pre = w.b1[j] + sum(x[i, k] * w.w1[k, j] for k in range(16))
                hidden[j] = 0.5 * pre * (1 + math.tanh(math.sqrt(2 / math.pi) * (pre + 0.044715 * pre**3)))
            for o in range(8):
                expected[i, o] = w.b2[o] + sum(hidden[j] * w.w2[j, o] for j in range(32))
        np.testing.assert_allclose(mlp_adapter(x, w), expected, rtol=1e-12, atol=1e-12)

    def test_seeded_init(self):
        a, b = init_adapter(4, 8, 2, seed=3), init_adapter(4, 8, 2, seed=3)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)

    def test_dim_mismatch(self, rng):
        with pytest.raises(ShapeError):
            mlp_adapter(rng.standard_normal((2, 3)), init_adapter(4, 4, 4, seed=0))

    def test_bad_chain(self):
        with pytest.raises(ShapeError):
            AdapterWeights(np.zeros((2, 3)), np.zeros(3), np.zeros((4, 2)), np.zeros(2))

    @settings(max_examples=50)
    @given(st.integers(0, 2**32))
    def test_lipschitz(self, seed):
        r = np.random.default_rng(seed)
        w = init_adapter(12, 24, 6, seed=seed % 1000)
        x = r.uniform(-3, 3, (5, 12))
        bound = np.linalg.norm(w.w1, 2) * np.linalg.norm(w.w2, 2) * 1.2
        out = mlp_adapter(x, w)
        assert np.all(np.linalg.norm(out, axis=1) <= 10 * bound * np.linalg.norm(x, axis=1))


def test_gelu_values():
    assert gelu(0.0) == 0.0
    assert abs(gelu(10.0) - 10.0) < 1e-12


def test_patch_embedder_grid():
    emb = PatchEmbedder(patch=14, embed_dim=16, seed=0)
    fmap = emb(np.zeros((448, 448, 3)) + 0.5, multiple=2)
    assert fmap.shape == (32, 32, 16)
    assert emb(np.zeros((30, 30, 3)), multiple=2).shape == (4, 4, 16)


class TestPnm:
    def test_round_trip(self, tmp_path):
        img = np.round(synthetic_image(7, 5, 3) * 255) / 255
        write_pnm(tmp_path / "a.ppm", img)
        np.testing.assert_allclose(read_pnm(tmp_path / "a.ppm"), img, atol=1e-12)

    def test_pgm_with_comment(self):
        data = b"P5\n# a comment\n2 1\n255\n\x00\xff"
        img = decode_pnm(data)
        assert img.shape == (1, 2, 3)
        np.testing.assert_array_equal(img[0, :, 0], [0.0, 1.0])

    def test_sixteen_bit(self):
        data = b"P6 1 1 65535\n" + b"\xff\xff\x00\x00\x80\x00"
        np.testing.assert_allclose(decode_pnm(data)[0, 0], [1.0, 0.0, 32768 / 65535])

    def test_bad_magic(self):
        with pytest.raises(ImageFormatError) as exc:
            decode_pnm(b"P3\n1 1\n255\n0 0 0")
        assert exc.value.offset == 0

    def test_truncated(self):
        with pytest.raises(ImageFormatError) as exc:
            decode_pnm(b"P6\n2 2\n255\n\x00\x00")
        assert exc.value.offset == 13

    def test_non_numeric_header(self):
        with pytest.raises(ImageFormatError) as exc:
            decode_pnm(b"P6\n2 x\n255\n")
        assert exc.value.offset == 5
