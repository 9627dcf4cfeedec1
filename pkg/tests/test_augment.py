import numpy as np
import pytest

from randquant.augment import (
    AugmentPipeline,
    CenterCrop,
    RandomCrop,
    RandomResizedCrop,
    RandomizedQuantize,
    augment_batch,
    center_crop,
    make_views,
    random_resized_crop,
    resize_bilinear,
)
from randquant.quantizer import QuantizerConfig
from randquant.rng import CounterRng, SeedPolicy
from randquant.tensor import ChannelTensor, from_grid, to_grid


def grid(h, w, c=1):
    return from_grid(np.arange(h * w * c, dtype=float).reshape(h, w, c))


class TestCenterCrop:
    def test_even(self):
        out = to_grid(center_crop(grid(4, 4), 2, 2))[:, :, 0]
        assert out.tolist() == [[5.0, 6.0], [9.0, 10.0]]

    def test_odd_offset_floors(self):
        out = to_grid(center_crop(grid(5, 5), 2, 2))[:, :, 0]
        assert out.tolist() == [[6.0, 7.0], [11.0, 12.0]]

    def test_full_size_identity(self):
        t = grid(3, 5, 2)
        assert center_crop(t, 3, 5) == t

    def test_errors(self):
        with pytest.raises(ValueError):
            center_crop(ChannelTensor(np.zeros((4, 1))), 2, 2)
        with pytest.raises(ValueError):
            center_crop(grid(4, 4), 5, 2)


class TestResize:
    def test_constant_field_upsampled(self):
        g = np.full((2, 2, 3), 0.37)
        out = resize_bilinear(g, 3, 3)
        assert out.shape == (3, 3, 3) and np.all(out == 0.37)

    def test_same_size_is_identity(self):
        g = np.random.default_rng(0).normal(size=(5, 7, 2))
        assert np.array_equal(resize_bilinear(g, 5, 7), g)

    def test_half_pixel_upsample_1d(self):
        # 2 -> 4 samples: source coordinates -0.25, 0.25, 0.75, 1.25 clamp to 0, .25, .75, 1
        g = np.array([[0.0, 4.0]])[:, :, None]
        out = resize_bilinear(g, 1, 4)[0, :, 0]
        assert out.tolist() == [0.0, 1.0, 3.0, 4.0]


class TestRandomResizedCrop:
    def test_degenerate_parameters_identity(self):
        t = from_grid(np.random.default_rng(0).random((6, 6, 3)))
        out = random_resized_crop(t, 6, 6, (1.0, 1.0), (1.0, 1.0), CounterRng(3))
        assert out == t

    def test_seed_reproduces_window(self):
        t = from_grid(np.random.default_rng(0).random((16, 16, 3)))
        a = random_resized_crop(t, 8, 8, rng=CounterRng(5))
        b = random_resized_crop(t, 8, 8, rng=CounterRng(5))
        c = random_resized_crop(t, 8, 8, rng=CounterRng(6))
        assert a == b and a.grid_shape == (8, 8)
        assert not a == c

    def test_constant_grid(self):
        t = from_grid(np.full((2, 2, 1), 0.5))
        out = random_resized_crop(t, 3, 3, rng=CounterRng(0))
        assert np.all(out.data == 0.5)

    def test_fallback_on_impossible_aspect(self):
        # a 1-wide column cannot host windows with aspect near 1, so the centered fallback is used
        t = ChannelTensor(np.arange(20.0)[:, None], (20, 1))
        out = random_resized_crop(t, 4, 1, (0.5, 0.6), (1.0, 1.0), CounterRng(0))
        assert out.grid_shape == (4, 1)

    def test_validation(self):
        t = grid(4, 4)
        with pytest.raises(ValueError):
            random_resized_crop(t, 2, 2, (0.0, 1.0), rng=CounterRng(0))
        with pytest.raises(ValueError):
            random_resized_crop(ChannelTensor(np.zeros((4, 1))), 2, 2, rng=CounterRng(0))


class TestPipeline:
    def test_empty_pipeline_is_identity(self):
        t = grid(3, 3, 2)
        v1, v2 = make_views(t, AugmentPipeline(), 0)
        assert v1 == t and v2 == t

    def test_single_bin_views(self):
        t = from_grid(np.random.default_rng(0).random((8, 8, 3)))
        pipe = AugmentPipeline((RandomizedQuantize(QuantizerConfig(1)),), SeedPolicy(1))
        v1, v2 = make_views(t, pipe, 0)
        for v in (v1, v2):
            assert np.all(v.data == v.data[0])
        assert not np.array_equal(v1.data[0], v2.data[0])

    def test_rrc_then_quantize_deterministic(self):
        t = from_grid(np.random.default_rng(0).random((16, 16, 3)))
        pipe = AugmentPipeline((RandomResizedCrop(8, 8), RandomizedQuantize(QuantizerConfig(8))), SeedPolicy(7))
        a = make_views(t, pipe, 4)
        b = make_views(t, pipe, 4)
        assert a[0] == b[0] and a[1] == b[1]
        assert not a[0] == a[1]

    def test_quantize_uses_crop_statistics(self):
        t = from_grid(np.random.default_rng(0).random((16, 16, 1)))
        pipe = AugmentPipeline((CenterCrop(4, 4), RandomizedQuantize(QuantizerConfig(3))), SeedPolicy(0))
        out = pipe(t, 0)
        crop = center_crop(t, 4, 4)
        assert out.data.min() >= crop.data.min() and out.data.max() <= crop.data.max()

    def test_declared_shapes(self):
        t = from_grid(np.random.default_rng(0).random((10, 12, 3)))
        pipe = AugmentPipeline((RandomResizedCrop(6, 5), CenterCrop(4, 4), RandomizedQuantize()), SeedPolicy(0))
        assert pipe(t, 0).data.shape == pipe.output_shape((120, 3)) == (16, 3)

    def test_without_quantization(self):
        pipe = AugmentPipeline((RandomResizedCrop(6, 5), RandomizedQuantize()), SeedPolicy(0))
        assert pipe.without_quantization().stages == (RandomResizedCrop(6, 5),)

    def test_batch_matches_single(self):
        x = np.random.default_rng(1).normal(size=(5, 32, 4))
        pipe = AugmentPipeline((RandomCrop(24, 1), RandomizedQuantize(QuantizerConfig(6))), SeedPolicy(3))
        got = augment_batch(pipe, x, np.arange(5) * 3, view=1)
        for i in range(5):
            ref = pipe(ChannelTensor(x[i], (32, 1)), i * 3, view=1)
            assert np.array_equal(got[i], ref.data)
