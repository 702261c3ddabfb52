import itertools

import numpy as np
import pytest

from sbpyolo.exceptions import ConfigError, ShapeError
from sbpyolo.tensor import (
    ConvSpec,
    add,
    channel_shuffle,
    concat_channels,
    conv2d,
    conv_output_size,
    depthwise_conv2d,
    maxpool2d,
    shuffle_permutation,
    silu,
    split_channels,
    upsample2x_nearest,
)


def naive_conv(x, weight, bias=None, stride=1, padding=0, groups=1):
    """Seven nested loops; the reference every fast path is checked against."""
    n, c1, h, w = x.shape
    c2, cg, k, _ = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    out = np.zeros((n, c2, ho, wo))
    per_group = c2 // groups
    for b, o, i, j in itertools.product(range(n), range(c2), range(ho), range(wo)):
        g = o // per_group
        acc = 0.0
        for ci, di, dj in itertools.product(range(cg), range(k), range(k)):
            acc += xp[b, g * cg + ci, i * stride + di, j * stride + dj] * weight[o, ci, di, dj]
        out[b, o, i, j] = acc + (bias[o] if bias is not None else 0.0)
    return out


def test_box_filter_counts():
    y = conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), padding=1)
    assert y[0, 0, 1, 1] == 9.0
    assert y[0, 0, 0, 0] == y[0, 0, 2, 2] == 4.0


def test_pointwise_dot():
    x = np.array([1.0, 2.0]).reshape(1, 2, 1, 1)
    assert conv2d(x, np.full((1, 2, 1, 1), 0.5))[0, 0, 0, 0] == 1.5


@pytest.mark.parametrize("groups", [1, 2, 4])
@pytest.mark.parametrize("stride", [1, 2])
def test_conv_matches_naive_loops(rng, groups, stride):
    x = rng.standard_normal((2, 4, 5, 6))
    w = rng.standard_normal((8, 4 // groups, 3, 3))
    b = rng.standard_normal(8)
    fast = conv2d(x, w, b, stride=stride, groups=groups)
    np.testing.assert_allclose(fast, naive_conv(x, w, b, stride, 1, groups), rtol=0, atol=1e-12)


def test_grouped_equals_split_and_concat(rng):
    for shape in [(1, 4, 5, 5), (2, 16, 8, 8)]:
        x = rng.standard_normal(shape)
        c = shape[1]
        w = rng.standard_normal((c, c // 2, 3, 3))
        grouped = conv2d(x, w, groups=2)
        halves = [conv2d(x[:, i * c // 2 : (i + 1) * c // 2], w[i * c // 2 : (i + 1) * c // 2]) for i in range(2)]
        assert np.max(np.abs(grouped - np.concatenate(halves, axis=1))) < 1e-12


def test_conv_is_linear(rng):
    x, y = rng.standard_normal((2, 1, 3, 7, 7))
    w = rng.standard_normal((5, 3, 3, 3))
    a, b = 1.7, -0.3
    lhs = conv2d(a * x + b * y, w)
    rhs = a * conv2d(x, w) + b * conv2d(y, w)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))


@pytest.mark.parametrize("k,s", list(itertools.product([1, 3, 5], [1, 2])))
def test_output_size_sweep(rng, k, s):
    for p in (0, k // 2):
        x = rng.standard_normal((1, 2, 9, 8))
        y = conv2d(x, rng.standard_normal((3, 2, k, k)), stride=s, padding=p)
        assert y.shape[2:] == ((9 + 2 * p - k) // s + 1, (8 + 2 * p - k) // s + 1)
        assert y.shape[2] == conv_output_size(9, k, s, p)
        assert ConvSpec(2, 3, k, s, p).output_hw(9, 8) == y.shape[2:]


def test_default_padding_keeps_size(rng):
    x = rng.standard_normal((1, 2, 6, 6))
    assert conv2d(x, rng.standard_normal((2, 2, 5, 5))).shape == x.shape


def test_conv_shape_errors_name_dimension(rng):
    x = rng.standard_normal((1, 3, 4, 4))
    with pytest.raises(ShapeError) as err:
        conv2d(x, rng.standard_normal((2, 4, 3, 3)))
    assert err.value.dim is not None
    with pytest.raises(ConfigError):
        ConvSpec(3, 4, 3, groups=2)
    with pytest.raises(ShapeError):
        conv2d(rng.standard_normal((3, 4, 4)), rng.standard_normal((2, 3, 3, 3)))


def test_depthwise_identity_and_box_filter(rng):
    x = rng.standard_normal((1, 2, 3, 3))
    ident = np.zeros((2, 1, 3, 3))
    ident[:, 0, 1, 1] = 1.0
    np.testing.assert_array_equal(depthwise_conv2d(x, ident), x)
    y = depthwise_conv2d(np.ones((1, 2, 3, 3)), np.ones((2, 1, 3, 3)), padding=1)
    assert np.all(y[0, :, 1, 1] == 9.0)


@pytest.mark.parametrize("stride,k", [(1, 3), (2, 3), (1, 5), (2, 5)])
def test_depthwise_equals_grouped_conv(rng, stride, k):
    x = rng.standard_normal((2, 6, 9, 9))
    w = rng.standard_normal((6, 1, k, k))
    b = rng.standard_normal(6)
    dw = depthwise_conv2d(x, w, b, stride=stride)
    ref = naive_conv(x, w, b, stride, k // 2, 6)
    assert np.max(np.abs(dw - ref)) < 1e-12
    assert np.max(np.abs(conv2d(x, w, b, stride=stride, groups=6) - ref)) < 1e-12


def test_shuffle_examples():
    x = np.arange(4, dtype=float).reshape(1, 4, 1, 1)
    assert channel_shuffle(x, 2).ravel().tolist() == [0, 2, 1, 3]
    np.testing.assert_array_equal(channel_shuffle(x, 1), x)
    np.testing.assert_array_equal(channel_shuffle(channel_shuffle(x, 2), 2), x)
    with pytest.raises(ConfigError):
        channel_shuffle(np.zeros((1, 6, 1, 1)), 4)


@pytest.mark.parametrize("c,g", [(4, 2), (12, 3), (16, 4), (10, 5)])
def test_shuffle_is_bijection_and_inverse_recovers(rng, c, g):
    perm = shuffle_permutation(c, g)
    assert sorted(perm) == list(range(c))
    for j in range(c):
        assert perm[j] == (j % g) * (c // g) + j // g
    x = rng.standard_normal((2, c, 3, 3))
    y = channel_shuffle(x, g)
    np.testing.assert_array_equal(y[:, np.argsort(perm)], x)


def test_concat_and_split_roundtrip(rng):
    a, b = rng.standard_normal((1, 2, 4, 4)), rng.standard_normal((1, 3, 4, 4))
    y = concat_channels([a, b])
    assert y.shape == (1, 5, 4, 4)
    ra, rb = split_channels(y, [2, 3])
    np.testing.assert_array_equal(ra, a)
    np.testing.assert_array_equal(rb, b)
    np.testing.assert_array_equal(concat_channels([a]), a)
    with pytest.raises(ShapeError):
        concat_channels([a, rng.standard_normal((1, 3, 2, 4))])


def test_elementwise_helpers(rng):
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    up = upsample2x_nearest(x)
    assert up.shape == (1, 1, 4, 4)
    np.testing.assert_array_equal(up[0, 0], np.kron(x[0, 0], np.ones((2, 2))))
    assert silu(np.array(0.0)) == 0.0
    z = rng.standard_normal((1, 2, 3, 3))
    np.testing.assert_array_equal(add(z, np.zeros_like(z)), z)
    with pytest.raises(ShapeError):
        add(z, np.zeros((1, 2, 3, 4)))


def test_silu_is_stable_for_large_inputs():
    v = np.array([-1000.0, -50.0, 0.0, 50.0, 1000.0])
    with np.errstate(over="raise", invalid="raise"):
        y = silu(v)
    assert np.all(np.isfinite(y))
    assert y[-1] == 1000.0


def test_maxpool_same_padding(rng):
    x = rng.standard_normal((1, 1, 5, 5))
    y = maxpool2d(x, 5, stride=1, padding=2)
    assert y.shape == x.shape
    assert y[0, 0, 2, 2] == x.max()
    assert y[0, 0, 0, 0] == x[0, 0, :3, :3].max()
