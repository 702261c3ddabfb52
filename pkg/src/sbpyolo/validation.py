"""Input validation helpers in the spirit of ``sklearn.utils.check_array``."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigError, ShapeError

_AXES = ("batch", "channels", "height", "width")


def check_tensor(x, *, channels=None, name="x"):
    """Return ``x`` as a finite float64 array of shape (n, c, h, w).

    Raises ShapeError naming the offending axis when the rank or channel
    count is wrong.
    """
    arr = np.asarray(x)
    if arr.ndim != 4:
        raise ShapeError(
            f"{name} must be rank 4 (n, c, h, w), got shape {arr.shape}", dim="rank"
        )
    for axis, size in zip(_AXES, arr.shape):
        if size < 1:
            raise ShapeError(f"{name} has empty {axis} axis: {arr.shape}", dim=axis)
    arr = check_array(arr, allow_nd=True, dtype=np.float64, input_name=name)
    if channels is not None and arr.shape[1] != channels:
        raise ShapeError(
            f"{name} has {arr.shape[1]} channels, expected {channels}", dim="channels"
        )
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_even(value, name):
    value = check_positive_int(value, name)
    if value % 2:
        raise ConfigError(f"{name} must be even, got {value}")
    return value


def check_odd_kernel(value, name):
    value = check_positive_int(value, name)
    if value % 2 == 0:
        raise ConfigError(f"{name} must be odd, got {value}")
    return value
