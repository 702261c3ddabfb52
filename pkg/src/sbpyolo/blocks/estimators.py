"""scikit-learn style wrappers around the functional blocks.

``fit`` only reads the input's channel count and spatial size and draws
seeded weights for it (like a random projection); ``transform`` runs the
forward pass. Fitted weights live in ``params_`` and may be replaced by the
caller before ``transform``.
"""

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ..validation import check_tensor
from . import functional as F


class _BlockTransformer(TransformerMixin, BaseEstimator):
    def _layers(self, c1, h, w):
        raise NotImplementedError

    def _forward(self, X, params):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = check_tensor(X, name="X")
        self.n_channels_in_ = X.shape[1]
        self.layers_ = self._layers(*X.shape[1:])
        self.params_ = F.init_params(self.layers_, check_random_state(self.random_state))
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_tensor(X, channels=self.n_channels_in_, name="X")
        return self._forward(X, self.params_)

    @property
    def n_params_(self):
        check_is_fitted(self, "params_")
        return F.count_allocated(self.params_)


class GhostConv(_BlockTransformer):
    """Ghost convolution: dense conv to half the outputs plus a cheap depthwise copy.

    Parameters
    ----------
    out_channels : int
        Output width; must be even.
    primary_kernel : int, default=3
        Kernel of the dense primary convolution.
    cheap_kernel : int, default=5
        Kernel of the depthwise "ghost" convolution.
    stride : int, default=1
    bias : bool, default=True
    random_state : int, RandomState instance or None
    """

    def __init__(self, out_channels, primary_kernel=3, cheap_kernel=5, stride=1, bias=True, random_state=None):
        self.out_channels = out_channels
        self.primary_kernel = primary_kernel
        self.cheap_kernel = cheap_kernel
        self.stride = stride
        self.bias = bias
        self.random_state = random_state

    def _layers(self, c1, h, w):
        return F.ghost_conv_layers(
            c1, h, w, self.out_channels, self.primary_kernel, self.cheap_kernel, self.stride, self.bias
        )

    def _forward(self, X, params):
        return F.ghost_conv(X, params, s=self.stride)


class GSConv(_BlockTransformer):
    """Dense conv, depthwise conv on its output, concat and 2-group shuffle."""

    def __init__(self, out_channels, kernel=3, dw_kernel=3, stride=1, bias=True, random_state=None):
        self.out_channels = out_channels
        self.kernel = kernel
        self.dw_kernel = dw_kernel
        self.stride = stride
        self.bias = bias
        self.random_state = random_state

    def _layers(self, c1, h, w):
        return F.gs_conv_layers(c1, h, w, self.out_channels, self.kernel, self.dw_kernel, self.stride, self.bias)

    def _forward(self, X, params):
        return F.gs_conv(X, params, s=self.stride)


class GSBottleneck(_BlockTransformer):
    """Residual GSConv pair; maps C1 channels to C1/2 at the same resolution."""

    def __init__(self, bias=True, random_state=None):
        self.bias = bias
        self.random_state = random_state

    def _layers(self, c1, h, w):
        return F.gs_bottleneck_layers(c1, h, w, self.bias)

    def _forward(self, X, params):
        return F.gs_bottleneck(X, params)


class VoVGSCSPC(_BlockTransformer):
    def __init__(self, out_channels, bias=True, random_state=None):
        self.out_channels = out_channels
        self.bias = bias
        self.random_state = random_state

    def _layers(self, c1, h, w):
        return F.vov_gscspc_layers(c1, h, w, self.out_channels, self.bias)

    def _forward(self, X, params):
        return F.vov_gscspc(X, params)


class LEDH(TransformerMixin, BaseEstimator):
    """Lightweight detection head over four pyramid levels.

    ``X`` is a list of four (n, c_i, h_i, w_i) feature maps, finest first;
    ``transform`` returns one (n, 4 * reg_max + n_classes, h_i, w_i) map per
    level.
    """

    def __init__(self, n_classes, reg_max=16, group_divisor=F.GROUP_DIVISOR, random_state=None):
        self.n_classes = n_classes
        self.reg_max = reg_max
        self.group_divisor = group_divisor
        self.random_state = random_state

    def fit(self, X, y=None):
        X = [check_tensor(x, name=f"X[{i}]") for i, x in enumerate(X)]
        self.level_shapes_ = [x.shape[1:] for x in X]
        self.layers_ = F.ledh_head_layers(self.level_shapes_, self.n_classes, self.reg_max, self.group_divisor)
        self.params_ = F.init_params(self.layers_, check_random_state(self.random_state))
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = [check_tensor(x, channels=s[0], name=f"X[{i}]") for i, (x, s) in enumerate(zip(X, self.level_shapes_))]
        return F.ledh_head(X, self.params_, d=self.group_divisor)

    @property
    def n_params_(self):
        check_is_fitted(self, "params_")
        return F.count_allocated(self.params_)
