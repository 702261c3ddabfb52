from .decode import decode_detections, dfl_expectation
from .estimators import GSBottleneck, GSConv, GhostConv, LEDH, VoVGSCSPC
from .functional import (
    ghost_conv,
    gs_bottleneck,
    gs_conv,
    ledh_groups,
    ledh_head,
    plain_head,
    vov_gscspc,
)

__all__ = [
    "GhostConv",
    "GSConv",
    "GSBottleneck",
    "VoVGSCSPC",
    "LEDH",
    "ghost_conv",
    "gs_conv",
    "gs_bottleneck",
    "vov_gscspc",
    "ledh_head",
    "ledh_groups",
    "plain_head",
    "decode_detections",
    "dfl_expectation",
]
