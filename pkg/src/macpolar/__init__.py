"""Polar codes for two-user multiple access channels.

Separate per-user polar encoders, joint code construction over a tunable
decoding-order building block, and a joint successive-cancellation decoder
that sweeps out the uniform rate region.
"""

__version__ = "0.1.0"

from .channels import (
    DiscreteBimc,
    DiscreteMac,
    GaussianMacSpec,
    RegionVertices,
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
    mac_mutual_information,
    mac_region_vertices,
    merge_outputs,
    mutual_information,
    quantize_gaussian_mac,
)
