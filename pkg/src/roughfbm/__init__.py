"""Rough paths above fractional Brownian motion and Cameron-Martin paths."""

__version__ = "0.1.0"

from .kernel import (CameronMartinPath, HurstParams, calibrate_cH, cm_eval, cm_norm,  # noqa: E402
                     fbm_covariance, kernel_dt, kernel_eval, kernel_values)
from .ldp import ExperimentConfig, McEstimate, rate_function_cm  # noqa: E402
from .metrics import MetricParams, d_jp, d_p_dyadic, dp_upper_bound  # noqa: E402
from .sampler import FbmSamplePath, coarsen, interpolate, sample_fbm, sample_fbm_batch  # noqa: E402
from .tensor import (DyadicRoughPath, TruncatedTensor, chen_compose, refine_difference,  # noqa: E402
                     segment_signature, smooth_rough_path)
from .volterra import (HoelderFunction, IntegralReport, cm_level2, cm_level3,  # noqa: E402
                       integrate_against_h, integrate_against_hm, k_norm, k_star)

__all__ = [
    "CameronMartinPath", "HurstParams", "calibrate_cH", "cm_eval", "cm_norm", "fbm_covariance",
    "kernel_dt", "kernel_eval", "kernel_values", "ExperimentConfig", "McEstimate", "rate_function_cm",
    "MetricParams", "d_jp", "d_p_dyadic", "dp_upper_bound", "FbmSamplePath", "coarsen", "interpolate",
    "sample_fbm", "sample_fbm_batch", "DyadicRoughPath", "TruncatedTensor", "chen_compose",
    "refine_difference", "segment_signature", "smooth_rough_path", "HoelderFunction", "IntegralReport",
    "cm_level2", "cm_level3", "integrate_against_h", "integrate_against_hm", "k_norm", "k_star",
]
