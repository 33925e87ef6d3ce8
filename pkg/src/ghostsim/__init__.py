"""Differential ghost imaging with twin-beam and thermal light.

Monte Carlo simulation of correlated photon-count frames, GI/DGI/ODGI
reconstruction, closed-form SNR predictions and efficiency calibration.
"""
from .analytic import k_opt, nrf_prediction, snr, snr_gi_closed_form, snr_ratios
from .calib import estimate_eta_covariance, fit_eta, FitFixed
from .errors import (ConvergenceError, FormatError, GhostSimError, MagicMismatchError,
                     TruncatedFileError, ValidationError, VersionMismatchError)
from .estimators import (measure_nrf, measure_snr, reconstruct, reconstruct_from_buckets,
                         tiled_reconstruct)
from .io import export_image, read_image, read_stack, results_table, write_stack
from .scene import TransmissionMap, make_binary_scene, scene_stats, uniform_scene
from .simulator import FrameStack, SourceParams, apply_extra_loss, simulate_buckets, simulate_pair

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "FitFixed", "FormatError", "FrameStack", "GhostSimError",
    "MagicMismatchError", "SourceParams", "TransmissionMap", "TruncatedFileError",
    "ValidationError", "VersionMismatchError", "apply_extra_loss", "estimate_eta_covariance",
    "export_image", "fit_eta", "k_opt", "make_binary_scene", "measure_nrf", "measure_snr",
    "nrf_prediction", "read_image", "read_stack", "reconstruct", "reconstruct_from_buckets",
    "results_table", "scene_stats", "simulate_buckets", "simulate_pair", "snr",
    "snr_gi_closed_form", "snr_ratios", "tiled_reconstruct", "uniform_scene", "write_stack",
]
