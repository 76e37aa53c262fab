"""Toolkit for equi-Weyl almost-periodic signals on finite grids.

Windowed Weyl-type seminorms, almost-period scans and classification,
Bochner-Fourier exponent tables, level-set decompositions into mask
families, and selections of set-valued signals.
"""
from .errors import ApwtkError, CertificateError, ConstructionError, InvalidArgument, PreconditionError
from .metric import Metric, PointSet, dist_point_set, eps_net_check, hausdorff
from .signal import Grid, Mask, SetValuedSignal, Signal, generate, shift, trig
from .seminorms import WindowLadder, d_pl, j_p, norm_weyl, weyl_seminorm
from .almost_periodicity import APQuery, scan_almost_periods
from .fourier import scan_exponents, trig_approximate
from .decomposition import build_separator, covering_centers, decompose, level_set, separation_measure
from .selection import Modulus, dense_family, select_eps, select_eps_net, select_modulus

__version__ = "0.1.0"

__all__ = [
    "ApwtkError", "CertificateError", "ConstructionError", "InvalidArgument", "PreconditionError",
    "Metric", "PointSet", "dist_point_set", "eps_net_check", "hausdorff",
    "Grid", "Mask", "SetValuedSignal", "Signal", "generate", "shift", "trig",
    "WindowLadder", "d_pl", "j_p", "norm_weyl", "weyl_seminorm",
    "APQuery", "scan_almost_periods",
    "scan_exponents", "trig_approximate",
    "build_separator", "covering_centers", "decompose", "level_set", "separation_measure",
    "Modulus", "dense_family", "select_eps", "select_eps_net", "select_modulus",
]
