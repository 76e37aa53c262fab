"""Bochner means, Fourier exponent tables and trigonometric approximation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidArgument
from .seminorms import norm_weyl
from .signal import Signal


def complex_values(f: Signal, complex_pairs: bool = False) -> np.ndarray:
    """Samples as an (n, d) complex array; pairs of coordinates become re/im."""
    if not complex_pairs:
        return f.values.astype(complex)
    if f.dimension % 2:
        raise InvalidArgument("complex_pairs needs an even number of coordinates")
    return f.values[:, 0::2] + 1j * f.values[:, 1::2]


def bochner_mean(f: Signal, lam: float, complex_pairs: bool = False) -> np.ndarray:
    """(1/L) * h * sum_k e^{-i lam t_k} f(t_k) over the whole window."""
    z = complex_values(f, complex_pairs)
    t = f.grid.times
    w = np.exp(-1j * lam * t)
    return (w @ z) * f.grid.h / f.grid.L


def bochner_means(f: Signal, lams: np.ndarray, complex_pairs: bool = False, block: int = 512) -> np.ndarray:
    """Means for many frequencies at once, shape (len(lams), d)."""
    z = complex_values(f, complex_pairs)
    t = f.grid.times
    out = np.empty((len(lams), z.shape[1]), dtype=complex)
    for s in range(0, len(lams), block):
        w = np.exp(-1j * np.outer(lams[s:s + block], t))
        out[s:s + block] = w @ z
    return out * f.grid.h / f.grid.L


@dataclass
class Exponent:
    lam: float
    coefficient: np.ndarray
    magnitude: float


@dataclass
class ExponentTable:
    entries: list
    resolution: float
    complex_pairs: bool = False
    close_pairs: list = field(default_factory=list)  # (lam_a, lam_b) closer than 2*resolution

    def __len__(self):
        return len(self.entries)

    @property
    def lambdas(self) -> list:
        return [e.lam for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "lambda": e.lam,
                    "re": e.coefficient.real.tolist(),
                    "im": e.coefficient.imag.tolist(),
                    "magnitude": e.magnitude,
                }
                for e in self.entries
            ],
            "resolution": self.resolution,
            "close_pairs": [list(p) for p in self.close_pairs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentTable":
        entries = [
            Exponent(float(e["lambda"]), np.array(e["re"]) + 1j * np.array(e["im"]), float(e["magnitude"]))
            for e in d["entries"]
        ]
        return cls(entries, float(d.get("resolution", 0.0)))


def window_response(nu, grid) -> np.ndarray:
    """Mean of e^{-i nu t} over the grid: the scan's response to a unit exponent offset by nu."""
    nu = np.asarray(nu, dtype=float)
    den = 1 - np.exp(-1j * nu * grid.h)
    small = np.abs(den) < 1e-12
    num = 1 - np.exp(-1j * nu * grid.h * grid.n)
    ratio = np.where(small, grid.n, num / np.where(small, 1.0, den))
    return ratio * np.exp(-1j * nu * grid.t0) / grid.n


def _residual_mean(f, lam, found, complex_pairs):
    z = bochner_mean(f, lam, complex_pairs)
    for e in found:
        z = z - window_response(lam - e.lam, f.grid) * e.coefficient
    return z


def _refine(f, lam, step, found, complex_pairs):
    """Golden-section maximisation of the residual |mean| on [lam - step, lam + step]."""
    obj = lambda x: -float(np.linalg.norm(_residual_mean(f, x, found, complex_pairs)))
    a, c = lam - step, lam + step
    try:
        res = minimize_scalar(obj, bracket=(a, lam, c), method="golden", tol=1e-10)
        x = float(res.x)
    except ValueError:
        return lam
    if not (a <= x <= c) or obj(x) > obj(lam):
        return lam
    return x


def _polish(f, found, step, lo, hi, complex_pairs, rounds: int = 2) -> list:
    """Re-refine each component with all the others subtracted (removes cross-talk bias)."""
    for _ in range(rounds):
        for j in range(len(found)):
            others = found[:j] + found[j + 1:]
            lam = min(max(_refine(f, found[j].lam, step / 4, others, complex_pairs), lo), hi)
            comp = _residual_mean(f, lam, others, complex_pairs)
            found[j] = Exponent(lam, comp, float(np.linalg.norm(comp)))
    return found


def scan_exponents(
    f: Signal,
    lambda_range: tuple,
    step: Optional[float] = None,
    top_k: int = 16,
    floor: float = 1e-3,
    complex_pairs: bool = False,
) -> ExponentTable:
    """Exponents lambda with |M{e^{-i lam t} f}| above ``floor``, strongest first.

    Peaks are taken one at a time from the scan of |mean| over a frequency
    grid.  After each peak is refined, its exact window response is
    subtracted from the scan, so side lobes of strong exponents are not
    reported as exponents.  Coefficients are the plain Bochner means of f.
    A step of at most pi/L is recommended so that no exponent falls between
    grid points unnoticed.
    """
    L = f.grid.L
    resolution = 2 * math.pi / L
    step = math.pi / L if step is None else step
    lo, hi = lambda_range
    if not step > 0 or hi < lo:
        raise InvalidArgument("empty frequency grid")
    lams = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
    if lams.size == 0:
        raise InvalidArgument("empty frequency grid")
    full = bochner_means(f, lams, complex_pairs)
    resid = full.copy()
    found = []  # components as extracted from the residual scan
    kept = []
    while len(kept) < top_k:
        mags = np.linalg.norm(resid, axis=1)
        for e in found:
            mags[np.abs(lams - e.lam) < resolution] = 0.0
        i = int(np.argmax(mags))
        if not mags[i] > floor:
            break
        lam = min(max(_refine(f, float(lams[i]), step, found, complex_pairs), lo), hi)
        comp = _residual_mean(f, lam, found, complex_pairs)
        found.append(Exponent(lam, comp, float(np.linalg.norm(comp))))
        found = _polish(f, found, step, lo, hi, complex_pairs)
        resid = full.copy()
        for e in found:
            resid -= window_response(lams - e.lam, f.grid)[:, None] * e.coefficient[None, :]
        kept = [
            Exponent(e.lam, c, float(np.linalg.norm(c)))
            for e in found
            for c in [bochner_mean(f, e.lam, complex_pairs)]
        ]
    kept.sort(key=lambda e: (-e.magnitude, e.lam))
    separated = []
    for e in kept:
        if e.magnitude > floor and all(abs(e.lam - k.lam) >= resolution for k in separated):
            separated.append(e)
    kept = separated
    close = [
        (a.lam, b.lam)
        for i, a in enumerate(kept)
        for b in kept[i + 1:]
        if abs(a.lam - b.lam) < 2 * resolution
    ]
    return ExponentTable(kept, resolution, complex_pairs, close)


def trig_values(table: ExponentTable, k: int, f: Signal) -> np.ndarray:
    """Partial sum of the first k table terms on f's grid, as real coordinates."""
    t = f.grid.times
    z = np.zeros((f.grid.n, f.dimension // 2 if table.complex_pairs else f.dimension), dtype=complex)
    for e in table.entries[:k]:
        z += np.exp(1j * e.lam * t)[:, None] * e.coefficient[None, :]
    if table.complex_pairs:
        out = np.empty((f.grid.n, f.dimension))
        out[:, 0::2], out[:, 1::2] = z.real, z.imag
        return out
    return z.real


def trig_approximate(f: Signal, table: ExponentTable, k: int, p: float = 2.0, ladder=None):
    """Partial trigonometric sum over the first k exponents and its Weyl residual.

    The approximant's exponents are a subset of the table by construction.
    """
    if k < 0 or k > len(table):
        raise InvalidArgument(f"k={k} outside 0..{len(table)}")
    approx = f.with_values(trig_values(table, k, f))
    ladder = ladder if ladder is not None else (f.grid.L,)
    resid = f.with_values(f.values - approx.values)
    return approx, norm_weyl(resid, p, ladder)


def dominant_frequency(table: ExponentTable, min_lambda: float = 1e-9) -> Optional[float]:
    """Largest-magnitude nonzero exponent, as a positive frequency."""
    for e in table.entries:
        if abs(e.lam) > max(min_lambda, table.resolution / 2):
            return abs(e.lam)
    return None
