"""Windowed mean distances D_{p,l}, their Weyl limit, and the tail functional J_p.

Integrals are left Riemann sums ``h * sum`` and window starts range over
grid points, so a window of length ``l`` is exactly ``m = l / h`` samples.
The limit l -> infinity is replaced by a finite ladder of window lengths;
since the limit equals the infimum, the minimum over the ladder is an
upper bound for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .signal import Grid, Signal, require_same_grid

P_MAX = 8.0


def check_p(p: float) -> float:
    if not (1.0 <= p <= P_MAX):
        raise InvalidArgument(f"p must lie in [1, {P_MAX:g}], got {p}")
    return float(p)


def window_sums(x: np.ndarray, m: int) -> np.ndarray:
    """Sums over every run of ``m`` consecutive samples (last axis)."""
    c = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    return c[..., m:] - c[..., :-m]


def window_max_mean(x: np.ndarray, m: int) -> np.ndarray:
    return window_sums(x, m).max(axis=-1) / m


def dpl_from_distances(r: np.ndarray, p: float, m: int, bounded: bool = False) -> float:
    """D_{p,l} from a precomputed distance series ``r`` and window size ``m``."""
    if bounded:
        r = np.minimum(r, 1.0)
        p = 1.0
    rp = r if p == 1.0 else r ** p
    return float(window_max_mean(rp, m)) ** (1.0 / p)


def _window_steps(grid: Grid, l: float, overlap: int) -> int:
    m = grid.steps(l, "window length")
    if m < 1:
        raise InvalidArgument("window length must be at least one step")
    if m > overlap:
        raise InvalidArgument(f"window length {l} exceeds the available overlap {overlap * grid.h}")
    return m


def _distances(f, g, bounded: bool) -> np.ndarray:
    if g is None:
        return f.metric.norm(f.values)
    require_same_grid(f.grid, g.grid)
    return f.distances(g, bounded=bounded)


def d_pl(f, g, p: float = 1.0, l: Optional[float] = None, bounded: bool = False) -> float:
    """sup over window starts of the p-mean of rho(f, g) on windows of length l.

    With ``bounded=True`` the truncated metric min(1, rho) is used and p is
    forced to 1.  Works for Signals and, with the Hausdorff metric, for
    SetValuedSignals.
    """
    p = 1.0 if bounded else check_p(p)
    l = f.grid.L if l is None else l
    m = _window_steps(f.grid, l, f.grid.n)
    return dpl_from_distances(_distances(f, g, bounded), p, m, bounded)


@dataclass(frozen=True)
class WindowLadder:
    lengths: tuple

    def __post_init__(self):
        ls = tuple(float(x) for x in self.lengths)
        if not ls:
            raise InvalidArgument("window ladder must be nonempty")
        if any(b <= a for a, b in zip(ls, ls[1:])):
            raise InvalidArgument("window ladder must be strictly increasing")
        object.__setattr__(self, "lengths", ls)

    @classmethod
    def geometric(cls, grid: Grid, smallest: float, largest: Optional[float] = None, factor: int = 2) -> "WindowLadder":
        largest = grid.L if largest is None else largest
        m0, m1 = grid.steps(smallest), int(math.floor(largest / grid.h + 1e-9))
        out, m = [], m0
        while m <= m1:
            out.append(m * grid.h)
            m *= factor
        return cls(tuple(out))

    def steps(self, grid: Grid, overlap: Optional[int] = None) -> list:
        overlap = grid.n if overlap is None else overlap
        return [_window_steps(grid, l, overlap) for l in self.lengths]


def as_ladder(ladder) -> WindowLadder:
    return ladder if isinstance(ladder, WindowLadder) else WindowLadder(tuple(ladder))


@dataclass
class SeminormReport:
    p: float
    bounded: bool
    entries: list  # [(l, value)]
    weyl_estimate: float
    monotonicity_defect: float
    slack: float
    pairs: list = field(default_factory=list)  # [(l, l1, violation, slack)]

    def values(self) -> list:
        return [v for _, v in self.entries]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "bounded": self.bounded,
            "entries": [{"l": l, "value": v} for l, v in self.entries],
            "weyl_estimate": self.weyl_estimate,
            "monotonicity_defect": self.monotonicity_defect,
            "slack": self.slack,
        }


def sandwich_pairs(entries, p: float, h: float, max_rp: float) -> list:
    """Violations of (l/l1)^{1/p} D_l <= D_l1 <= (1 + l/l1)^{1/p} D_l for l <= l1.

    On grid-aligned windows both bounds hold exactly; the slack
    2 h max(rho^p) / l only absorbs the continuous-vs-grid window starts.
    """
    out = []
    for i, (l, dl) in enumerate(entries):
        for l1, dl1 in entries[i:]:
            lower = (l / l1) ** (1.0 / p) * dl - dl1
            upper = dl1 - (1.0 + l / l1) ** (1.0 / p) * dl
            out.append((l, l1, max(0.0, lower, upper), 2.0 * h * max_rp / l))
    return out


def _report(r: np.ndarray, grid: Grid, p: float, ladder, bounded: bool) -> SeminormReport:
    ladder = as_ladder(ladder)
    if bounded:
        r = np.minimum(r, 1.0)
        p = 1.0
    rp = r if p == 1.0 else r ** p
    entries = []
    for l, m in zip(ladder.lengths, ladder.steps(grid, len(r))):
        entries.append((l, float(window_max_mean(rp, m)) ** (1.0 / p)))
    max_rp = float(rp.max()) if len(rp) else 0.0
    pairs = sandwich_pairs(entries, p, grid.h, max_rp)
    return SeminormReport(
        p=p,
        bounded=bounded,
        entries=entries,
        weyl_estimate=min(v for _, v in entries),
        monotonicity_defect=max(v for _, _, v, _ in pairs),
        slack=min(s for _, _, _, s in pairs),
        pairs=pairs,
    )


def weyl_seminorm(f, g, p: float, ladder, bounded: bool = False) -> SeminormReport:
    p = 1.0 if bounded else check_p(p)
    return _report(_distances(f, g, bounded), f.grid, p, ladder, bounded)


def norm_pl(f: Signal, p: float = 1.0, l: Optional[float] = None) -> float:
    return d_pl(f, None, p, l)


def norm_weyl(f: Signal, p: float, ladder) -> SeminormReport:
    return _report(f.metric.norm(f.values), f.grid, check_p(p), ladder, False)


# ---------------------------------------------------------------- J_p


@dataclass
class JpReport:
    p: float
    table: list  # [(delta, l, value)]
    estimate: float
    tolerance: float
    in_msharp: bool
    d_values: dict  # l -> D_{p,l}

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "table": [{"delta": d, "l": l, "value": v} for d, l, v in self.table],
            "estimate": self.estimate,
            "tolerance": self.tolerance,
            "in_msharp": self.in_msharp,
        }


def _top_sums(rp: np.ndarray, m: int, ks: Sequence[int], block: int = 256) -> np.ndarray:
    """For each k: max over windows of the sum of the k largest samples."""
    from numpy.lib.stride_tricks import sliding_window_view

    views = sliding_window_view(rp, m)
    full = window_sums(rp, m)
    best = np.zeros(len(ks))
    cols = np.clip(np.asarray(ks) - 1, 0, m - 1)
    for s in range(0, views.shape[0], block):
        w = -np.sort(-views[s:s + block], axis=1)
        csum = np.cumsum(w, axis=1)[:, cols]
        # top-k sum never exceeds the window sum; min() only removes rounding
        csum = np.minimum(csum, full[s:s + block, None])
        best = np.maximum(best, csum.max(axis=0))
    best[np.asarray(ks) == 0] = 0.0
    return best


def j_p(f, g=None, p: float = 1.0, deltas=(0.1, 0.01), ladder=None, tolerance: float = 0.05) -> JpReport:
    """Tail functional J_p(f, g) on a (delta, l) table; g=None means the origin.

    The inner sup over subsets T of a window with meas T <= delta*l is the
    sum of the floor(delta*l/h) largest samples of rho^p in that window.
    """
    p = check_p(p)
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if not deltas or any(not (0.0 < d < 1.0) for d in deltas):
        raise InvalidArgument("deltas must lie in (0, 1)")
    ladder = as_ladder(ladder if ladder is not None else (f.grid.L,))
    r = _distances(f, g, False)
    rp = r if p == 1.0 else r ** p
    table, d_values = [], {}
    for l, m in zip(ladder.lengths, ladder.steps(f.grid, len(r))):
        ks = [int(math.floor(d * m + 1e-9)) for d in deltas]
        tops = _top_sums(rp, m, ks)
        d_values[l] = float(window_max_mean(rp, m)) ** (1.0 / p)
        for d, t in zip(deltas, tops):
            table.append((d, l, float(t / m) ** (1.0 / p)))
    est = next(v for d, l, v in table if d == deltas[-1] and l == ladder.lengths[-1])
    return JpReport(p, table, est, tolerance, bool(est < tolerance), d_values)
